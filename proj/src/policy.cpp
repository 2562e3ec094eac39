#include "lcmopg/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "lcmopg/parallel.hpp"

namespace lcmopg {

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_num(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("checkpoint: bad number '" + s + "'");
  return v;
}

void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word)
    throw std::runtime_error("checkpoint: expected '" + word + "', got '" + tok + "'");
}

std::vector<int> trunk_widths(const PolicyConfig& c) {
  std::vector<int> w(static_cast<std::size_t>(c.depth), c.width);
  w.push_back(c.head_outputs());
  return w;
}

std::vector<Activation> trunk_activations(const PolicyConfig& c) {
  std::vector<Activation> a(static_cast<std::size_t>(c.depth) - 1, Activation::Selu);
  a.push_back(Activation::Identity);
  return a;
}

void validate(const PolicyConfig& c) {
  require(c.state_dim >= 1, "policy: state_dim must be >= 1");
  require(c.latent_dim >= 1, "policy: latent_dim must be >= 1");
  require(c.inflation >= 1, "policy: inflation K must be >= 1");
  require(c.width >= 1 && c.depth >= 1, "policy: bad width/depth");
  require(c.state_embedding.empty() ||
              static_cast<int>(c.state_embedding.size()) == c.state_dim,
          "policy: state_embedding needs one width per feature");
  if (c.head == HeadKind::Categorical) {
    require(c.num_actions >= 2, "policy: categorical head needs >= 2 actions");
  } else {
    require(c.action_lower.size() >= 1 && c.action_lower.size() == c.action_upper.size(),
            "policy: beta head needs a box");
    require((c.action_upper.array() > c.action_lower.array()).all(),
            "policy: empty action box");
    require(c.beta_offset >= 0.0, "policy: beta_offset must be nonnegative");
  }
}

int state_input_dim(const PolicyConfig& c) {
  return c.state_embedding.empty() ? c.state_dim : embedded_size(c.state_embedding);
}

}  // namespace

PolicyConfig policy_config_for(const EnvDescriptor& env, int latent_dim, int inflation,
                               int width, int depth, std::vector<int> state_embedding) {
  PolicyConfig c;
  c.state_dim = env.state_dim;
  bool any = false;
  for (int w : state_embedding) any = any || w > 0;
  c.state_embedding = any ? std::move(state_embedding) : std::vector<int>{};
  c.latent_dim = latent_dim;
  c.inflation = inflation;
  c.width = width;
  c.depth = depth;
  if (env.discrete) {
    c.head = HeadKind::Categorical;
    c.num_actions = env.num_actions;
  } else {
    c.head = HeadKind::Beta;
    c.num_actions = 0;
    c.action_lower = env.action_lower;
    c.action_upper = env.action_upper;
  }
  return c;
}

LatentConditionedPolicy::LatentConditionedPolicy(PolicyConfig config, Rng& rng,
                                                 double init_stddev)
    : config_(std::move(config)) {
  validate(config_);
  state_ = Mlp::random({state_input_dim(config_), config_.width}, {Activation::Selu}, rng,
                       init_stddev);
  latent_ = Mlp::random({config_.latent_dim * config_.inflation, config_.width},
                        {Activation::Tanh}, rng, init_stddev);
  trunk_ = Mlp::random(trunk_widths(config_), trunk_activations(config_), rng, init_stddev);
}

LatentConditionedPolicy::LatentConditionedPolicy(PolicyConfig config, Mlp state_tower,
                                                 Mlp latent_tower, Mlp trunk)
    : config_(std::move(config)),
      state_(std::move(state_tower)),
      latent_(std::move(latent_tower)),
      trunk_(std::move(trunk)) {
  validate(config_);
  require(state_.input_dim() == state_input_dim(config_), "policy: state tower input mismatch");
  require(latent_.input_dim() == config_.latent_dim * config_.inflation,
          "policy: latent tower input mismatch");
  require(state_.output_dim() == latent_.output_dim() &&
              trunk_.input_dim() == state_.output_dim(),
          "policy: tower widths must agree at the mixing point");
  require(trunk_.output_dim() == config_.head_outputs(), "policy: head width mismatch");
}

Eigen::Index LatentConditionedPolicy::num_parameters() const {
  return state_.num_parameters() + latent_.num_parameters() + trunk_.num_parameters();
}

Vector LatentConditionedPolicy::parameters() const {
  Vector p(num_parameters());
  p << state_.parameters(), latent_.parameters(), trunk_.parameters();
  return p;
}

void LatentConditionedPolicy::set_parameters(const Vector& flat) {
  require(flat.size() == num_parameters(), "policy: parameter count mismatch");
  const auto ns = state_.num_parameters(), nl = latent_.num_parameters();
  state_.parameters() = flat.head(ns);
  latent_.parameters() = flat.segment(ns, nl);
  trunk_.parameters() = flat.tail(trunk_.num_parameters());
}

bool LatentConditionedPolicy::parameters_finite() const {
  return state_.parameters().allFinite() && latent_.parameters().allFinite() &&
         trunk_.parameters().allFinite();
}

Matrix LatentConditionedPolicy::embed_states(const Matrix& features) const {
  require(features.rows() == config_.state_dim, "policy: feature dimension mismatch");
  if (config_.state_embedding.empty()) return features;
  Matrix out(state_input_dim(config_), features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    out.col(j) = embed_features(features.col(j), config_.state_embedding);
  return out;
}

Matrix LatentConditionedPolicy::embed_latents(const Matrix& latents) const {
  require(latents.rows() == config_.latent_dim, "policy: latent dimension mismatch");
  Matrix out(config_.latent_dim * config_.inflation, latents.cols());
  for (Eigen::Index j = 0; j < latents.cols(); ++j)
    out.col(j) = cosine_embed(latents.col(j), config_.inflation);
  return out;
}

Matrix LatentConditionedPolicy::head(const Matrix& state_in, const Matrix& latent_in) const {
  const Matrix s = state_.forward(state_in);
  const Matrix l = latent_.forward(latent_in);
  return trunk_.forward(s.cwiseProduct(l));
}

Vector LatentConditionedPolicy::head_one(const Vector& features, const Vector& latent) const {
  return head(embed_states(features), embed_latents(latent)).col(0);
}

void LatentConditionedPolicy::backward(const Matrix& state_in, const Matrix& latent_in,
                                       const Matrix& grad_head, Vector& grad) const {
  require(grad.size() == num_parameters(), "policy: gradient size mismatch");
  Mlp::Tape ts, tl, tt;
  const Matrix s = state_.forward(state_in, ts);
  const Matrix l = latent_.forward(latent_in, tl);
  trunk_.forward(s.cwiseProduct(l), tt);
  const auto ns = state_.num_parameters(), nl = latent_.num_parameters();
  Vector gs = Vector::Zero(ns), gl = Vector::Zero(nl), gt = Vector::Zero(trunk_.num_parameters());
  const Matrix d_mix = trunk_.backward(tt, grad_head, gt);
  state_.backward(ts, d_mix.cwiseProduct(l), gs);
  latent_.backward(tl, d_mix.cwiseProduct(s), gl);
  grad.head(ns) += gs;
  grad.segment(ns, nl) += gl;
  grad.tail(gt.size()) += gt;
}

Vector LatentConditionedPolicy::to_env_action(const Vector& unit) const {
  return config_.action_lower.array() +
         unit.array() * (config_.action_upper - config_.action_lower).array();
}

PolicyAction LatentConditionedPolicy::act_from_head(const Vector& raw, Rng& rng) const {
  if (!raw.allFinite()) {
    std::ostringstream msg;
    msg << "policy: non-finite head output [" << raw.transpose() << "]";
    throw DivergenceError(msg.str());
  }
  PolicyAction out;
  if (config_.head == HeadKind::Categorical) {
    const int a = categorical_sample(raw, rng);
    out.env_action = Action::discrete(a);
    out.log_prob = categorical_log_prob(raw, a);
  } else {
    const BetaParams p = beta_from_raw(raw, config_.beta_offset);
    const Vector u = beta_sample(p, rng);
    if (!u.allFinite()) throw DivergenceError("policy: non-finite Beta sample");
    out.unit_action = u.cwiseMax(kBetaBoundaryClamp).cwiseMin(1.0 - kBetaBoundaryClamp);
    out.env_action = Action::box(to_env_action(out.unit_action));
    out.log_prob = beta_log_prob(p, out.unit_action);
  }
  return out;
}

Action LatentConditionedPolicy::act_deterministic_from_head(const Vector& raw) const {
  if (config_.head == HeadKind::Categorical) return Action::discrete(categorical_argmax(raw));
  return Action::box(to_env_action(beta_mean(beta_from_raw(raw, config_.beta_offset))));
}

double LatentConditionedPolicy::log_prob_from_head(const Vector& raw, int action,
                                                   const Vector& unit_action) const {
  if (config_.head == HeadKind::Categorical) return categorical_log_prob(raw, action);
  return beta_log_prob(beta_from_raw(raw, config_.beta_offset), unit_action);
}

Vector LatentConditionedPolicy::log_prob_grad_from_head(const Vector& raw, int action,
                                                        const Vector& unit_action) const {
  if (config_.head == HeadKind::Categorical) {
    Vector g = -softmax(raw);
    g[action] += 1.0;
    return g;
  }
  const int d = config_.action_dim();
  Vector d_alpha, d_beta;
  beta_log_prob_grad(beta_from_raw(raw, config_.beta_offset), unit_action, d_alpha, d_beta);
  Vector g(2 * d);
  for (int j = 0; j < d; ++j) {
    g[j] = d_alpha[j] * sigmoid(raw[j]);
    g[d + j] = d_beta[j] * sigmoid(raw[d + j]);
  }
  return g;
}

PolicyAction LatentConditionedPolicy::act_stochastic(const Vector& features, const Vector& latent,
                                                     Rng& rng) const {
  return act_from_head(head_one(features, latent), rng);
}

Action LatentConditionedPolicy::act_deterministic(const Vector& features,
                                                  const Vector& latent) const {
  return act_deterministic_from_head(head_one(features, latent));
}

bool LatentConditionedPolicy::operator==(const LatentConditionedPolicy& o) const {
  const auto& a = config_;
  const auto& b = o.config_;
  return a.state_dim == b.state_dim && a.state_embedding == b.state_embedding &&
         a.latent_dim == b.latent_dim && a.inflation == b.inflation && a.width == b.width &&
         a.depth == b.depth && a.head == b.head && a.num_actions == b.num_actions &&
         a.action_lower == b.action_lower && a.action_upper == b.action_upper &&
         a.beta_offset == b.beta_offset && state_ == o.state_ && latent_ == o.latent_ &&
         trunk_ == o.trunk_;
}

void write_policy(std::ostream& os, const LatentConditionedPolicy& policy) {
  const auto& c = policy.config();
  os << "policy 1\n";
  os << "head " << (c.head == HeadKind::Beta ? "beta" : "categorical") << '\n';
  os << "state_dim " << c.state_dim << '\n';
  os << "state_embedding " << c.state_embedding.size();
  for (int w : c.state_embedding) os << ' ' << w;
  os << "\nlatent_dim " << c.latent_dim << "\ninflation " << c.inflation << "\nwidth "
     << c.width << "\ndepth " << c.depth << "\nnum_actions " << c.num_actions << '\n';
  os << "action_lower " << c.action_lower.size();
  for (double v : c.action_lower) os << ' ' << num(v);
  os << "\naction_upper " << c.action_upper.size();
  for (double v : c.action_upper) os << ' ' << num(v);
  os << "\nbeta_offset " << num(c.beta_offset) << '\n';
  write_mlp(os, policy.state_tower());
  write_mlp(os, policy.latent_tower());
  write_mlp(os, policy.trunk());
}

LatentConditionedPolicy read_policy(std::istream& is) {
  expect(is, "policy");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("checkpoint: unsupported policy version");
  PolicyConfig c;
  std::string tok;
  expect(is, "head");
  is >> tok;
  if (tok == "beta") c.head = HeadKind::Beta;
  else if (tok == "categorical") c.head = HeadKind::Categorical;
  else throw std::runtime_error("checkpoint: unknown head " + tok);
  expect(is, "state_dim");
  is >> c.state_dim;
  expect(is, "state_embedding");
  std::size_t n = 0;
  is >> n;
  c.state_embedding.resize(n);
  for (auto& w : c.state_embedding) is >> w;
  expect(is, "latent_dim");
  is >> c.latent_dim;
  expect(is, "inflation");
  is >> c.inflation;
  expect(is, "width");
  is >> c.width;
  expect(is, "depth");
  is >> c.depth;
  expect(is, "num_actions");
  is >> c.num_actions;
  auto read_vec = [&](const char* key, Vector& v) {
    expect(is, key);
    Eigen::Index m = 0;
    is >> m;
    v.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      is >> tok;
      v[i] = parse_num(tok);
    }
  };
  read_vec("action_lower", c.action_lower);
  read_vec("action_upper", c.action_upper);
  expect(is, "beta_offset");
  is >> tok;
  c.beta_offset = parse_num(tok);
  if (!is) throw std::runtime_error("checkpoint: truncated policy header");
  Mlp s = read_mlp(is);
  Mlp l = read_mlp(is);
  Mlp t = read_mlp(is);
  return LatentConditionedPolicy(std::move(c), std::move(s), std::move(l), std::move(t));
}

Vector sample_latent(int latent_dim, Rng& rng) {
  require(latent_dim >= 1, "sample_latent: latent_dim must be >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector c(latent_dim);
  for (int j = 0; j < latent_dim; ++j) c[j] = u(rng);
  return c;
}

namespace {

void record(Trajectory& traj, Transition&& tr, double discount, bool keep) {
  if (traj.return_.size() == 0) traj.return_ = ReturnVector::Zero(tr.reward.size());
  traj.return_ += discount * tr.reward;
  ++traj.length;
  if (keep) traj.transitions.push_back(std::move(tr));
}

}  // namespace

Trajectory rollout(const LatentConditionedPolicy& policy, Environment& env, const Vector& latent,
                   double gamma, int max_steps, Rng& rng, RolloutMode mode) {
  require(gamma > 0.0 && gamma <= 1.0, "rollout: gamma must lie in (0, 1]");
  Trajectory traj;
  traj.latent = latent;
  traj.return_ = ReturnVector::Zero(env.descriptor().num_objectives);
  if (max_steps <= 0) return traj;
  const Matrix lat = policy.embed_latents(latent);
  Vector state = env.reset(rng);
  double discount = 1.0;
  for (int t = 0; t < max_steps; ++t) {
    Transition tr;
    tr.state = state;
    tr.features = env.features(state);
    const Vector raw = policy.head(policy.embed_states(tr.features), lat).col(0);
    Action a;
    if (mode == RolloutMode::Stochastic) {
      PolicyAction pa = policy.act_from_head(raw, rng);
      a = pa.env_action;
      tr.unit_action = std::move(pa.unit_action);
    } else {
      a = policy.act_deterministic_from_head(raw);
    }
    tr.action = a.index;
    StepResult res = env.step(a, rng);
    tr.reward = res.reward;
    record(traj, std::move(tr), discount, true);
    discount *= gamma;
    state = std::move(res.state);
    if (res.done) break;
  }
  return traj;
}

std::vector<Trajectory> rollout_batch(const LatentConditionedPolicy& policy,
                                      const EnvFactory& factory,
                                      std::span<const Vector> latents, double gamma,
                                      int max_steps, RolloutMode mode, std::uint64_t seed,
                                      std::uint64_t stream, std::size_t threads,
                                      bool keep_transitions) {
  require(gamma > 0.0 && gamma <= 1.0, "rollout_batch: gamma must lie in (0, 1]");
  const std::size_t n = latents.size();
  std::vector<Trajectory> out(n);
  const std::size_t blocks = (n + kRolloutBlock - 1) / kRolloutBlock;
  parallel_for(blocks, threads, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t first = b * kRolloutBlock;
      const std::size_t count = std::min(kRolloutBlock, n - first);
      std::vector<std::unique_ptr<Environment>> envs;
      std::vector<Rng> rngs;
      std::vector<Vector> states(count);
      Matrix lat_raw(policy.config().latent_dim, static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        envs.push_back(factory());
        rngs.push_back(derive_stream(seed, stream, first + i));
        Trajectory& tr = out[first + i];
        tr.latent = latents[first + i];
        tr.return_ = ReturnVector::Zero(envs.back()->descriptor().num_objectives);
        lat_raw.col(static_cast<Eigen::Index>(i)) = latents[first + i];
      }
      const Matrix lat = policy.embed_latents(lat_raw);
      std::vector<std::size_t> active;
      if (max_steps > 0) {
        for (std::size_t i = 0; i < count; ++i) {
          states[i] = envs[i]->reset(rngs[i]);
          active.push_back(i);
        }
      }
      double discount = 1.0;
      for (int t = 0; t < max_steps && !active.empty(); ++t) {
        const auto m = static_cast<Eigen::Index>(active.size());
        Matrix feats(policy.config().state_dim, m), lat_cols(lat.rows(), m);
        for (Eigen::Index k = 0; k < m; ++k) {
          const std::size_t i = active[k];
          feats.col(k) = envs[i]->features(states[i]);
          lat_cols.col(k) = lat.col(static_cast<Eigen::Index>(i));
        }
        const Matrix raw = policy.head(policy.embed_states(feats), lat_cols);
        std::vector<std::size_t> still;
        for (Eigen::Index k = 0; k < m; ++k) {
          const std::size_t i = active[k];
          Transition tr;
          if (keep_transitions) {
            tr.state = states[i];
            tr.features = feats.col(k);
          }
          Action a;
          if (mode == RolloutMode::Stochastic) {
            PolicyAction pa = policy.act_from_head(raw.col(k), rngs[i]);
            a = pa.env_action;
            tr.unit_action = std::move(pa.unit_action);
          } else {
            a = policy.act_deterministic_from_head(raw.col(k));
          }
          tr.action = a.index;
          StepResult res = envs[i]->step(a, rngs[i]);
          tr.reward = std::move(res.reward);
          record(out[first + i], std::move(tr), discount, keep_transitions);
          states[i] = std::move(res.state);
          if (!res.done) still.push_back(i);
        }
        active = std::move(still);
        discount *= gamma;
      }
    }
  });
  return out;
}

namespace {

// Columns per forward/backward chunk in the loss; fixed for reproducibility.
constexpr Eigen::Index kLossChunk = 4096;

struct Item {
  const Trajectory* traj;
  const Transition* tr;
  double weight;
};

}  // namespace

LossAndGrad policy_loss_and_grad(const LatentConditionedPolicy& policy,
                                 std::span<const WeightedTrajectory> batch) {
  LossAndGrad out;
  out.grad = Vector::Zero(policy.num_parameters());
  std::vector<Item> items;
  for (const auto& wt : batch) {
    require(wt.trajectory != nullptr, "policy_loss_and_grad: null trajectory");
    const auto& trs = wt.trajectory->transitions;
    require(wt.per_transition.empty() || wt.per_transition.size() == trs.size(),
            "policy_loss_and_grad: per-transition weight count mismatch");
    for (std::size_t t = 0; t < trs.size(); ++t) {
      const double w = wt.per_transition.empty() ? wt.weight : wt.per_transition[t];
      if (!std::isfinite(w)) throw DivergenceError("policy_loss_and_grad: non-finite weight");
      if (w != 0.0) items.push_back({wt.trajectory, &trs[t], w});
    }
  }
  out.transitions = items.size();
  const PolicyConfig& cfg = policy.config();
  for (std::size_t begin = 0; begin < items.size(); begin += kLossChunk) {
    const auto m = static_cast<Eigen::Index>(std::min<std::size_t>(kLossChunk, items.size() - begin));
    Matrix feats(cfg.state_dim, m), lats(cfg.latent_dim, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      feats.col(k) = items[begin + k].tr->features;
      lats.col(k) = items[begin + k].traj->latent;
    }
    const Matrix s_in = policy.embed_states(feats);
    const Matrix l_in = policy.embed_latents(lats);
    const Matrix raw = policy.head(s_in, l_in);
    Matrix g(raw.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Item& it = items[begin + k];
      const Vector r = raw.col(k);
      out.loss -= it.weight * policy.log_prob_from_head(r, it.tr->action, it.tr->unit_action);
      g.col(k) = -it.weight * policy.log_prob_grad_from_head(r, it.tr->action, it.tr->unit_action);
    }
    policy.backward(s_in, l_in, g, out.grad);
  }
  if (!std::isfinite(out.loss)) throw DivergenceError("policy_loss_and_grad: non-finite loss");
  return out;
}

double trajectory_log_prob(const LatentConditionedPolicy& policy, const Trajectory& traj) {
  double total = 0.0;
  for (const auto& tr : traj.transitions)
    total += policy.log_prob_from_head(policy.head_one(tr.features, traj.latent), tr.action,
                                       tr.unit_action);
  return total;
}

PolicyOptimizer::PolicyOptimizer(const LatentConditionedPolicy& policy, AdamConfig config)
    : state_(policy.state_tower().num_parameters(), config),
      latent_(policy.latent_tower().num_parameters(), config),
      trunk_(policy.trunk().num_parameters(), config) {}

void PolicyOptimizer::step(LatentConditionedPolicy& policy, const Vector& grad) {
  require(grad.size() == policy.num_parameters(), "PolicyOptimizer: gradient size mismatch");
  if (!grad.allFinite()) throw DivergenceError("PolicyOptimizer: non-finite gradient rejected");
  const auto ns = policy.state_tower().num_parameters();
  const auto nl = policy.latent_tower().num_parameters();
  state_.step(policy.state_tower().parameters(), grad.head(ns));
  latent_.step(policy.latent_tower().parameters(), grad.segment(ns, nl));
  trunk_.step(policy.trunk().parameters(), grad.tail(policy.trunk().num_parameters()));
}

}  // namespace lcmopg

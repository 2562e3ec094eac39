#include "lcmopg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

namespace lcmopg {

std::string to_string(Variant v) { return v == Variant::PG ? "pg" : "pg-v"; }

Variant parse_variant(const std::string& name) {
  if (name == "pg" || name == "lcmopg") return Variant::PG;
  if (name == "pg-v" || name == "pgv" || name == "lcmopg-v") return Variant::PGV;
  throw ContractViolation("unknown variant: " + name);
}

std::string to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::Completed: return "completed";
    case TrainStatus::Diverged: return "diverged";
    case TrainStatus::Collapsed: return "collapsed";
  }
  return "completed";
}

void validate(const TrainConfig& c, const EnvDescriptor& env) {
  require(c.latent_dim >= 1, "train: latent_dim must be >= 1");
  require(c.n_lat_train >= 2, "train: n_lat_train must be >= 2");
  require(c.k_nn >= 1 && c.k_nn < c.n_lat_train, "train: k must lie in [1, n_lat_train - 1]");
  require(c.n_lat_test >= 1, "train: n_lat_test must be >= 1");
  require(c.inflation >= 1, "train: inflation K must be >= 1");
  require(c.width >= 1 && c.depth >= 1, "train: bad policy width/depth");
  require(c.beta >= 0.0, "train: beta must be >= 0");
  require(c.gamma > 0.0 && c.gamma <= 1.0, "train: gamma must lie in (0, 1]");
  require(c.iterations >= 0, "train: iterations must be >= 0");
  require(c.max_len_train >= 1 && c.max_len_test >= 1, "train: max episode lengths must be >= 1");
  require(c.test_episodes_per_latent >= 1, "train: test_episodes_per_latent must be >= 1");
  require(c.learning_rate > 0.0, "train: learning_rate must be > 0");
  require(c.qv_epochs >= 0 && c.qv_batch >= 1 && c.qv_width >= 1 && c.qv_depth >= 0,
          "train: bad Q/V settings");
  require(c.reference.size() == env.num_objectives,
          "train: reference point must have one entry per objective");
  require(c.hv_scale > 0.0, "train: hv_scale must be > 0");
  require(c.state_embedding.empty() ||
              static_cast<int>(c.state_embedding.size()) == env.state_dim,
          "train: state_embedding needs one width per feature");
  require(c.collapse_fraction >= 0.0 && c.collapse_fraction < 1.0,
          "train: collapse_fraction must lie in [0, 1)");
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
  os << "# lcmopg-metrics 1\n";
  os << "iteration,test_hv,best_hv,mean_length,max_length,loss,mean_abs_score,value_loss,seconds\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.iteration << ',' << r.test_hv << ',' << r.best_hv << ',' << r.mean_length << ','
       << r.max_length << ',' << r.loss << ',' << r.mean_abs_score << ',' << r.value_loss << ','
       << r.seconds << '\n';
}

// ---- Buffer and value networks ------------------------------------------------

void RolloutBuffer::add(const Trajectory& traj, int iteration, int trajectory, double score,
                        const std::function<Vector(const Transition&)>& action_encoding) {
  for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
    const Transition& tr = traj.transitions[t];
    BufferEntry e;
    e.iteration = iteration;
    e.trajectory = trajectory;
    e.step = static_cast<int>(t);
    e.v_input = tr.features;
    const Vector a = action_encoding(tr);
    e.q_input.resize(tr.features.size() + a.size());
    e.q_input << tr.features, a;
    e.score = score;
    entries_.push_back(std::move(e));
  }
}

std::vector<std::vector<std::size_t>> RolloutBuffer::minibatches(std::size_t batch_size,
                                                                 Rng& rng) const {
  require(batch_size >= 1, "RolloutBuffer: batch_size must be >= 1");
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with an explicit uniform draw keeps the order portable.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size)
    out.emplace_back(order.begin() + b, order.begin() + std::min(order.size(), b + batch_size));
  return out;
}

namespace {

Mlp value_net(int in, int width, int depth, Rng& rng, double stddev) {
  std::vector<int> widths{in};
  std::vector<Activation> acts;
  for (int l = 0; l < depth; ++l) {
    widths.push_back(width);
    acts.push_back(Activation::Selu);
  }
  widths.push_back(1);
  acts.push_back(Activation::Identity);
  return Mlp::random(widths, acts, rng, stddev);
}

int action_encoding_size(const PolicyConfig& p) {
  return p.head == HeadKind::Categorical ? p.num_actions : p.action_dim();
}

// One regression step on 0.5 * sum (net(x) - y)^2 scaled by 2, i.e. the plain
// sum of squares; returns the sum of squared errors.
double regress(Mlp& net, Adam& opt, const Matrix& x, const Matrix& y) {
  Mlp::Tape tape;
  const Matrix out = net.forward(x, tape);
  const Matrix diff = out - y;
  Vector grad = Vector::Zero(net.num_parameters());
  net.backward(tape, 2.0 * diff, grad);
  opt.step(net.parameters(), grad);
  return diff.squaredNorm();
}

}  // namespace

GeneralizedValueNets::GeneralizedValueNets(const PolicyConfig& policy, int width, int depth,
                                           Rng& rng, double learning_rate, double init_stddev)
    : policy_(policy) {
  q_ = value_net(policy.state_dim + action_encoding_size(policy), width, depth, rng, init_stddev);
  v_ = value_net(policy.state_dim, width, depth, rng, init_stddev);
  AdamConfig ac;
  ac.learning_rate = learning_rate;
  q_opt_ = Adam(q_.num_parameters(), ac);
  v_opt_ = Adam(v_.num_parameters(), ac);
}

Vector GeneralizedValueNets::encode_action(const Transition& tr) const {
  if (policy_.head == HeadKind::Categorical) {
    Vector e = Vector::Zero(policy_.num_actions);
    e[tr.action] = 1.0;
    return e;
  }
  return policy_.action_lower.array() +
         tr.unit_action.array() * (policy_.action_upper - policy_.action_lower).array();
}

Vector GeneralizedValueNets::q_input(const Transition& tr) const {
  const Vector a = encode_action(tr);
  Vector x(tr.features.size() + a.size());
  x << tr.features, a;
  return x;
}

std::pair<double, double> GeneralizedValueNets::fit(const RolloutBuffer& buffer, int epochs,
                                                    std::size_t batch_size, Rng& rng) {
  const auto& entries = buffer.entries();
  double q_sse = 0.0, v_sse = 0.0;
  for (int e = 0; e < epochs; ++e) {
    q_sse = v_sse = 0.0;
    for (const auto& mb : buffer.minibatches(batch_size, rng)) {
      const auto n = static_cast<Eigen::Index>(mb.size());
      Matrix xq(q_.input_dim(), n), xv(v_.input_dim(), n), y(1, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const BufferEntry& be = entries[mb[k]];
        xq.col(k) = be.q_input;
        xv.col(k) = be.v_input;
        y(0, k) = be.score;
      }
      q_sse += regress(q_, q_opt_, xq, y);
      v_sse += regress(v_, v_opt_, xv, y);
    }
  }
  const double n = std::max<double>(1.0, static_cast<double>(entries.size()));
  return {q_sse / n, v_sse / n};
}

std::vector<double> GeneralizedValueNets::corrected_scores(const Trajectory& traj) const {
  const auto n = static_cast<Eigen::Index>(traj.transitions.size());
  if (n == 0) return {};
  Matrix xq(q_.input_dim(), n), xv(v_.input_dim(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    xq.col(k) = q_input(traj.transitions[k]);
    xv.col(k) = traj.transitions[k].features;
  }
  const Matrix q = q_.forward(xq), v = v_.forward(xv);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) out[k] = q(0, k) - v(0, k);
  return out;
}

// ---- Evaluation -----------------------------------------------------------------

EvalResult evaluate(const LatentConditionedPolicy& policy, const EnvFactory& factory,
                    const EvalConfig& config) {
  require(config.n_latents >= 1, "evaluate: n_latents must be >= 1");
  require(config.episodes_per_latent >= 1, "evaluate: episodes_per_latent must be >= 1");
  require(config.hv_scale > 0.0, "evaluate: hv_scale must be > 0");
  Rng latent_rng = derive_stream(config.seed, config.stream, 0, 1);
  EvalResult res;
  for (int j = 0; j < config.n_latents; ++j)
    res.latents.push_back(sample_latent(policy.config().latent_dim, latent_rng));
  const int eps = config.episodes_per_latent;
  std::vector<Vector> expanded;
  expanded.reserve(static_cast<std::size_t>(config.n_latents) * eps);
  for (const auto& c : res.latents)
    for (int e = 0; e < eps; ++e) expanded.push_back(c);
  const auto trajs = rollout_batch(policy, factory, expanded, config.gamma, config.max_steps,
                                   RolloutMode::Deterministic, config.seed, config.stream,
                                   config.threads, false);
  std::vector<ArchiveEntry> entries;
  for (int j = 0; j < config.n_latents; ++j) {
    ReturnVector mean = trajs[static_cast<std::size_t>(j) * eps].return_;
    for (int e = 1; e < eps; ++e) mean += trajs[static_cast<std::size_t>(j) * eps + e].return_;
    mean /= eps;
    res.returns.push_back(mean);
    entries.push_back({mean, res.latents[j], j});
  }
  res.front = ParetoArchive::from_entries(std::move(entries));
  require(config.reference.size() == res.returns.front().size(),
          "evaluate: reference point dimension mismatch");
  const auto pts = res.front.points();
  res.hv = hypervolume_clipped(pts, config.reference) / config.hv_scale;
  return res;
}

void write_pf_csv(std::ostream& os, const EvalResult& result) {
  if (result.front.empty()) return;
  const auto m = result.front.entries().front().point.size();
  const auto d = result.front.entries().front().latent.size();
  for (Eigen::Index i = 0; i < m; ++i) os << (i ? "," : "") << "return_" << i;
  for (Eigen::Index j = 0; j < d; ++j) os << ",latent_" << j;
  os << '\n';
  os.precision(17);
  for (const auto& e : result.front.entries()) {
    for (Eigen::Index i = 0; i < m; ++i) os << (i ? "," : "") << e.point[i];
    for (Eigen::Index j = 0; j < d; ++j) os << ',' << e.latent[j];
    os << '\n';
  }
}

// ---- Training loops ----------------------------------------------------------------

namespace {

enum StreamKind : std::uint64_t { kInit = 1, kLatents, kTrain, kTest, kShuffle };

std::uint64_t stream_id(StreamKind kind, std::uint64_t iteration) {
  return (static_cast<std::uint64_t>(kind) << 40) | iteration;
}

class Trainer {
 public:
  Trainer(const TrainConfig& config, const EnvFactory& factory, const IterationCallback& cb)
      : cfg_(config), factory_(factory), callback_(cb) {
    const auto env = factory_();
    desc_ = env->descriptor();
    validate(cfg_, desc_);
    PolicyConfig pc = policy_config_for(desc_, cfg_.latent_dim, cfg_.inflation, cfg_.width,
                                        cfg_.depth, cfg_.state_embedding);
    pc.beta_offset = cfg_.beta_offset;
    Rng init = derive_stream(cfg_.seed, stream_id(kInit, 0));
    policy_ = LatentConditionedPolicy(pc, init, cfg_.init_stddev);
    AdamConfig ac;
    ac.learning_rate = cfg_.learning_rate;
    opt_ = PolicyOptimizer(policy_, ac);
    if (cfg_.variant == Variant::PGV) {
      Rng vinit = derive_stream(cfg_.seed, stream_id(kInit, 1));
      values_ = GeneralizedValueNets(pc, cfg_.qv_width, cfg_.qv_depth, vinit, cfg_.learning_rate,
                                     cfg_.init_stddev);
    }
    scoring_.normalization = cfg_.normalization;
    scoring_.centering = cfg_.centering;
    scoring_.k = cfg_.k_nn;
    scoring_.beta = cfg_.beta;
    scoring_.clip = cfg_.variant == Variant::PG && cfg_.clip;
  }

  TrainResult run() {
    start_ = std::chrono::steady_clock::now();
    TrainResult res;
    HistoryRow row0;
    row0.test_hv = test_hv(0);
    row0.best_hv = row0.test_hv;
    row0.seconds = elapsed();
    res.best_policy = policy_;
    res.best_hv = row0.test_hv;
    res.history.push_back(row0);
    bool go = !callback_ || callback_(row0);
    for (int t = 1; go && t <= cfg_.iterations; ++t) {
      const LatentConditionedPolicy snapshot = policy_;
      HistoryRow row;
      row.iteration = t;
      try {
        iterate(t, row);
        if (!policy_.parameters_finite())
          throw DivergenceError("non-finite policy parameters after update");
        row.test_hv = test_hv(t);
        if (!std::isfinite(row.test_hv)) throw DivergenceError("non-finite test HV");
      } catch (const DivergenceError& e) {
        policy_ = snapshot;
        res.status = TrainStatus::Diverged;
        res.message = "iteration " + std::to_string(t) + ": " + e.what();
        break;
      }
      if (row.test_hv > res.best_hv) {
        res.best_hv = row.test_hv;
        res.best_iteration = t;
        res.best_policy = policy_;
      }
      row.best_hv = res.best_hv;
      row.seconds = elapsed();
      res.history.push_back(row);
      if (cfg_.collapse_fraction > 0.0 && res.best_hv > 0.0 &&
          row.test_hv < cfg_.collapse_fraction * res.best_hv) {
        res.status = TrainStatus::Collapsed;
        res.message = "iteration " + std::to_string(t) + ": test HV " +
                      std::to_string(row.test_hv) + " fell below " +
                      std::to_string(cfg_.collapse_fraction) + " x best " +
                      std::to_string(res.best_hv);
        break;
      }
      go = !callback_ || callback_(row);
    }
    res.final_policy = policy_;
    return res;
  }

 private:
  void iterate(int t, HistoryRow& row) {
    Rng lat_rng = derive_stream(cfg_.seed, stream_id(kLatents, t));
    std::vector<Vector> latents;
    for (int i = 0; i < cfg_.n_lat_train; ++i)
      latents.push_back(sample_latent(cfg_.latent_dim, lat_rng));
    const auto trajs = rollout_batch(policy_, factory_, latents, cfg_.gamma, cfg_.max_len_train,
                                     RolloutMode::Stochastic, cfg_.seed, stream_id(kTrain, t),
                                     cfg_.threads);
    std::vector<ReturnVector> returns;
    double total_len = 0.0;
    for (const auto& tr : trajs) {
      returns.push_back(tr.return_);
      total_len += tr.length;
      row.max_length = std::max(row.max_length, tr.length);
      if (!tr.return_.allFinite()) throw DivergenceError("non-finite episode return");
    }
    row.mean_length = total_len / static_cast<double>(trajs.size());
    const ScoreBatch sb = score_batch(returns, scoring_);
    double abs_sum = 0.0;
    for (double f : sb.final) abs_sum += std::abs(f);
    row.mean_abs_score = abs_sum / static_cast<double>(sb.final.size());

    std::vector<WeightedTrajectory> batch(trajs.size());
    if (cfg_.variant == Variant::PG) {
      for (std::size_t i = 0; i < trajs.size(); ++i) batch[i] = {&trajs[i], sb.final[i], {}};
    } else {
      RolloutBuffer buffer;
      auto enc = [this](const Transition& tr) { return values_.encode_action(tr); };
      for (std::size_t i = 0; i < trajs.size(); ++i)
        buffer.add(trajs[i], t, static_cast<int>(i), sb.final[i], enc);
      Rng shuffle = derive_stream(cfg_.seed, stream_id(kShuffle, t));
      const auto [q_mse, v_mse] =
          values_.fit(buffer, cfg_.qv_epochs, static_cast<std::size_t>(cfg_.qv_batch), shuffle);
      row.value_loss = q_mse + v_mse;
      for (std::size_t i = 0; i < trajs.size(); ++i)
        batch[i] = {&trajs[i], 0.0, values_.corrected_scores(trajs[i])};
    }
    const LossAndGrad lg = policy_loss_and_grad(policy_, batch);
    row.loss = lg.loss;
    opt_.step(policy_, lg.grad);
  }

  double test_hv(int t) const {
    EvalConfig ec;
    ec.n_latents = cfg_.n_lat_train;
    ec.episodes_per_latent = cfg_.test_episodes_per_latent;
    ec.gamma = cfg_.gamma;
    ec.max_steps = cfg_.max_len_test;
    ec.reference = cfg_.reference;
    ec.hv_scale = cfg_.hv_scale;
    ec.seed = cfg_.seed;
    ec.stream = stream_id(kTest, static_cast<std::uint64_t>(t));
    ec.threads = cfg_.threads;
    return evaluate(policy_, factory_, ec).hv;
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  TrainConfig cfg_;
  EnvFactory factory_;
  IterationCallback callback_;
  EnvDescriptor desc_;
  LatentConditionedPolicy policy_;
  PolicyOptimizer opt_;
  GeneralizedValueNets values_;
  ScoringConfig scoring_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

TrainResult train_lcmopg(const TrainConfig& config, const EnvFactory& factory,
                         const IterationCallback& callback) {
  require(config.variant == Variant::PG, "train_lcmopg: variant must be pg");
  return Trainer(config, factory, callback).run();
}

TrainResult train_lcmopg_v(const TrainConfig& config, const EnvFactory& factory,
                           const IterationCallback& callback) {
  require(config.variant == Variant::PGV, "train_lcmopg_v: variant must be pg-v");
  return Trainer(config, factory, callback).run();
}

TrainResult train(const TrainConfig& config, const EnvFactory& factory,
                  const IterationCallback& callback) {
  return Trainer(config, factory, callback).run();
}

}  // namespace lcmopg

#include "lcmopg/neural.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

namespace lcmopg {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Selu: return "selu";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "selu") return Activation::Selu;
  throw ContractViolation("unknown activation: " + name);
}

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

namespace {

void activate(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Selu: z = z.unaryExpr([](double x) { return selu(x); }); break;
  }
}

// Derivative expressed through the activated output y.
void scale_by_derivative(Activation a, const Matrix& y, Matrix& g) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Tanh: g.array() *= 1.0 - y.array().square(); break;
    case Activation::Selu:
      g = g.binaryExpr(y, [](double gi, double yi) {
        return yi > 0.0 ? gi * kSeluLambda : gi * (yi + kSeluLambda * kSeluAlpha);
      });
      break;
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, std::vector<Activation> activations)
    : widths_(std::move(widths)), activations_(std::move(activations)) {
  require(widths_.size() >= 2, "Mlp: need at least input and output widths");
  require(activations_.size() + 1 == widths_.size(),
          "Mlp: one activation per layer required");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    require(widths_[l] > 0 && widths_[l + 1] > 0, "Mlp: widths must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
  params_ = Vector::Zero(total);
}

Mlp Mlp::random(std::vector<int> widths, std::vector<Activation> activations, Rng& rng,
                double stddev) {
  Mlp net(std::move(widths), std::move(activations));
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < net.params_.size(); ++i) net.params_[i] = normal(rng);
  return net;
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  const Eigen::Index off =
      offsets_[layer] + static_cast<Eigen::Index>(widths_[layer]) * widths_[layer + 1];
  return {params_.data() + off, widths_[layer + 1]};
}

Matrix Mlp::forward(const Matrix& x) const {
  require(x.rows() == input_dim(), "Mlp::forward: input has " + std::to_string(x.rows()) +
                                       " rows, expected " + std::to_string(input_dim()));
  Matrix h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    activate(activations_[l], z);
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  require(x.rows() == input_dim(), "Mlp::forward: input has " + std::to_string(x.rows()) +
                                       " rows, expected " + std::to_string(input_dim()));
  tape.inputs.resize(num_layers());
  tape.outputs.resize(num_layers());
  const Matrix* h = &x;
  for (int l = 0; l < num_layers(); ++l) {
    tape.inputs[l] = *h;
    Matrix z = weight(l) * *h;
    z.colwise() += bias(l);
    activate(activations_[l], z);
    tape.outputs[l] = std::move(z);
    h = &tape.outputs[l];
  }
  return tape.outputs.back();
}

Vector Mlp::forward_one(const Vector& x) const { return forward(Matrix(x)).col(0); }

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, Vector& grad) const {
  require(grad.size() == params_.size(), "Mlp::backward: gradient buffer size mismatch");
  require(static_cast<int>(tape.outputs.size()) == num_layers(), "Mlp::backward: bad tape");
  Matrix g = grad_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    scale_by_derivative(activations_[l], tape.outputs[l], g);
    const int in = widths_[l], out = widths_[l + 1];
    Eigen::Map<Matrix> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Vector> gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(in) * out, out);
    gw.noalias() += g * tape.inputs[l].transpose();
    gb += g.rowwise().sum();
    Matrix next = weight(l).transpose() * g;
    g = std::move(next);
  }
  return g;
}

bool Mlp::operator==(const Mlp& other) const {
  return widths_ == other.widths_ && activations_ == other.activations_ &&
         params_.size() == other.params_.size() && params_ == other.params_;
}

namespace {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("checkpoint: malformed number '" + s + "'");
  return x;
}

void expect_token(std::istream& is, const std::string& token) {
  std::string got;
  if (!(is >> got) || got != token)
    throw std::runtime_error("checkpoint: expected '" + token + "', got '" + got + "'");
}

}  // namespace

namespace {

// Flat-vector index of each serialized value: per layer, W row by row, then b.
std::vector<Eigen::Index> checkpoint_order(const std::vector<int>& widths) {
  std::vector<Eigen::Index> order;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index in = widths[l], out = widths[l + 1];
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) order.push_back(offset + c * out + r);
    offset += in * out;
    for (Eigen::Index r = 0; r < out; ++r) order.push_back(offset + r);
    offset += out;
  }
  return order;
}

}  // namespace

void write_mlp(std::ostream& os, const Mlp& net) {
  os << "mlp 1\n";
  os << "layers " << net.num_layers() << '\n';
  for (int l = 0; l < net.num_layers(); ++l)
    os << "layer " << net.widths()[l] << ' ' << net.widths()[l + 1] << ' '
       << to_string(net.activations()[l]) << '\n';
  os << "params " << net.num_parameters() << '\n';
  const auto& p = net.parameters();
  const auto order = checkpoint_order(net.widths());
  for (std::size_t i = 0; i < order.size(); ++i) {
    os << format_double(p[order[i]]);
    os << ((i + 1) % 8 == 0 || i + 1 == order.size() ? '\n' : ' ');
  }
}

Mlp read_mlp(std::istream& is) {
  expect_token(is, "mlp");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("checkpoint: unsupported mlp version");
  expect_token(is, "layers");
  int layers = 0;
  is >> layers;
  if (!is || layers <= 0) throw std::runtime_error("checkpoint: bad layer count");
  std::vector<int> widths;
  std::vector<Activation> acts;
  for (int l = 0; l < layers; ++l) {
    expect_token(is, "layer");
    int in = 0, out = 0;
    std::string act;
    is >> in >> out >> act;
    if (!is) throw std::runtime_error("checkpoint: truncated layer record");
    if (l == 0) widths.push_back(in);
    else if (widths.back() != in) throw std::runtime_error("checkpoint: inconsistent widths");
    widths.push_back(out);
    acts.push_back(parse_activation(act));
  }
  Mlp net(widths, acts);
  expect_token(is, "params");
  Eigen::Index count = 0;
  is >> count;
  if (count != net.num_parameters())
    throw std::runtime_error("checkpoint: parameter count does not match layer shapes");
  std::string tok;
  for (Eigen::Index idx : checkpoint_order(widths)) {
    if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated parameters");
    net.parameters()[idx] = parse_double(tok);
  }
  return net;
}

Adam::Adam(Eigen::Index size, AdamConfig config)
    : config_(config), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& params, const Vector& grads) {
  require(params.size() == m_.size() && grads.size() == m_.size(),
          "Adam::step: shape mismatch");
  if (!grads.allFinite()) throw DivergenceError("Adam::step: non-finite gradient rejected");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grads;
  v_ = b2 * v_ + (1.0 - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  params.array() -= config_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + config_.eps);
}

Vector cosine_embed(const Vector& c, int K) {
  require(K >= 1, "cosine_embed: K must be >= 1");
  Vector out(c.size() * K);
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    require(c[j] >= 0.0 && c[j] <= 1.0,
            "cosine_embed: coordinate " + std::to_string(j) + " outside [0,1]");
    for (int k = 0; k < K; ++k) out[j * K + k] = std::cos((k + 1) * std::numbers::pi * c[j]);
  }
  return out;
}

int embedded_size(std::span<const int> widths) {
  int total = 0;
  for (int w : widths) total += w > 0 ? w : 1;
  return total;
}

Vector embed_features(const Vector& x, std::span<const int> widths) {
  require(static_cast<std::size_t>(x.size()) == widths.size(),
          "embed_features: one width per coordinate required");
  Vector out(embedded_size(widths));
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const int w = widths[j];
    if (w <= 0) {
      out[pos++] = x[j];
    } else {
      out.segment(pos, w) = cosine_embed(Vector::Constant(1, x[j]), w);
      pos += w;
    }
  }
  return out;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BetaParams beta_from_raw(const Vector& raw, double offset) {
  require(raw.size() % 2 == 0, "beta_from_raw: raw output must have even length");
  const Eigen::Index d = raw.size() / 2;
  BetaParams h{Vector(d), Vector(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    h.alpha[j] = offset + softplus(raw[j]);
    h.beta[j] = offset + softplus(raw[d + j]);
    if (!(h.alpha[j] > 0.0 && h.beta[j] > 0.0 && std::isfinite(h.alpha[j]) &&
          std::isfinite(h.beta[j])))
      throw DivergenceError("beta_from_raw: shape parameter left (0, inf)");
  }
  return h;
}

namespace {
double clamp_unit(double a) {
  return std::clamp(a, kBetaBoundaryClamp, 1.0 - kBetaBoundaryClamp);
}
}  // namespace

double beta_log_prob(const BetaParams& head, const Vector& unit_action) {
  require(unit_action.size() == head.alpha.size(), "beta_log_prob: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < unit_action.size(); ++j) {
    const double a = clamp_unit(unit_action[j]);
    const double al = head.alpha[j], be = head.beta[j];
    total += (al - 1.0) * std::log(a) + (be - 1.0) * std::log1p(-a) -
             (std::lgamma(al) + std::lgamma(be) - std::lgamma(al + be));
  }
  return total;
}

void beta_log_prob_grad(const BetaParams& head, const Vector& unit_action, Vector& d_alpha,
                        Vector& d_beta) {
  const Eigen::Index d = unit_action.size();
  d_alpha.resize(d);
  d_beta.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double a = clamp_unit(unit_action[j]);
    const double al = head.alpha[j], be = head.beta[j];
    try {
      const double psi_sum = boost::math::digamma(al + be);
      d_alpha[j] = std::log(a) - boost::math::digamma(al) + psi_sum;
      d_beta[j] = std::log1p(-a) - boost::math::digamma(be) + psi_sum;
    } catch (const std::overflow_error&) {
      throw DivergenceError("beta_log_prob_grad: digamma overflow at shapes (" +
                            std::to_string(al) + ", " + std::to_string(be) + ")");
    }
  }
}

Vector beta_mean(const BetaParams& head) {
  return head.alpha.cwiseQuotient(head.alpha + head.beta);
}

namespace {

// log of a Gamma(shape, 1) draw. Small shapes use G(a) = G(a + 1) U^(1/a) so
// that the draw cannot underflow to zero.
double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return std::log(g) + std::log(u) / shape;
}

}  // namespace

Vector beta_sample(const BetaParams& head, Rng& rng) {
  Vector out(head.alpha.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    if (head.alpha[j] >= 1.0 && head.beta[j] >= 1.0) {
      std::gamma_distribution<double> ga(head.alpha[j], 1.0), gb(head.beta[j], 1.0);
      const double x = ga(rng), y = gb(rng);
      out[j] = x / (x + y);
    } else {
      const double lx = log_gamma_draw(head.alpha[j], rng);
      const double ly = log_gamma_draw(head.beta[j], rng);
      out[j] = 1.0 / (1.0 + std::exp(ly - lx));
    }
  }
  return out;
}

double log_sum_exp(const Vector& logits) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).exp().sum());
}

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

double categorical_log_prob(const Vector& logits, int action) {
  require(action >= 0 && action < logits.size(), "categorical_log_prob: invalid action");
  return logits[action] - log_sum_exp(logits);
}

int categorical_sample(const Vector& logits, Rng& rng) {
  const Vector p = softmax(logits);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

int categorical_argmax(const Vector& logits) {
  int best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace lcmopg

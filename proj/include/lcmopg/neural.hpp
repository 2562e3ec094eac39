#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lcmopg/common.hpp"
#include "lcmopg/rng.hpp"

namespace lcmopg {

enum class Activation { Identity, Tanh, Selu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

double selu(double x);

/// Standard deviation of the Gaussian used to initialize every parameter.
inline constexpr double kInitStddev = 0.2;

/// Fully connected network. Parameters live in one flat vector, layer by
/// layer: W (out x in, column-major) followed by b (out). Inputs and outputs
/// are batched as matrices with one sample per column.
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> inputs;   // input to each layer
    std::vector<Matrix> outputs;  // activated output of each layer
  };

  Mlp() = default;
  /// widths = {in, h1, ..., out}; one activation per layer.
  Mlp(std::vector<int> widths, std::vector<Activation> activations);

  /// Gaussian initialization, every weight and bias ~ N(0, stddev^2).
  static Mlp random(std::vector<int> widths, std::vector<Activation> activations,
                    Rng& rng, double stddev = kInitStddev);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int num_layers() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& widths() const { return widths_; }
  const std::vector<Activation>& activations() const { return activations_; }

  Eigen::Index num_parameters() const { return params_.size(); }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Tape& tape) const;
  Vector forward_one(const Vector& x) const;

  /// Reverse pass for a tape from forward(). Adds dL/dparams to `grad` (which
  /// must be sized num_parameters()) and returns dL/dinput.
  Matrix backward(const Tape& tape, const Matrix& grad_output, Vector& grad) const;

  bool operator==(const Mlp& other) const;

 private:
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<const Vector> bias(int layer) const;

  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

/// Text checkpoint; weights are serialized row by row, then biases.
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. The step counter advances once per accepted
/// update; a non-finite gradient is rejected with DivergenceError and leaves
/// both parameters and moments untouched.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamConfig config = {});

  void step(Vector& params, const Vector& grads);

  const AdamConfig& config() const { return config_; }
  long step_count() const { return steps_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Vector m_, v_;
  long steps_ = 0;
};

/// (cos(pi c_1), ..., cos(K pi c_1), ..., cos(K pi c_d)); each c_j in [0, 1].
Vector cosine_embed(const Vector& c, int K);

/// Per-coordinate embedding widths; width 0 passes the coordinate through.
/// Output length is sum(max(width, 1)).
Vector embed_features(const Vector& x, std::span<const int> widths);
int embedded_size(std::span<const int> widths);

// ---- Beta head -----------------------------------------------------------

/// Boundary clamp applied to unit-interval actions before evaluating densities.
inline constexpr double kBetaBoundaryClamp = 1e-6;

struct BetaParams {
  Vector alpha;
  Vector beta;
};

double softplus(double x);
double sigmoid(double x);

/// alpha = offset + softplus(raw[0:d]), beta = offset + softplus(raw[d:2d]).
BetaParams beta_from_raw(const Vector& raw, double offset);

/// Sum over dimensions of ln Beta(a_j; alpha_j, beta_j).
double beta_log_prob(const BetaParams& head, const Vector& unit_action);

/// d ln p / d alpha and d ln p / d beta per dimension.
void beta_log_prob_grad(const BetaParams& head, const Vector& unit_action,
                        Vector& d_alpha, Vector& d_beta);

Vector beta_mean(const BetaParams& head);
Vector beta_sample(const BetaParams& head, Rng& rng);

// ---- Categorical head ----------------------------------------------------

Vector softmax(const Vector& logits);
double log_sum_exp(const Vector& logits);
double categorical_log_prob(const Vector& logits, int action);
int categorical_sample(const Vector& logits, Rng& rng);
/// Highest logit; lowest index wins ties.
int categorical_argmax(const Vector& logits);

}  // namespace lcmopg

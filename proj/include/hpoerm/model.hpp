#pragma once

// Function classes, the bounded loss, and risk evaluation.
//
// A Model is a fully connected ReLU network with `depth` hidden layers of
// `width` units and a scalar output; depth 0 is a linear model. Parameters
// are stored flat, layer by layer, as W (out x in, row-major) followed by b.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpoerm/synth_data.hpp"
#include "json.hpp"

namespace hpoerm {

struct HyperParams {
  int depth = 1;  // hidden layers; 0 = linear model
  int width = 10;
  double learning_rate = 0.1;
  int batch_size = 32;

  // Width is meaningless for linear models and normalized to 0.
  HyperParams canonical() const;
  void validate() const;
  std::string label() const;
  // Stable 64-bit identity of the canonical configuration.
  std::uint64_t fingerprint() const;

  friend bool operator==(const HyperParams& a, const HyperParams& b);
};

struct HpGrid {
  std::vector<HyperParams> configs;

  std::size_t size() const noexcept { return configs.size(); }
  // Throws ConfigError when empty or when two entries are canonically equal.
  void validate() const;

  // depth {1,2,3} x width {10,100} x learning rate {0.01,0.1} x batch {8,32,128}.
  static HpGrid grid36();
  // The width-10 half of grid36.
  static HpGrid grid18();
  static HpGrid by_name(const std::string& name);
};

enum class LossKind { clipped_logistic, zero_one };

// clipped_logistic: l(y, s) = min(B, log(1 + exp(-y s))), 1-Lipschitz in s.
// zero_one: l(y, s) = B if y s <= 0 else 0 (ties count as errors).
struct LossSpec {
  LossKind kind = LossKind::clipped_logistic;
  double bound = 1.0;
  double lipschitz = 1.0;

  static LossSpec clipped_logistic(double bound = 1.0) { return {LossKind::clipped_logistic, bound, 1.0}; }
  static LossSpec zero_one(double bound = 1.0) { return {LossKind::zero_one, bound, 1.0}; }

  void validate() const;
  double value(double y, double score) const;
  // d l / d score; zero in the clipped region and for zero_one.
  double slope(double y, double score) const;
};

class Model;

// Scratch buffers for batched forward/backward passes.
struct Workspace {
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // activations per layer (post[0] unused)
  Matrix delta;
  Matrix delta_prev;
};

class Model {
 public:
  Model() = default;
  Model(HyperParams architecture, int n_features, std::vector<double> parameters);

  static std::size_t parameter_count(const HyperParams& architecture, int n_features);

  const HyperParams& architecture() const noexcept { return architecture_; }
  int n_features() const noexcept { return n_features_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  Vector scores(const Eigen::Ref<const Matrix>& features) const;
  double score(const Eigen::Ref<const Vector>& x) const;

  // Mean loss over the rows; writes the gradient of that mean into `grad`.
  double loss_and_gradient(const Eigen::Ref<const Matrix>& features, const Eigen::Ref<const Vector>& labels,
                           const LossSpec& loss, std::span<double> grad, Workspace& ws) const;
  double loss_and_gradient(const Eigen::Ref<const Matrix>& features, const Eigen::Ref<const Vector>& labels,
                           const LossSpec& loss, std::span<double> grad) const;

  friend bool operator==(const Model& a, const Model& b) {
    return a.architecture_ == b.architecture_ && a.n_features_ == b.n_features_ && a.params_ == b.params_;
  }

 private:
  void forward(const Eigen::Ref<const Matrix>& features, Workspace& ws) const;

  HyperParams architecture_;
  int n_features_ = 0;
  std::vector<double> params_;
};

// He-normal hidden weights, zero biases, zero output layer: a fresh model
// scores every input as 0.
Model init_model(const HyperParams& hp, int n_features, std::uint64_t init_seed);

// Depth-0 model with the given weights and bias.
Model linear_model(const Vector& weights, double bias);

// The generator's separating rule scaled by `scale`, as a linear model.
Model bayes_model(const DataSpec& spec, double scale = 1.0);

// Exact mean loss over all rows. Throws DomainError on an empty dataset.
double empirical_risk(const Model& model, const Dataset& data, const LossSpec& loss);

struct RiskEstimate {
  double risk = 0.0;
  double std_error = 0.0;
};

// Mean loss with the standard error of the mean.
RiskEstimate risk_from_scores(const Vector& scores, const Vector& labels, const LossSpec& loss);
RiskEstimate risk_with_error(const Model& model, const Dataset& data, const LossSpec& loss);

inline constexpr std::size_t kDefaultMinTestCount = 10'000;

// Risk on a fresh sample of `test_count` points drawn with `eval_seed`.
RiskEstimate true_risk_estimate(const Model& model, const DataSpec& spec, const LossSpec& loss,
                                std::size_t test_count, std::uint64_t eval_seed,
                                std::size_t min_test_count = kDefaultMinTestCount);

void to_json(nlohmann::json& j, const HyperParams& hp);
void from_json(const nlohmann::json& j, HyperParams& hp);
void to_json(nlohmann::json& j, const LossSpec& loss);
void from_json(const nlohmann::json& j, LossSpec& loss);
void to_json(nlohmann::json& j, const Model& model);
void from_json(const nlohmann::json& j, Model& model);

}  // namespace hpoerm

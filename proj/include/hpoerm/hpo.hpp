#pragma once

// Hold-out hyperparameter optimization with approximate inner ERM, final
// retraining on all samples, and the post-hoc excess-risk decomposition.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hpoerm/model.hpp"
#include "hpoerm/synth_data.hpp"
#include "hpoerm/trainer.hpp"
#include "json.hpp"

namespace hpoerm {

// Seeds for the independent random streams of one HPO run. Per-config
// training seeds depend on the configuration, not its grid position.
struct SeedBundle {
  std::uint64_t split = 0;
  std::uint64_t train = 0;
  std::uint64_t retrain = 0;
  std::uint64_t eval = 0;

  static SeedBundle from_base(std::uint64_t base);

  std::uint64_t train_seed(const HyperParams& hp) const;
  std::uint64_t retrain_seed(const HyperParams& hp) const;
  // Throws ConfigError if the evaluation seed collides with a training seed.
  void check_isolation() const;
};

struct HpoConfig {
  HpGrid grid;
  std::size_t m = 0;
  std::size_t mu = 0;
  double rho_in = 0.0;
  double rho_out = 0.0;
  double delta = 0.05;
  TrainBudget budget;
  SeedBundle seeds;
  unsigned threads = 1;  // per-config inner trainings

  void validate(std::size_t n) const;
};

struct LambdaRun {
  HyperParams hp;
  TrainResult exact;   // reference minimizer on the m-sample
  TrainResult approx;  // tolerance-stopped at rho_in
  double validation_risk = 0.0;
};

struct Selection {
  std::size_t lambda_hat_index = 0;
  std::vector<LambdaRun> runs;  // grid order

  const HyperParams& lambda_hat() const { return runs.at(lambda_hat_index).hp; }
};

// First minimum wins ties.
std::size_t argmin_first(const std::vector<double>& values);

Selection select_hp(const Dataset& data, const HpoConfig& cfg, const LossSpec& loss);

struct Retrain {
  TrainResult exact;   // reference minimizer on all n samples
  TrainResult approx;  // tolerance-stopped at rho_out
};

Retrain retrain_full(const Dataset& data, const HyperParams& lambda_hat, const HpoConfig& cfg, const LossSpec& loss);

// E_n(holdin) - E_n(retrained); may be negative.
double improvement(const Model& holdin, const Model& retrained, const Dataset& data_n, const LossSpec& loss);

struct HpoOutcome {
  HyperParams lambda_hat;
  std::size_t lambda_hat_index = 0;
  TrainResult holdin_model;
  TrainResult retrained_model;
  std::vector<double> validation_risks;
  double improvement_I = 0.0;
  std::int64_t steps_inner_total = 0;
  std::int64_t steps_inner_exact = 0;
  std::int64_t steps_retrain = 0;
  std::int64_t steps_retrain_exact = 0;
};

HpoOutcome make_outcome(const Dataset& data, const Selection& selection, const Retrain& retrain, const LossSpec& loss);

// select_hp, retrain_full and improvement in sequence.
HpoOutcome run_hpo(const Dataset& data, const HpoConfig& cfg, const LossSpec& loss, Selection* selection = nullptr);

std::size_t oracle_hp(const std::vector<LambdaRun>& runs, const Dataset& test, const LossSpec& loss);
std::size_t oracle_hp(const std::vector<LambdaRun>& runs, const DataSpec& spec, const LossSpec& loss,
                      std::size_t test_count, std::uint64_t eval_seed);

struct RiskReport {
  RiskEstimate true_risk_holdin;
  RiskEstimate true_risk_retrained;
  RiskEstimate true_risk_oracle_holdin;
  HyperParams lambda_bar;
  std::size_t lambda_bar_index = 0;
  double e_mcm_hat = 0.0;
  double e_hin_hat = 0.0;
  // Percent of the oracle model's risk; an absolute difference when that risk is 0.
  double delta_tilde = 0.0;
  bool delta_tilde_relative = true;
  bool matched_oracle = false;
  bool tie_within_1e5 = false;
};

// Relative difference |a - b| / max(|a|, |b|) at most 1e-5; equal values tie.
bool risks_tie(double a, double b);

// Builds the report from already measured test risks: one per grid entry
// (hold-in models, grid order), plus the two deployed models.
RiskReport assemble_risk_report(std::size_t lambda_hat_index, const std::vector<HyperParams>& grid,
                                const std::vector<RiskEstimate>& per_lambda, const RiskEstimate& holdin,
                                const RiskEstimate& retrained);

// All risks are measured on the one shared test sample.
RiskReport risk_report(const HpoOutcome& outcome, const std::vector<LambdaRun>& runs, const Dataset& test,
                       const LossSpec& loss);
RiskReport risk_report(const HpoOutcome& outcome, const std::vector<LambdaRun>& runs, const DataSpec& spec,
                       const LossSpec& loss, std::size_t test_count, std::uint64_t eval_seed);

// Columns lambda_index,depth,width,lr,batch,val_risk,steps.
void write_validation_csv(const Selection& selection, std::ostream& out);

void to_json(nlohmann::json& j, const SeedBundle& seeds);
void from_json(const nlohmann::json& j, SeedBundle& seeds);
void to_json(nlohmann::json& j, const HpoOutcome& outcome);
void to_json(nlohmann::json& j, const RiskReport& report);

}  // namespace hpoerm

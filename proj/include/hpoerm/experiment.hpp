#pragma once

// Experiment harness: repeated HPO runs over sample sizes, split fractions,
// tolerances and trials, measured against a large shared test sample.
//
// An instance is one (n, mu fraction, trial). Instances run in a worker pool
// and each is single-threaded; rows are emitted in instance order, so the
// output does not depend on the thread count. The data sample depends on
// (n, trial) only, the test sample likewise, so all mu fractions of a trial
// see the same draw.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpoerm/heuristics.hpp"
#include "hpoerm/hpo.hpp"
#include "hpoerm/model.hpp"
#include "hpoerm/synth_data.hpp"
#include "hpoerm/trainer.hpp"
#include "json.hpp"

namespace hpoerm {

enum class RhoMode { fixed, h2_driven, h3_driven };

const char* to_string(RhoMode mode);
RhoMode rho_mode_from_string(const std::string& name);

struct ExperimentPlan {
  std::vector<std::size_t> n_values{512, 1024, 2048, 4096, 8192, 16384};
  std::vector<double> mu_fractions{0.1, 0.3, 0.5};
  std::string grid_name = "grid36";
  std::vector<HyperParams> grid_configs;  // when non-empty, used instead of grid_name
  int trials = 10;
  double delta = 0.05;
  std::vector<double> gamma_values{0.1, 1.0, 10.0};
  RhoMode rho_mode = RhoMode::fixed;

  // fixed mode: every rho_in paired with rho_out = factor * rho_in
  std::vector<double> rho_in_values{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> rho_out_factors{0.1, 1.0, 2.0, 10.0};

  // h3 mode: rho_in from the inner-tolerance rule with this gamma, then
  // at most h3_max_levels outer levels rho_in * nu^k
  double nu = 0.5;
  double h3_gamma_in = 0.1;
  int h3_max_levels = 12;
  bool h3_warmup_checkpoints = true;  // for the retraining run the controller watches

  // tolerance mode: also run the reference-free stopping rule
  bool honest_speedup = true;

  DataSpec data;
  LossSpec train_loss = LossSpec::clipped_logistic();
  LossSpec eval_loss = LossSpec::clipped_logistic();
  TrainBudget budget;
  std::size_t test_count = 100'000;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;

  HpGrid grid() const;
  // Throws ConfigError.
  void validate() const;
};

// mu = round(mu_fraction * n), m = n - mu.
std::size_t validation_count(std::size_t n, double mu_fraction);

struct InstanceSeeds {
  std::uint64_t data = 0;  // draw seed of the n-sample
  std::uint64_t test = 0;  // draw seed of the test sample
  SeedBundle hpo;
};

InstanceSeeds instance_seeds(std::uint64_t base_seed, std::size_t n, double mu_fraction, int trial);

void to_json(nlohmann::json& j, const ExperimentPlan& plan);
void from_json(const nlohmann::json& j, ExperimentPlan& plan);

// One row of a choice or tolerance experiment. Risks are excess risks on the
// test sample (the Bayes risk is zero); *_01 columns use the zero-one loss.
// Quantities an experiment does not produce are NaN or -1.
struct ExperimentRow {
  std::string experiment;
  std::size_t n = 0;
  double mu_fraction = 0.0;
  std::size_t m = 0;
  std::size_t mu = 0;
  int trial = 0;
  double gamma = 0.0;
  double rho_in = 0.0;
  double rho_out = 0.0;
  int lambda_hat = -1;
  int lambda_bar = -1;
  int lambda_hat_exact = -1;
  double excess_risk_holdin = 0.0;
  double excess_risk_retrained = 0.0;
  double excess_risk_choice = 0.0;
  double excess_risk_oracle = 0.0;
  double excess_risk_exact = 0.0;  // hold-in model of HPO with exact inner ERM
  double stderr_holdin = 0.0;
  double excess_risk_holdin_01 = 0.0;
  double excess_risk_retrained_01 = 0.0;
  double excess_risk_choice_01 = 0.0;
  double excess_risk_exact_01 = 0.0;
  double improvement_I = 0.0;
  double h1_threshold = 0.0;
  std::string choice_made;  // retrained, hold_in, or n/a
  bool matched_oracle = false;
  double delta_tilde = 0.0;
  bool tie_within_1e5 = false;
  double e_mcm_hat = 0.0;
  double e_hin_hat = 0.0;
  std::int64_t steps_exact = 0;
  std::int64_t steps_approx = 0;
  double speedup = 0.0;
  std::int64_t steps_honest = -1;
  double speedup_honest = 0.0;
  std::string error;  // empty on success
};

struct H3Row {
  std::size_t n = 0;
  double mu_fraction = 0.0;
  std::size_t m = 0;
  std::size_t mu = 0;
  int trial = 0;
  double gamma = 0.0;
  int lambda_hat = -1;
  double rho_in = 0.0;
  double kappa = 0.0;
  double final_rho_out = 0.0;
  int exit_T = -1;  // -1 when the levels ran out first
  double excess_risk_h3 = 0.0;
  double excess_risk_exact_retrain = 0.0;
  double excess_risk_holdin = 0.0;
  double excess_risk_h3_01 = 0.0;
  double excess_risk_exact_retrain_01 = 0.0;
  std::int64_t steps_exact = 0;
  std::int64_t steps_h3 = 0;
  double speedup = 0.0;
  std::string error;
};

struct H3TraceRow {
  std::size_t n = 0;
  double mu_fraction = 0.0;
  int trial = 0;
  double gamma = 0.0;
  double improvement_I = 0.0;  // the controller consumed -improvement_I
  H3Trace step;
};

struct H3Result {
  std::vector<H3Row> rows;
  std::vector<H3TraceRow> trace;
};

std::vector<ExperimentRow> run_choice_experiment(const ExperimentPlan& plan);
std::vector<ExperimentRow> run_tolerance_experiment(const ExperimentPlan& plan);
H3Result run_h3_experiment(const ExperimentPlan& plan);

void write_rows_csv(const std::vector<ExperimentRow>& rows, std::ostream& out);
void write_h3_rows_csv(const std::vector<H3Row>& rows, std::ostream& out);
void write_h3_trace_rows_csv(const std::vector<H3TraceRow>& rows, std::ostream& out);

}  // namespace hpoerm

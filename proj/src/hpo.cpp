#include "hpoerm/hpo.hpp"

#include <cmath>
#include <ostream>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/parallel.hpp"
#include "hpoerm/random.hpp"

namespace hpoerm {

namespace {

constexpr std::uint64_t kSplitTag = 10;
constexpr std::uint64_t kTrainTag = 11;
constexpr std::uint64_t kRetrainTag = 12;
constexpr std::uint64_t kEvalTag = 13;

std::vector<RiskEstimate> test_risks(const std::vector<LambdaRun>& runs, const Dataset& test, const LossSpec& loss) {
  std::vector<RiskEstimate> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(risk_with_error(r.approx.model, test, loss));
  return out;
}

std::size_t argmin_risk(const std::vector<RiskEstimate>& risks) {
  std::vector<double> v;
  v.reserve(risks.size());
  for (const auto& r : risks) v.push_back(r.risk);
  return argmin_first(v);
}

}  // namespace

SeedBundle SeedBundle::from_base(std::uint64_t base) {
  SeedBundle s;
  s.split = derive_seed(base, {kSplitTag});
  s.train = derive_seed(base, {kTrainTag});
  s.retrain = derive_seed(base, {kRetrainTag});
  s.eval = derive_seed(base, {kEvalTag});
  return s;
}

std::uint64_t SeedBundle::train_seed(const HyperParams& hp) const { return derive_seed(train, {hp.fingerprint()}); }

std::uint64_t SeedBundle::retrain_seed(const HyperParams& hp) const {
  return derive_seed(retrain, {hp.fingerprint()});
}

void SeedBundle::check_isolation() const {
  if (eval == split || eval == train || eval == retrain) {
    throw ConfigError("SeedBundle: evaluation seed overlaps a training or split seed");
  }
}

void HpoConfig::validate(std::size_t n) const {
  grid.validate();
  budget.validate();
  seeds.check_isolation();
  if (m == 0 || mu == 0) throw ConfigError("HpoConfig: m and mu must be positive");
  if (m + mu > n) {
    throw SizeError("HpoConfig: m + mu = " + std::to_string(m + mu) + " exceeds n = " + std::to_string(n));
  }
  if (std::isnan(rho_in) || rho_in < 0.0) throw ConfigError("HpoConfig: rho_in must be non-negative");
  if (std::isnan(rho_out) || rho_out < 0.0) throw ConfigError("HpoConfig: rho_out must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("HpoConfig: delta must be in (0, 1)");
}

std::size_t argmin_first(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

Selection select_hp(const Dataset& data, const HpoConfig& cfg, const LossSpec& loss) {
  cfg.validate(data.count());
  const auto [train, validation] = split(data, cfg.m, cfg.mu, cfg.seeds.split);

  Selection sel;
  sel.runs.resize(cfg.grid.size());
  const std::vector<double> rhos{cfg.rho_in};
  parallel_for(cfg.grid.size(), cfg.threads, [&](std::size_t i) {
    const HyperParams& hp = cfg.grid.configs[i];
    try {
      auto sweep = tolerance_sweep(train, hp, loss, rhos, cfg.budget, cfg.seeds.train_seed(hp));
      LambdaRun run{hp, std::move(sweep.exact), std::move(sweep.approx.front()), 0.0};
      run.validation_risk = empirical_risk(run.approx.model, validation, loss);
      sel.runs[i] = std::move(run);
    } catch (const NumericError& e) {
      throw NumericError("config " + std::to_string(i) + " (" + hp.label() + "): " + e.what());
    } catch (const SizeError& e) {
      throw SizeError("config " + std::to_string(i) + " (" + hp.label() + "): " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("config " + std::to_string(i) + " (" + hp.label() + "): " + e.what());
    }
  });

  std::vector<double> risks;
  for (const auto& r : sel.runs) risks.push_back(r.validation_risk);
  sel.lambda_hat_index = argmin_first(risks);
  return sel;
}

Retrain retrain_full(const Dataset& data, const HyperParams& lambda_hat, const HpoConfig& cfg, const LossSpec& loss) {
  cfg.validate(data.count());
  const std::vector<double> rhos{cfg.rho_out};
  auto sweep = tolerance_sweep(data, lambda_hat, loss, rhos, cfg.budget, cfg.seeds.retrain_seed(lambda_hat));
  return {std::move(sweep.exact), std::move(sweep.approx.front())};
}

double improvement(const Model& holdin, const Model& retrained, const Dataset& data_n, const LossSpec& loss) {
  return empirical_risk(holdin, data_n, loss) - empirical_risk(retrained, data_n, loss);
}

HpoOutcome make_outcome(const Dataset& data, const Selection& selection, const Retrain& retrain,
                        const LossSpec& loss) {
  HpoOutcome out;
  out.lambda_hat_index = selection.lambda_hat_index;
  out.lambda_hat = selection.lambda_hat();
  out.holdin_model = selection.runs.at(selection.lambda_hat_index).approx;
  out.retrained_model = retrain.approx;
  for (const auto& r : selection.runs) {
    out.validation_risks.push_back(r.validation_risk);
    out.steps_inner_total += r.approx.steps_used;
    out.steps_inner_exact += r.exact.steps_used;
  }
  out.steps_retrain = retrain.approx.steps_used;
  out.steps_retrain_exact = retrain.exact.steps_used;
  out.improvement_I = improvement(out.holdin_model.model, out.retrained_model.model, data, loss);
  return out;
}

HpoOutcome run_hpo(const Dataset& data, const HpoConfig& cfg, const LossSpec& loss, Selection* selection) {
  Selection sel = select_hp(data, cfg, loss);
  const Retrain retrain = retrain_full(data, sel.lambda_hat(), cfg, loss);
  HpoOutcome out = make_outcome(data, sel, retrain, loss);
  if (selection) *selection = std::move(sel);
  return out;
}

std::size_t oracle_hp(const std::vector<LambdaRun>& runs, const Dataset& test, const LossSpec& loss) {
  return argmin_risk(test_risks(runs, test, loss));
}

std::size_t oracle_hp(const std::vector<LambdaRun>& runs, const DataSpec& spec, const LossSpec& loss,
                      std::size_t test_count, std::uint64_t eval_seed) {
  if (test_count < kDefaultMinTestCount) throw ConfigError("oracle_hp: test_count below floor");
  return oracle_hp(runs, generate(spec, test_count, eval_seed), loss);
}

bool risks_tie(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return true;
  return std::abs(a - b) / scale <= 1e-5;
}

RiskReport assemble_risk_report(std::size_t lambda_hat_index, const std::vector<HyperParams>& grid,
                                const std::vector<RiskEstimate>& per_lambda, const RiskEstimate& holdin,
                                const RiskEstimate& retrained) {
  if (per_lambda.size() != grid.size()) throw SizeError("assemble_risk_report: one risk per grid entry required");
  if (lambda_hat_index >= grid.size()) throw SizeError("assemble_risk_report: lambda_hat index out of range");
  RiskReport rep;
  rep.lambda_bar_index = argmin_risk(per_lambda);
  rep.lambda_bar = grid[rep.lambda_bar_index];
  rep.true_risk_oracle_holdin = per_lambda[rep.lambda_bar_index];
  rep.true_risk_holdin = holdin;
  rep.true_risk_retrained = retrained;
  rep.e_mcm_hat = rep.true_risk_holdin.risk - rep.true_risk_oracle_holdin.risk;
  rep.e_hin_hat = rep.true_risk_holdin.risk - rep.true_risk_retrained.risk;
  if (rep.true_risk_oracle_holdin.risk > 0.0) {
    rep.delta_tilde = 100.0 * rep.e_mcm_hat / rep.true_risk_oracle_holdin.risk;
    rep.delta_tilde_relative = true;
  } else {
    rep.delta_tilde = rep.e_mcm_hat;
    rep.delta_tilde_relative = false;
  }
  rep.matched_oracle = grid[lambda_hat_index] == rep.lambda_bar;
  rep.tie_within_1e5 = risks_tie(rep.true_risk_holdin.risk, rep.true_risk_retrained.risk);
  return rep;
}

RiskReport risk_report(const HpoOutcome& outcome, const std::vector<LambdaRun>& runs, const Dataset& test,
                       const LossSpec& loss) {
  std::vector<HyperParams> grid;
  for (const auto& r : runs) grid.push_back(r.hp);
  if (outcome.lambda_hat_index >= grid.size() || !(grid[outcome.lambda_hat_index] == outcome.lambda_hat)) {
    throw StateError("risk_report: outcome does not belong to these runs");
  }
  return assemble_risk_report(outcome.lambda_hat_index, grid, test_risks(runs, test, loss),
                              risk_with_error(outcome.holdin_model.model, test, loss),
                              risk_with_error(outcome.retrained_model.model, test, loss));
}

RiskReport risk_report(const HpoOutcome& outcome, const std::vector<LambdaRun>& runs, const DataSpec& spec,
                       const LossSpec& loss, std::size_t test_count, std::uint64_t eval_seed) {
  if (test_count < kDefaultMinTestCount) throw ConfigError("risk_report: test_count below floor");
  return risk_report(outcome, runs, generate(spec, test_count, eval_seed), loss);
}

void write_validation_csv(const Selection& selection, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"lambda_index", "depth", "width", "lr", "batch", "val_risk", "steps"});
  for (std::size_t i = 0; i < selection.runs.size(); ++i) {
    const auto& r = selection.runs[i];
    write_csv_row(out, {std::to_string(i), std::to_string(r.hp.depth), std::to_string(r.hp.canonical().width),
                        format_double(r.hp.learning_rate), std::to_string(r.hp.batch_size),
                        format_double(r.validation_risk), std::to_string(r.approx.steps_used)});
  }
}

void to_json(nlohmann::json& j, const SeedBundle& seeds) {
  j = nlohmann::json{{"split", seeds.split}, {"train", seeds.train}, {"retrain", seeds.retrain}, {"eval", seeds.eval}};
}

void from_json(const nlohmann::json& j, SeedBundle& seeds) {
  seeds.split = j.at("split").get<std::uint64_t>();
  seeds.train = j.at("train").get<std::uint64_t>();
  seeds.retrain = j.at("retrain").get<std::uint64_t>();
  seeds.eval = j.at("eval").get<std::uint64_t>();
}

namespace {

nlohmann::json train_summary(const TrainResult& r) {
  return nlohmann::json{{"model", r.model},
                        {"achieved_risk", r.achieved_risk},
                        {"steps_used", r.steps_used},
                        {"stopped_by", to_string(r.stopped_by)}};
}

nlohmann::json estimate_json(const RiskEstimate& e) {
  return nlohmann::json{{"risk", e.risk}, {"std_error", e.std_error}};
}

}  // namespace

void to_json(nlohmann::json& j, const HpoOutcome& outcome) {
  j = nlohmann::json{{"lambda_hat", outcome.lambda_hat},
                     {"lambda_hat_index", outcome.lambda_hat_index},
                     {"holdin_model", train_summary(outcome.holdin_model)},
                     {"retrained_model", train_summary(outcome.retrained_model)},
                     {"validation_risks", outcome.validation_risks},
                     {"improvement_I", outcome.improvement_I},
                     {"steps_inner_total", outcome.steps_inner_total},
                     {"steps_inner_exact", outcome.steps_inner_exact},
                     {"steps_retrain", outcome.steps_retrain},
                     {"steps_retrain_exact", outcome.steps_retrain_exact}};
}

void to_json(nlohmann::json& j, const RiskReport& report) {
  j = nlohmann::json{{"true_risk_holdin", estimate_json(report.true_risk_holdin)},
                     {"true_risk_retrained", estimate_json(report.true_risk_retrained)},
                     {"true_risk_oracle_holdin", estimate_json(report.true_risk_oracle_holdin)},
                     {"lambda_bar", report.lambda_bar},
                     {"lambda_bar_index", report.lambda_bar_index},
                     {"e_mcm_hat", report.e_mcm_hat},
                     {"e_hin_hat", report.e_hin_hat},
                     {"delta_tilde", report.delta_tilde},
                     {"delta_tilde_relative", report.delta_tilde_relative},
                     {"matched_oracle", report.matched_oracle},
                     {"tie_within_1e5", report.tie_within_1e5}};
}

}  // namespace hpoerm

#include "hpoerm/experiment.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <ostream>
#include <string_view>
#include <tuple>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/heuristics.hpp"
#include "hpoerm/parallel.hpp"
#include "hpoerm/random.hpp"

namespace hpoerm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::uint64_t kInstanceTag = 40;

struct Instance {
  std::size_t n = 0;
  double mu_fraction = 0.0;
  int trial = 0;
};

std::vector<Instance> instances(const ExperimentPlan& plan) {
  std::vector<Instance> out;
  for (const auto n : plan.n_values) {
    for (const double f : plan.mu_fractions) {
      for (int t = 0; t < plan.trials; ++t) out.push_back({n, f, t});
    }
  }
  return out;
}

std::string error_code(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const SizeError*>(&e)) return "size";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const StateError*>(&e)) return "state";
  return "failure";
}

void log_failure(const char* experiment, const Instance& inst, const std::exception& e) {
  std::cerr << "warning: " << experiment << " n=" << inst.n << " mu_fraction=" << inst.mu_fraction
            << " trial=" << inst.trial << ": " << e.what() << '\n';
}

// Test-sample risks under the reporting loss and the zero-one loss. Results
// are cached per model; tolerance levels often stop at the same checkpoint.
class Evaluator {
 public:
  Evaluator(const Dataset& test, const LossSpec& loss) : test_(test), loss_(loss), zero_one_(LossSpec::zero_one(loss.bound)) {}

  struct Risks {
    RiskEstimate main;
    RiskEstimate zero_one;
  };

  const Risks& operator()(int phase, std::size_t config, const TrainResult& r) {
    const auto p = r.model.parameters();
    const std::string_view bytes(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
    const auto key = std::make_tuple(phase, config, r.steps_used, std::hash<std::string_view>{}(bytes));
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const Vector s = r.model.scores(test_.features);
    Risks risks{risk_from_scores(s, test_.labels, loss_), risk_from_scores(s, test_.labels, zero_one_)};
    return cache_.emplace(key, risks).first->second;
  }

 private:
  const Dataset& test_;
  LossSpec loss_;
  LossSpec zero_one_;
  std::map<std::tuple<int, std::size_t, std::int64_t, std::size_t>, Risks> cache_;
};

constexpr int kInner = 0;
constexpr int kRetrain = 1;

// State shared by all experiment kinds for one instance.
struct InstanceData {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t mu = 0;
  InstanceSeeds seeds;
  Dataset data;
  Dataset train;
  Dataset validation;
  Dataset test;
};

InstanceData prepare(const ExperimentPlan& plan, const Instance& inst) {
  InstanceData d;
  d.n = inst.n;
  d.mu = validation_count(inst.n, inst.mu_fraction);
  d.m = inst.n - d.mu;
  d.seeds = instance_seeds(plan.base_seed, inst.n, inst.mu_fraction, inst.trial);
  d.data = generate(plan.data, inst.n, d.seeds.data);
  auto [train, validation] = split(d.data, d.m, d.mu, d.seeds.hpo.split);
  d.train = std::move(train);
  d.validation = std::move(validation);
  d.test = generate(plan.data, plan.test_count, d.seeds.test);
  return d;
}

HpoConfig base_config(const ExperimentPlan& plan, const HpGrid& grid, const InstanceData& d) {
  HpoConfig cfg;
  cfg.grid = grid;
  cfg.m = d.m;
  cfg.mu = d.mu;
  cfg.delta = plan.delta;
  cfg.budget = plan.budget;
  cfg.seeds = d.seeds.hpo;
  cfg.validate(d.n);
  return cfg;
}

std::vector<ToleranceSweep> inner_sweeps(const ExperimentPlan& plan, const HpGrid& grid, const InstanceData& d,
                                         const std::vector<double>& rhos) {
  std::vector<ToleranceSweep> out;
  out.reserve(grid.size());
  for (const auto& hp : grid.configs) {
    out.push_back(tolerance_sweep(d.train, hp, plan.train_loss, rhos, plan.budget, d.seeds.hpo.train_seed(hp)));
  }
  return out;
}

ExperimentRow row_template(const char* experiment, const Instance& inst) {
  ExperimentRow r;
  r.experiment = experiment;
  r.n = inst.n;
  r.mu_fraction = inst.mu_fraction;
  r.mu = validation_count(inst.n, inst.mu_fraction);
  r.m = inst.n - r.mu;
  r.trial = inst.trial;
  r.gamma = kNaN;
  r.rho_in = kNaN;
  r.rho_out = kNaN;
  for (double* v : {&r.excess_risk_holdin, &r.excess_risk_retrained, &r.excess_risk_choice, &r.excess_risk_oracle,
                    &r.excess_risk_exact, &r.stderr_holdin, &r.excess_risk_holdin_01, &r.excess_risk_retrained_01,
                    &r.excess_risk_choice_01, &r.excess_risk_exact_01, &r.improvement_I, &r.h1_threshold,
                    &r.delta_tilde, &r.e_mcm_hat, &r.e_hin_hat, &r.speedup, &r.speedup_honest}) {
    *v = kNaN;
  }
  r.choice_made = "n/a";
  return r;
}

double ratio(std::int64_t num, std::int64_t den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : kNaN;
}

std::vector<ExperimentRow> choice_instance(const ExperimentPlan& plan, const HpGrid& grid, const Instance& inst) {
  std::vector<ExperimentRow> rows;
  for (const double rin : plan.rho_in_values) {
    for (const double f : plan.rho_out_factors) {
      ExperimentRow r = row_template("choice", inst);
      r.rho_in = rin;
      r.rho_out = f * rin;
      rows.push_back(std::move(r));
    }
  }
  try {
    const InstanceData d = prepare(plan, inst);
    const HpoConfig cfg = base_config(plan, grid, d);
    const std::size_t L = grid.size();
    const auto inner = inner_sweeps(plan, grid, d, plan.rho_in_values);

    std::vector<double> val_exact(L);
    std::vector<std::vector<double>> val_approx(plan.rho_in_values.size(), std::vector<double>(L));
    for (std::size_t i = 0; i < L; ++i) {
      val_exact[i] = empirical_risk(inner[i].exact.model, d.validation, plan.train_loss);
      for (std::size_t k = 0; k < plan.rho_in_values.size(); ++k) {
        val_approx[k][i] = empirical_risk(inner[i].approx[k].model, d.validation, plan.train_loss);
      }
    }
    const std::size_t hat_exact = argmin_first(val_exact);

    // One retraining sweep per distinct selected configuration, covering every
    // outer tolerance paired with the inner tolerances that selected it.
    std::vector<std::size_t> hat(plan.rho_in_values.size());
    std::map<std::size_t, std::vector<double>> outer_rhos;
    for (std::size_t k = 0; k < plan.rho_in_values.size(); ++k) {
      hat[k] = argmin_first(val_approx[k]);
      for (const double f : plan.rho_out_factors) outer_rhos[hat[k]].push_back(f * plan.rho_in_values[k]);
    }
    std::map<std::size_t, ToleranceSweep> retrain;
    for (const auto& [idx, rhos] : outer_rhos) {
      const HyperParams& hp = grid.configs[idx];
      retrain.emplace(idx, tolerance_sweep(d.data, hp, plan.train_loss, rhos, plan.budget,
                                           cfg.seeds.retrain_seed(hp)));
    }

    Evaluator eval(d.test, plan.eval_loss);
    const double threshold = h1_threshold(plan.train_loss.bound, L, plan.delta, d.n);
    std::int64_t steps_exact = 0;
    for (const auto& s : inner) steps_exact += s.exact.steps_used;
    const auto& exact_risks = eval(kInner, hat_exact, inner[hat_exact].exact);

    std::map<std::size_t, std::size_t> next_outer;  // position within outer_rhos per config
    std::size_t row = 0;
    for (std::size_t k = 0; k < plan.rho_in_values.size(); ++k) {
      std::vector<RiskEstimate> per_lambda;
      std::int64_t steps_approx = 0;
      for (std::size_t i = 0; i < L; ++i) {
        per_lambda.push_back(eval(kInner, i, inner[i].approx[k]).main);
        steps_approx += inner[i].approx[k].steps_used;
      }
      const TrainResult& holdin = inner[hat[k]].approx[k];
      const auto& holdin_risks = eval(kInner, hat[k], holdin);
      const double holdin_n = empirical_risk(holdin.model, d.data, plan.train_loss);

      for (std::size_t j = 0; j < plan.rho_out_factors.size(); ++j, ++row) {
        ExperimentRow& r = rows[row];
        const TrainResult& retrained = retrain.at(hat[k]).approx[next_outer[hat[k]]++];
        const auto& retrained_risks = eval(kRetrain, hat[k], retrained);
        const RiskReport rep =
            assemble_risk_report(hat[k], grid.configs, per_lambda, holdin_risks.main, retrained_risks.main);

        r.lambda_hat = static_cast<int>(hat[k]);
        r.lambda_bar = static_cast<int>(rep.lambda_bar_index);
        r.lambda_hat_exact = static_cast<int>(hat_exact);
        r.excess_risk_holdin = holdin_risks.main.risk;
        r.stderr_holdin = holdin_risks.main.std_error;
        r.excess_risk_retrained = retrained_risks.main.risk;
        r.excess_risk_oracle = rep.true_risk_oracle_holdin.risk;
        r.excess_risk_exact = exact_risks.main.risk;
        r.excess_risk_holdin_01 = holdin_risks.zero_one.risk;
        r.excess_risk_retrained_01 = retrained_risks.zero_one.risk;
        r.excess_risk_exact_01 = exact_risks.zero_one.risk;
        r.improvement_I = holdin_n - empirical_risk(retrained.model, d.data, plan.train_loss);
        r.h1_threshold = threshold;
        const ModelChoice choice = h1_choose(r.improvement_I, r.h1_threshold);
        r.choice_made = to_string(choice);
        const bool take_retrained = choice == ModelChoice::retrained;
        r.excess_risk_choice = take_retrained ? r.excess_risk_retrained : r.excess_risk_holdin;
        r.excess_risk_choice_01 = take_retrained ? r.excess_risk_retrained_01 : r.excess_risk_holdin_01;
        r.matched_oracle = rep.matched_oracle;
        r.delta_tilde = rep.delta_tilde;
        r.tie_within_1e5 = rep.tie_within_1e5;
        r.e_mcm_hat = rep.e_mcm_hat;
        r.e_hin_hat = rep.e_hin_hat;
        r.steps_exact = steps_exact;
        r.steps_approx = steps_approx;
        r.speedup = ratio(steps_exact, steps_approx);
      }
    }
  } catch (const std::exception& e) {
    log_failure("choice", inst, e);
    for (auto& r : rows) r.error = error_code(e);
  }
  return rows;
}

std::vector<ExperimentRow> tolerance_instance(const ExperimentPlan& plan, const HpGrid& grid, const Instance& inst) {
  std::vector<ExperimentRow> rows;
  for (const double g : plan.gamma_values) {
    ExperimentRow r = row_template("tolerance", inst);
    r.gamma = g;
    rows.push_back(std::move(r));
  }
  try {
    const InstanceData d = prepare(plan, inst);
    base_config(plan, grid, d);
    const std::size_t L = grid.size();
    std::vector<double> rhos;
    for (const double g : plan.gamma_values) {
      rhos.push_back(h2_rho_in(g, plan.train_loss.bound, L, plan.delta, d.m, d.mu));
    }
    const auto inner = inner_sweeps(plan, grid, d, rhos);

    std::vector<double> val_exact(L);
    std::int64_t steps_exact = 0;
    for (std::size_t i = 0; i < L; ++i) {
      val_exact[i] = empirical_risk(inner[i].exact.model, d.validation, plan.train_loss);
      steps_exact += inner[i].exact.steps_used;
    }
    const std::size_t hat_exact = argmin_first(val_exact);

    Evaluator eval(d.test, plan.eval_loss);
    const auto& exact_risks = eval(kInner, hat_exact, inner[hat_exact].exact);
    const RiskEstimate missing{kNaN, kNaN};

    for (std::size_t k = 0; k < rhos.size(); ++k) {
      ExperimentRow& r = rows[k];
      std::vector<double> val(L);
      std::vector<RiskEstimate> per_lambda;
      std::int64_t steps_approx = 0;
      for (std::size_t i = 0; i < L; ++i) {
        val[i] = empirical_risk(inner[i].approx[k].model, d.validation, plan.train_loss);
        per_lambda.push_back(eval(kInner, i, inner[i].approx[k]).main);
        steps_approx += inner[i].approx[k].steps_used;
      }
      const std::size_t hat = argmin_first(val);
      const auto& holdin_risks = eval(kInner, hat, inner[hat].approx[k]);
      const RiskReport rep = assemble_risk_report(hat, grid.configs, per_lambda, holdin_risks.main, missing);

      r.rho_in = rhos[k];
      r.lambda_hat = static_cast<int>(hat);
      r.lambda_bar = static_cast<int>(rep.lambda_bar_index);
      r.lambda_hat_exact = static_cast<int>(hat_exact);
      r.excess_risk_holdin = holdin_risks.main.risk;
      r.stderr_holdin = holdin_risks.main.std_error;
      r.excess_risk_oracle = rep.true_risk_oracle_holdin.risk;
      r.excess_risk_exact = exact_risks.main.risk;
      r.excess_risk_holdin_01 = holdin_risks.zero_one.risk;
      r.excess_risk_exact_01 = exact_risks.zero_one.risk;
      r.matched_oracle = rep.matched_oracle;
      r.delta_tilde = rep.delta_tilde;
      r.e_mcm_hat = rep.e_mcm_hat;
      r.steps_exact = steps_exact;
      r.steps_approx = steps_approx;
      r.speedup = ratio(steps_exact, steps_approx);

      if (plan.honest_speedup) {
        std::int64_t steps = 0;
        for (std::size_t i = 0; i < L; ++i) {
          if (rhos[k] == 0.0) {
            steps += inner[i].exact.steps_used;
          } else {
            const HyperParams& hp = grid.configs[i];
            steps += approx_erm_online(d.train, hp, plan.train_loss, rhos[k], plan.budget, d.seeds.hpo.train_seed(hp))
                         .steps_used;
          }
        }
        r.steps_honest = steps;
        r.speedup_honest = ratio(steps_exact, steps);
      }
    }
  } catch (const std::exception& e) {
    log_failure("tolerance", inst, e);
    for (auto& r : rows) r.error = error_code(e);
  }
  return rows;
}

H3Result h3_instance(const ExperimentPlan& plan, const HpGrid& grid, const Instance& inst) {
  H3Result out;
  for (const double g : plan.gamma_values) {
    H3Row r;
    r.n = inst.n;
    r.mu_fraction = inst.mu_fraction;
    r.mu = validation_count(inst.n, inst.mu_fraction);
    r.m = inst.n - r.mu;
    r.trial = inst.trial;
    r.gamma = g;
    for (double* v : {&r.rho_in, &r.kappa, &r.final_rho_out, &r.excess_risk_h3, &r.excess_risk_exact_retrain,
                      &r.excess_risk_holdin, &r.excess_risk_h3_01, &r.excess_risk_exact_retrain_01, &r.speedup}) {
      *v = kNaN;
    }
    out.rows.push_back(r);
  }
  try {
    const InstanceData d = prepare(plan, inst);
    const HpoConfig cfg = base_config(plan, grid, d);
    const std::size_t L = grid.size();
    const double bound = plan.train_loss.bound;
    const double rho_in = h2_rho_in(plan.h3_gamma_in, bound, L, plan.delta, d.m, d.mu);
    const double kappa = h3_kappa(rho_in, bound, L, plan.delta, d.n, d.m, d.mu);
    const auto inner = inner_sweeps(plan, grid, d, {rho_in});
    std::vector<double> val(L);
    for (std::size_t i = 0; i < L; ++i) val[i] = empirical_risk(inner[i].approx[0].model, d.validation, plan.train_loss);
    const std::size_t hat = argmin_first(val);
    const HyperParams& hp = grid.configs[hat];
    const TrainResult& holdin = inner[hat].approx[0];

    // The snapshots of a tolerance sweep are the ones a schedule run with the
    // same seed would emit, and the sweep also yields the exact reference.
    std::vector<double> levels;
    for (int k = 0; k < plan.h3_max_levels; ++k) levels.push_back(rho_in * std::pow(plan.nu, k));
    TrainBudget outer_budget = plan.budget;
    outer_budget.warmup_checkpoints = outer_budget.warmup_checkpoints || plan.h3_warmup_checkpoints;
    const ToleranceSweep sweep =
        tolerance_sweep(d.data, hp, plan.train_loss, levels, outer_budget, cfg.seeds.retrain_seed(hp));
    // The controller reduces while Gamma(previous) - Gamma(current) exceeds
    // gamma * kappa, i.e. while Gamma falls. The improvement I grows as the
    // outer tolerance shrinks, so Gamma is fed as -I: the controller then
    // continues while the gain in improvement from the last reduction is large.
    const double holdin_n = empirical_risk(holdin.model, d.data, plan.train_loss);
    std::vector<double> improvements, gammas;
    for (const auto& s : sweep.approx) {
      improvements.push_back(holdin_n - empirical_risk(s.model, d.data, plan.train_loss));
      gammas.push_back(-improvements.back());
    }

    Evaluator eval(d.test, plan.eval_loss);
    const auto& exact_risks = eval(kRetrain, hat, sweep.exact);
    const auto& holdin_risks = eval(kInner, hat, holdin);

    for (std::size_t g = 0; g < plan.gamma_values.size(); ++g) {
      H3Row& r = out.rows[g];
      const H3Run run = h3_run(rho_in, kappa, plan.nu, plan.gamma_values[g], gammas);
      // On exit at T the level before is deployed; level T was still trained.
      std::size_t deployed = levels.size() - 1;
      std::size_t trained = levels.size() - 1;
      if (run.state.terminated) {
        const auto T = static_cast<std::size_t>(run.trace.back().iteration);
        deployed = T - 1;
        trained = T;
        r.exit_T = static_cast<int>(T);
        r.final_rho_out = run.state.final_rho_out;
      } else {
        r.final_rho_out = levels.back();
      }
      const auto& deployed_risks = eval(kRetrain, hat, sweep.approx[deployed]);
      r.lambda_hat = static_cast<int>(hat);
      r.rho_in = rho_in;
      r.kappa = kappa;
      r.excess_risk_h3 = deployed_risks.main.risk;
      r.excess_risk_h3_01 = deployed_risks.zero_one.risk;
      r.excess_risk_exact_retrain = exact_risks.main.risk;
      r.excess_risk_exact_retrain_01 = exact_risks.zero_one.risk;
      r.excess_risk_holdin = holdin_risks.main.risk;
      r.steps_exact = sweep.exact.steps_used;
      r.steps_h3 = sweep.approx[trained].steps_used;
      r.speedup = ratio(r.steps_exact, r.steps_h3);
      for (const auto& t : run.trace) {
        out.trace.push_back({inst.n, inst.mu_fraction, inst.trial, plan.gamma_values[g],
                             improvements[static_cast<std::size_t>(t.iteration)], t});
      }
    }
  } catch (const std::exception& e) {
    log_failure("h3", inst, e);
    for (auto& r : out.rows) r.error = error_code(e);
  }
  return out;
}

template <class Result, class Fn>
std::vector<Result> run_instances(const ExperimentPlan& plan, Fn&& fn) {
  const auto list = instances(plan);
  std::vector<Result> results(list.size());
  parallel_for(list.size(), plan.threads, [&](std::size_t i) { results[i] = fn(list[i]); });
  return results;
}

void check_mode(const ExperimentPlan& plan, RhoMode expected) {
  plan.validate();
  if (plan.rho_mode != expected) {
    throw ConfigError(std::string("experiment needs rho_mode ") + to_string(expected) + ", plan has " +
                      to_string(plan.rho_mode));
  }
}

std::string fmt(std::int64_t v) { return std::to_string(v); }
std::string fmt(double v) { return format_double(v); }
std::string fmt(bool v) { return v ? "1" : "0"; }

template <class T>
void check_list(const std::vector<T>& v, const char* name) {
  if (v.empty()) throw ConfigError(std::string("ExperimentPlan: ") + name + " must not be empty");
}

}  // namespace

const char* to_string(RhoMode mode) {
  switch (mode) {
    case RhoMode::fixed:
      return "fixed";
    case RhoMode::h2_driven:
      return "h2_driven";
    case RhoMode::h3_driven:
      return "h3_driven";
  }
  return "?";
}

RhoMode rho_mode_from_string(const std::string& name) {
  if (name == "fixed") return RhoMode::fixed;
  if (name == "h2_driven") return RhoMode::h2_driven;
  if (name == "h3_driven") return RhoMode::h3_driven;
  throw ConfigError("unknown rho_mode '" + name + "'");
}

HpGrid ExperimentPlan::grid() const {
  if (!grid_configs.empty()) return HpGrid{grid_configs};
  return HpGrid::by_name(grid_name);
}

void ExperimentPlan::validate() const {
  check_list(n_values, "n_values");
  check_list(mu_fractions, "mu_fractions");
  check_list(gamma_values, "gamma_values");
  check_list(rho_in_values, "rho_in_values");
  check_list(rho_out_factors, "rho_out_factors");
  if (trials < 1) throw ConfigError("ExperimentPlan: trials must be >= 1");
  for (const auto n : n_values) {
    if (n < 2) throw ConfigError("ExperimentPlan: every n must be at least 2");
  }
  for (const double f : mu_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("ExperimentPlan: mu fractions must lie in (0, 1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("ExperimentPlan: delta must be in (0, 1)");
  for (const double g : gamma_values) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("ExperimentPlan: gamma values must be non-negative");
  }
  for (const double r : rho_in_values) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("ExperimentPlan: rho_in values must be non-negative");
  }
  for (const double f : rho_out_factors) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("ExperimentPlan: rho_out factors must be non-negative");
  }
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("ExperimentPlan: nu must be in (0, 1)");
  if (!(h3_gamma_in > 0.0)) throw ConfigError("ExperimentPlan: h3_gamma_in must be positive");
  if (h3_max_levels < 2) throw ConfigError("ExperimentPlan: h3_max_levels must be at least 2");
  if (rho_mode == RhoMode::h3_driven) {
    for (const double g : gamma_values) {
      if (!(g > 0.0)) throw ConfigError("ExperimentPlan: h3 gamma values must be positive");
    }
  }
  if (test_count < kDefaultMinTestCount) {
    throw ConfigError("ExperimentPlan: test_count must be at least " + std::to_string(kDefaultMinTestCount));
  }
  data.validate();
  train_loss.validate();
  eval_loss.validate();
  if (train_loss.kind != LossKind::clipped_logistic) throw ConfigError("ExperimentPlan: training needs clipped_logistic");
  budget.validate();
  grid().validate();
}

std::size_t validation_count(std::size_t n, double mu_fraction) {
  const auto mu = static_cast<std::size_t>(std::llround(mu_fraction * static_cast<double>(n)));
  return std::max<std::size_t>(1, std::min(mu, n - 1));
}

InstanceSeeds instance_seeds(std::uint64_t base_seed, std::size_t n, double mu_fraction, int trial) {
  const auto per_mille = static_cast<std::uint64_t>(std::llround(mu_fraction * 1000.0));
  const std::uint64_t sample = derive_seed(base_seed, {kInstanceTag, n, static_cast<std::uint64_t>(trial)});
  InstanceSeeds s;
  s.data = derive_seed(sample, {1});
  s.test = derive_seed(sample, {2});
  s.hpo = SeedBundle::from_base(derive_seed(sample, {3, per_mille}));
  return s;
}

void to_json(nlohmann::json& j, const ExperimentPlan& plan) {
  j = nlohmann::json{{"n_values", plan.n_values},
                     {"mu_fractions", plan.mu_fractions},
                     {"grid", plan.grid_name},
                     {"grid_configs", plan.grid_configs},
                     {"trials", plan.trials},
                     {"delta", plan.delta},
                     {"gamma_values", plan.gamma_values},
                     {"rho_mode", to_string(plan.rho_mode)},
                     {"rho_in_values", plan.rho_in_values},
                     {"rho_out_factors", plan.rho_out_factors},
                     {"nu", plan.nu},
                     {"h3_gamma_in", plan.h3_gamma_in},
                     {"h3_max_levels", plan.h3_max_levels},
                     {"h3_warmup_checkpoints", plan.h3_warmup_checkpoints},
                     {"honest_speedup", plan.honest_speedup},
                     {"data", plan.data},
                     {"train_loss", plan.train_loss},
                     {"eval_loss", plan.eval_loss},
                     {"budget", plan.budget},
                     {"test_count", plan.test_count},
                     {"base_seed", plan.base_seed},
                     {"threads", plan.threads}};
}

void from_json(const nlohmann::json& j, ExperimentPlan& plan) {
  const ExperimentPlan d;
  try {
    plan.n_values = j.value("n_values", d.n_values);
    plan.mu_fractions = j.value("mu_fractions", d.mu_fractions);
    plan.grid_name = j.value("grid", d.grid_name);
    plan.grid_configs = j.value("grid_configs", d.grid_configs);
    plan.trials = j.value("trials", d.trials);
    plan.delta = j.value("delta", d.delta);
    plan.gamma_values = j.value("gamma_values", d.gamma_values);
    plan.rho_mode = rho_mode_from_string(j.value("rho_mode", std::string(to_string(d.rho_mode))));
    plan.rho_in_values = j.value("rho_in_values", d.rho_in_values);
    plan.rho_out_factors = j.value("rho_out_factors", d.rho_out_factors);
    plan.nu = j.value("nu", d.nu);
    plan.h3_gamma_in = j.value("h3_gamma_in", d.h3_gamma_in);
    plan.h3_max_levels = j.value("h3_max_levels", d.h3_max_levels);
    plan.h3_warmup_checkpoints = j.value("h3_warmup_checkpoints", d.h3_warmup_checkpoints);
    plan.honest_speedup = j.value("honest_speedup", d.honest_speedup);
    plan.data = j.contains("data") ? j.at("data").get<DataSpec>() : d.data;
    plan.train_loss = j.contains("train_loss") ? j.at("train_loss").get<LossSpec>() : d.train_loss;
    plan.eval_loss = j.contains("eval_loss") ? j.at("eval_loss").get<LossSpec>() : d.eval_loss;
    plan.budget = j.contains("budget") ? j.at("budget").get<TrainBudget>() : d.budget;
    plan.test_count = j.value("test_count", d.test_count);
    plan.base_seed = j.value("base_seed", d.base_seed);
    plan.threads = j.value("threads", d.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ExperimentPlan: ") + e.what());
  }
}

std::vector<ExperimentRow> run_choice_experiment(const ExperimentPlan& plan) {
  check_mode(plan, RhoMode::fixed);
  const HpGrid grid = plan.grid();
  std::vector<ExperimentRow> rows;
  for (auto& part : run_instances<std::vector<ExperimentRow>>(
           plan, [&](const Instance& inst) { return choice_instance(plan, grid, inst); })) {
    for (auto& r : part) rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ExperimentRow> run_tolerance_experiment(const ExperimentPlan& plan) {
  check_mode(plan, RhoMode::h2_driven);
  const HpGrid grid = plan.grid();
  std::vector<ExperimentRow> rows;
  for (auto& part : run_instances<std::vector<ExperimentRow>>(
           plan, [&](const Instance& inst) { return tolerance_instance(plan, grid, inst); })) {
    for (auto& r : part) rows.push_back(std::move(r));
  }
  return rows;
}

H3Result run_h3_experiment(const ExperimentPlan& plan) {
  check_mode(plan, RhoMode::h3_driven);
  const HpGrid grid = plan.grid();
  H3Result out;
  for (auto& part :
       run_instances<H3Result>(plan, [&](const Instance& inst) { return h3_instance(plan, grid, inst); })) {
    for (auto& r : part.rows) out.rows.push_back(std::move(r));
    for (auto& t : part.trace) out.trace.push_back(std::move(t));
  }
  return out;
}

void write_rows_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"experiment",
                      "n",
                      "mu_fraction",
                      "m",
                      "mu",
                      "trial",
                      "gamma",
                      "rho_in",
                      "rho_out",
                      "lambda_hat",
                      "lambda_bar",
                      "lambda_hat_exact",
                      "excess_risk_holdin",
                      "excess_risk_retrained",
                      "excess_risk_choice",
                      "excess_risk_oracle",
                      "excess_risk_exact",
                      "stderr_holdin",
                      "excess_risk_holdin_01",
                      "excess_risk_retrained_01",
                      "excess_risk_choice_01",
                      "excess_risk_exact_01",
                      "improvement_I",
                      "h1_threshold",
                      "choice_made",
                      "matched_oracle",
                      "delta_tilde",
                      "tie_within_1e5",
                      "e_mcm_hat",
                      "e_hin_hat",
                      "steps_exact",
                      "steps_approx",
                      "speedup",
                      "steps_honest",
                      "speedup_honest",
                      "error"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.experiment,
                        fmt(static_cast<std::int64_t>(r.n)),
                        fmt(r.mu_fraction),
                        fmt(static_cast<std::int64_t>(r.m)),
                        fmt(static_cast<std::int64_t>(r.mu)),
                        fmt(static_cast<std::int64_t>(r.trial)),
                        fmt(r.gamma),
                        fmt(r.rho_in),
                        fmt(r.rho_out),
                        fmt(static_cast<std::int64_t>(r.lambda_hat)),
                        fmt(static_cast<std::int64_t>(r.lambda_bar)),
                        fmt(static_cast<std::int64_t>(r.lambda_hat_exact)),
                        fmt(r.excess_risk_holdin),
                        fmt(r.excess_risk_retrained),
                        fmt(r.excess_risk_choice),
                        fmt(r.excess_risk_oracle),
                        fmt(r.excess_risk_exact),
                        fmt(r.stderr_holdin),
                        fmt(r.excess_risk_holdin_01),
                        fmt(r.excess_risk_retrained_01),
                        fmt(r.excess_risk_choice_01),
                        fmt(r.excess_risk_exact_01),
                        fmt(r.improvement_I),
                        fmt(r.h1_threshold),
                        r.choice_made,
                        fmt(r.matched_oracle),
                        fmt(r.delta_tilde),
                        fmt(r.tie_within_1e5),
                        fmt(r.e_mcm_hat),
                        fmt(r.e_hin_hat),
                        fmt(r.steps_exact),
                        fmt(r.steps_approx),
                        fmt(r.speedup),
                        fmt(r.steps_honest),
                        fmt(r.speedup_honest),
                        r.error});
  }
}

void write_h3_rows_csv(const std::vector<H3Row>& rows, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"experiment", "n", "mu_fraction", "m", "mu", "trial", "gamma", "lambda_hat", "rho_in", "kappa",
                      "final_rho_out", "exit_T", "excess_risk_h3", "excess_risk_exact_retrain", "excess_risk_holdin",
                      "excess_risk_h3_01", "excess_risk_exact_retrain_01", "steps_exact", "steps_h3", "speedup",
                      "error"});
  for (const auto& r : rows) {
    write_csv_row(out, {"h3",
                        fmt(static_cast<std::int64_t>(r.n)),
                        fmt(r.mu_fraction),
                        fmt(static_cast<std::int64_t>(r.m)),
                        fmt(static_cast<std::int64_t>(r.mu)),
                        fmt(static_cast<std::int64_t>(r.trial)),
                        fmt(r.gamma),
                        fmt(static_cast<std::int64_t>(r.lambda_hat)),
                        fmt(r.rho_in),
                        fmt(r.kappa),
                        fmt(r.final_rho_out),
                        fmt(static_cast<std::int64_t>(r.exit_T)),
                        fmt(r.excess_risk_h3),
                        fmt(r.excess_risk_exact_retrain),
                        fmt(r.excess_risk_holdin),
                        fmt(r.excess_risk_h3_01),
                        fmt(r.excess_risk_exact_retrain_01),
                        fmt(r.steps_exact),
                        fmt(r.steps_h3),
                        fmt(r.speedup),
                        r.error});
  }
}

void write_h3_trace_rows_csv(const std::vector<H3TraceRow>& rows, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"n", "mu_fraction", "trial", "gamma", "T", "rho_out", "improvement_I", "gamma_value", "decision"});
  for (const auto& r : rows) {
    write_csv_row(out, {fmt(static_cast<std::int64_t>(r.n)), fmt(r.mu_fraction), fmt(static_cast<std::int64_t>(r.trial)),
                        fmt(r.gamma), fmt(static_cast<std::int64_t>(r.step.iteration)), fmt(r.step.rho_out),
                        fmt(r.improvement_I), fmt(r.step.gamma_value), to_string(r.step.decision)});
  }
}

}  // namespace hpoerm

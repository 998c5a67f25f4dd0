// Acceptance runner. Each criterion prints one PASS/FAIL line (plus a few
// informational lines) and the process exits non-zero if any selected
// criterion fails.
//
//   acceptance --criterion 6 --threads 2
//   acceptance              (all criteria)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "CLI11.hpp"
#include "hpoerm/csv.hpp"
#include "hpoerm/experiment.hpp"
#include "hpoerm/heuristics.hpp"
#include "hpoerm/random.hpp"
#include "hpoerm/report.hpp"
#include "hpoerm/trainer.hpp"

using namespace hpoerm;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

unsigned g_threads = 1;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

void info(int criterion, const std::string& text) { std::cout << "  [c" << criterion << "] " << text << '\n'; }

double mean_of(const std::vector<double>& v) { return summarize(v).mean; }

// ---- 1: formula oracle -------------------------------------------------------

Big big_conc(double b, std::size_t l, int offset, double delta) {
  return Big(b) * sqrt(Big(2) * log(Big(2) * Big(l + offset) / Big(delta)));
}

Verdict criterion1() {
  auto h1 = [](double b, std::size_t l, double delta, std::size_t n) {
    return static_cast<double>(Big(2) * Big(b) * sqrt(Big(2) * log(Big(2) * Big(l + 2) / Big(delta)) / Big(n)));
  };
  auto h2 = [](double g, double b, std::size_t l, double delta, std::size_t m, std::size_t mu) {
    return static_cast<double>(Big(g) * big_conc(b, l, 1, delta) * (Big(2) / sqrt(Big(m)) + Big(1) / sqrt(Big(mu))));
  };
  auto kappa = [](double rho, double b, std::size_t l, double delta, std::size_t n, std::size_t m, std::size_t mu) {
    return static_cast<double>(Big(rho) + big_conc(b, l, 2, delta) * (Big(2) / sqrt(Big(n)) + Big(2) / sqrt(Big(m)) +
                                                                       Big(1) / sqrt(Big(mu))));
  };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };

  double worst = 0.0;
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const double b = 0.1 + 10.0 * rng.uniform01();
    const std::size_t l = 1 + rng.below(100);
    const double delta = 0.001 + 0.5 * rng.uniform01();
    const std::size_t n = 2 + rng.below(100000);
    const std::size_t mu = 1 + rng.below(n - 1);
    const std::size_t m = n - mu;
    const double g = 10.0 * rng.uniform01();
    const double rho = rng.uniform01();
    worst = std::max(worst, rel(h1_threshold(b, l, delta, n), h1(b, l, delta, n)));
    worst = std::max(worst, rel(h2_rho_in(g, b, l, delta, m, mu), h2(g, b, l, delta, m, mu)));
    worst = std::max(worst, rel(h3_kappa(rho, b, l, delta, n, m, mu), kappa(rho, b, l, delta, n, m, mu)));
  }
  const double v1 = h1_threshold(1.0, 36, 0.05, 1024);
  const double v2 = h2_rho_in(0.1, 1.0, 36, 0.05, 922, 102);
  const double v3 = h3_kappa(0.063, 1.0, 36, 0.05, 1024, 922, 102);
  worst = std::max({worst, rel(v1, h1(1.0, 36, 0.05, 1024)), rel(v2, h2(0.1, 1.0, 36, 0.05, 922, 102)),
                    rel(v3, kappa(0.063, 1.0, 36, 0.05, 1024, 922, 102))});
  const bool worked = std::abs(v1 - 0.23924) < 5e-6 && std::abs(v2 - 0.06300) < 5e-6 && std::abs(v3 - 0.9334) < 5e-5;
  info(1, "worked values " + fmt(v1, 10) + " " + fmt(v2, 10) + " " + fmt(v3, 10));
  return {worst <= 1e-12 && worked, "max relative error " + fmt(worst, 3) + " over 100 draws"};
}

// ---- 2: tolerance contract ---------------------------------------------------

Verdict criterion2() {
  const HpGrid grid = HpGrid::grid36();
  const LossSpec loss = LossSpec::clipped_logistic();
  TrainBudget budget;
  Rng rng(77);
  int violations = 0, cases = 0;
  for (int c = 0; c < 50; ++c) {
    DataSpec spec;
    spec.seed = rng.next_u64();
    const std::size_t n = 200 + rng.below(400);
    const Dataset d = generate(spec, n, rng.next_u64());
    const HyperParams hp = grid.configs[rng.below(grid.size())];
    const std::uint64_t seed = rng.next_u64();
    const double rho = std::pow(10.0, -4.0 + 4.0 * rng.uniform01());
    const TrainResult exact = exact_erm(d, hp, loss, budget, seed);
    // rho and its neighbours, in increasing order
    std::int64_t prev_steps = std::numeric_limits<std::int64_t>::max();
    for (const double f : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double r = f * rho;
      const TrainResult a = approx_erm(d, hp, loss, r, exact.achieved_risk, budget, seed);
      if (!(a.achieved_risk <= exact.achieved_risk + r)) ++violations;
      if (a.steps_used > prev_steps) ++violations;
      prev_steps = a.steps_used;
    }
    ++cases;
  }
  return {violations == 0, std::to_string(cases) + " cases, " + std::to_string(violations) + " violations"};
}

// ---- 3: I(0,0) on a convex class ----------------------------------------------

Verdict criterion3() {
  ExperimentPlan p;
  p.n_values = {512, 1024};
  p.mu_fractions = {0.3};
  p.trials = 10;
  p.grid_configs.clear();
  for (const double lr : {0.01, 0.1})
    for (const int b : {8, 32, 128}) p.grid_configs.push_back({0, 0, lr, b});
  p.rho_in_values = {0.0};
  p.rho_out_factors = {0.0};
  p.base_seed = 303;
  p.threads = g_threads;
  const auto rows = run_choice_experiment(p);
  double lowest = INFINITY;
  int bad = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++bad;
      continue;
    }
    lowest = std::min(lowest, r.improvement_I);
    if (!(r.improvement_I >= -1e-4)) ++bad;
  }
  return {bad == 0 && rows.size() == 20,
          std::to_string(rows.size()) + " instances, min I = " + fmt(lowest, 3) + ", " + std::to_string(bad) +
              " below -1e-4"};
}

// ---- 4: telescoping over experiment rows ---------------------------------------

Verdict criterion4() {
  ExperimentPlan p;
  p.n_values = {512, 1024};
  p.mu_fractions = {0.1, 0.5};
  p.trials = 2;
  p.grid_name = "grid18";
  p.base_seed = 404;
  p.threads = g_threads;
  double worst = 0.0;
  std::size_t checked = 0;
  auto check = [&](const std::vector<ExperimentRow>& rows) {
    for (const auto& r : rows) {
      if (!r.error.empty()) continue;
      worst = std::max(worst, std::abs(r.e_mcm_hat + r.excess_risk_oracle - r.excess_risk_holdin));
      ++checked;
    }
  };
  check(run_choice_experiment(p));
  p.rho_mode = RhoMode::h2_driven;
  p.honest_speedup = false;
  check(run_tolerance_experiment(p));
  return {checked > 0 && worst <= 1e-12, std::to_string(checked) + " rows, max deviation " + fmt(worst, 3)};
}

// ---- 5: choice rule against both fixed policies --------------------------------

Verdict criterion5() {
  ExperimentPlan p;
  p.n_values = {512, 1024, 2048, 4096};
  p.mu_fractions = {0.1, 0.3, 0.5};
  p.trials = 10;
  p.grid_name = "grid18";
  p.rho_in_values = {1e-4, 1e-3, 1e-2, 1e-1};
  p.rho_out_factors = {1.0, 10.0};
  p.base_seed = 505;
  p.threads = g_threads;
  const auto rows = run_choice_experiment(p);

  struct Cell {
    std::vector<double> choice, retrain, never;
  };
  std::map<std::tuple<std::size_t, double, double, double>, Cell> cells;
  int errors = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    auto& c = cells[{r.n, r.mu_fraction, r.rho_in, r.rho_out}];
    c.choice.push_back(r.excess_risk_choice);
    c.retrain.push_back(r.excess_risk_retrained);
    c.never.push_back(r.excess_risk_holdin);
  }
  int good = 0, retrain_best = 0, never_best = 0;
  for (const auto& [key, c] : cells) {
    const Summary s = summarize(c.choice);
    const double a = mean_of(c.retrain), b = mean_of(c.never);
    good += s.mean <= std::min(a, b) + s.std_error;
    retrain_best += a < b;
    never_best += b <= a;
  }
  const double share = cells.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(cells.size());
  info(5, "always-retrain better in " + std::to_string(retrain_best) + " cells, never-retrain in " +
              std::to_string(never_best));
  return {share >= 0.7 && errors == 0, std::to_string(good) + "/" + std::to_string(cells.size()) +
                                           " cells within one standard error (" + fmt(100.0 * share, 3) + "%), " +
                                           std::to_string(errors) + " error rows"};
}

// ---- 6: inner-tolerance speedup ----------------------------------------------

Verdict criterion6() {
  ExperimentPlan p;
  p.n_values = {4096};
  p.mu_fractions = {0.1};
  p.trials = 10;
  p.grid_name = "grid36";
  p.gamma_values = {0.1, 1.0};
  p.rho_mode = RhoMode::h2_driven;
  p.honest_speedup = false;
  p.base_seed = 606;
  p.threads = g_threads;
  const auto rows = run_tolerance_experiment(p);
  std::map<double, std::vector<double>> speed, approx, exact, approx01, exact01;
  int errors = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    speed[r.gamma].push_back(r.speedup);
    approx[r.gamma].push_back(r.excess_risk_holdin);
    exact[r.gamma].push_back(r.excess_risk_exact);
    approx01[r.gamma].push_back(r.excess_risk_holdin_01);
    exact01[r.gamma].push_back(r.excess_risk_exact_01);
  }
  const double s01 = mean_of(speed[0.1]), s1 = mean_of(speed[1.0]);
  const double ratio = mean_of(approx[0.1]) / mean_of(exact[0.1]);
  info(6, "gamma 0.1: speedup " + fmt(s01) + ", excess " + fmt(mean_of(approx[0.1])) + " vs exact " +
              fmt(mean_of(exact[0.1])));
  info(6, "gamma 1: speedup " + fmt(s1) + ", excess " + fmt(mean_of(approx[1.0])));
  info(6, "zero-one excess: gamma 0.1 " + fmt(mean_of(approx01[0.1])) + ", gamma 1 " + fmt(mean_of(approx01[1.0])) +
              ", exact " + fmt(mean_of(exact01[0.1])));
  const bool pass = errors == 0 && s01 >= 1.5 && ratio <= 1.1 && s1 >= 3.0;
  return {pass, "speedup(0.1) " + fmt(s01) + " >= 1.5, risk ratio " + fmt(ratio) + " <= 1.1, speedup(1) " + fmt(s1) +
                    " >= 3, " + std::to_string(errors) + " error rows"};
}

// ---- 7: outer-tolerance controller -------------------------------------------

Verdict criterion7() {
  bool traces_ok = true;
  {
    const H3Run r = h3_run(0.1, 0.5, 0.5, 0.1, {0.5, 0.3, 0.29});
    traces_ok = traces_ok && r.state.terminated && r.trace.back().iteration == 2 && r.state.final_rho_out == 0.05 &&
                r.trace[0].rho_out == 0.1 && r.trace[1].rho_out == 0.05 && r.trace[2].rho_out == 0.025;
    const H3Run c = h3_run(0.1, 0.5, 0.5, 0.1, {0.4, 0.4});
    traces_ok = traces_ok && c.state.terminated && c.trace.back().iteration == 1 && c.state.final_rho_out == 0.1;
    const H3Run g = h3_run(1.0, 1.0, 0.5, 0.1, {1.0, 0.5, 0.25, 0.125, 0.0625});
    traces_ok = traces_ok && g.state.terminated && g.trace.back().iteration == 4 && g.state.final_rho_out == 0.125;
  }
  info(7, std::string("injected traces ") + (traces_ok ? "reproduced" : "MISMATCH"));

  ExperimentPlan p;
  p.n_values = {4096};
  p.mu_fractions = {0.1};
  p.trials = 10;
  p.gamma_values = {0.005};
  p.rho_mode = RhoMode::h3_driven;
  p.base_seed = 707;
  p.threads = g_threads;
  const H3Result res = run_h3_experiment(p);
  std::vector<double> h3, exact, speed;
  int reduced = 0, errors = 0;
  for (const auto& r : res.rows) {
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    h3.push_back(r.excess_risk_h3);
    exact.push_back(r.excess_risk_exact_retrain);
    speed.push_back(r.speedup);
    reduced += r.final_rho_out < r.rho_in;
    info(7, "trial " + std::to_string(r.trial) + ": exit T " + std::to_string(r.exit_T) + ", rho_out " +
                fmt(r.final_rho_out) + " of rho_in " + fmt(r.rho_in) + ", excess " + fmt(r.excess_risk_h3) +
                " vs exact " + fmt(r.excess_risk_exact_retrain));
  }
  const double ratio = mean_of(h3) / mean_of(exact);
  const bool all_reduced = reduced == static_cast<int>(res.rows.size()) && errors == 0;
  info(7, "mean speedup " + fmt(mean_of(speed)));
  return {traces_ok && all_reduced && ratio <= 1.15,
          "traces " + std::string(traces_ok ? "ok" : "wrong") + ", rho_out < rho_in in " + std::to_string(reduced) +
              "/" + std::to_string(res.rows.size()) + " trials, risk ratio " + fmt(ratio) + " <= 1.15"};
}

// ---- 8: determinism across thread counts --------------------------------------

Verdict criterion8() {
  ExperimentPlan p;
  p.n_values = {256, 512};
  p.mu_fractions = {0.1, 0.5};
  p.trials = 2;
  p.grid_name = "grid18";
  p.rho_in_values = {1e-3, 1e-1};
  p.rho_out_factors = {1.0, 10.0};
  p.test_count = 10000;
  p.budget.max_epochs = 8;
  p.base_seed = 808;

  auto all_csv = [](ExperimentPlan q) {
    std::ostringstream out;
    q.rho_mode = RhoMode::fixed;
    write_rows_csv(run_choice_experiment(q), out);
    q.rho_mode = RhoMode::h2_driven;
    write_rows_csv(run_tolerance_experiment(q), out);
    q.rho_mode = RhoMode::h3_driven;
    const H3Result h = run_h3_experiment(q);
    write_h3_rows_csv(h.rows, out);
    write_h3_trace_rows_csv(h.trace, out);
    return out.str();
  };
  p.threads = 1;
  const std::string a = all_csv(p);
  const std::string b = all_csv(p);
  p.threads = std::max(4u, g_threads);
  const std::string c = all_csv(p);
  return {a == b && a == c, "three runs (threads 1, 1, " + std::to_string(p.threads) + "), " +
                                std::to_string(a.size()) + " bytes, " + (a == b && a == c ? "identical" : "DIFFERENT")};
}

// ---- 9: gradient check ----------------------------------------------------------

Verdict criterion9() {
  Rng rng(909);
  const LossSpec loss = LossSpec::clipped_logistic();
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int d = 2 + static_cast<int>(rng.below(7));
    HyperParams hp{static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(9)), 0.1, 8};
    DataSpec spec;
    spec.n_features = d;
    spec.n_informative = std::max(1, d / 2);
    spec.seed = rng.next_u64();
    const Dataset data = generate(spec, 30, rng.next_u64());
    std::vector<double> params(Model::parameter_count(hp, d));
    for (auto& v : params) v = 0.5 * rng.normal();
    Model model(hp, d, std::move(params));
    std::vector<double> grad(model.parameters().size());
    model.loss_and_gradient(data.features, data.labels, loss, grad);
    double diff = 0.0, norm_fd = 0.0, norm_an = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double keep = model.parameters()[i];
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      model.parameters()[i] = keep + h;
      const double up = empirical_risk(model, data, loss);
      model.parameters()[i] = keep - h;
      const double down = empirical_risk(model, data, loss);
      model.parameters()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      diff += (fd - grad[i]) * (fd - grad[i]);
      norm_fd += fd * fd;
      norm_an += grad[i] * grad[i];
    }
    const double scale = std::max(std::sqrt(norm_fd), std::sqrt(norm_an));
    worst = std::max(worst, scale > 0.0 ? std::sqrt(diff) / scale : std::sqrt(diff));
  }
  return {worst <= 1e-4, "20 models, worst relative gradient error " + fmt(worst, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--threads", g_threads, "worker threads for experiment runs");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::function<Verdict()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                  criterion6, criterion7, criterion8, criterion9};
  bool ok = true;
  for (const int c : selected) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = all[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << c << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "  (" << fmt(secs, 3)
              << " s)" << std::endl;
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}

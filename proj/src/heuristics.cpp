#include "hpoerm/heuristics.hpp"

#include <cmath>
#include <ostream>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"

namespace hpoerm {

namespace {

void check_common(double bound, std::size_t grid_size, double delta) {
  if (!(bound > 0.0) || !std::isfinite(bound)) throw ConfigError("loss bound B must be positive");
  if (grid_size < 1) throw ConfigError("grid size L must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
}

void check_count(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string(name) + " must be positive");
}

double concentration(double bound, std::size_t grid_size, std::size_t offset, double delta) {
  return bound * std::sqrt(2.0 * std::log(2.0 * static_cast<double>(grid_size + offset) / delta));
}

double inv_sqrt(std::size_t v) { return 1.0 / std::sqrt(static_cast<double>(v)); }

}  // namespace

void HeuristicParams::validate() const {
  check_common(bound, grid_size, delta);
  check_count(n, "n");
  check_count(m, "m");
  check_count(mu, "mu");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be non-negative");
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must be in (0, 1)");
}

double h1_threshold(double bound, std::size_t grid_size, double delta, std::size_t n) {
  check_common(bound, grid_size, delta);
  check_count(n, "n");
  return 2.0 * bound *
         std::sqrt(2.0 * std::log(2.0 * static_cast<double>(grid_size + 2) / delta) / static_cast<double>(n));
}

const char* to_string(ModelChoice choice) { return choice == ModelChoice::retrained ? "retrained" : "hold_in"; }

ModelChoice h1_choose(double improvement, double threshold) {
  return improvement > threshold ? ModelChoice::retrained : ModelChoice::hold_in;
}

double h2_rho_in(double gamma, double bound, std::size_t grid_size, double delta, std::size_t m, std::size_t mu) {
  check_common(bound, grid_size, delta);
  check_count(m, "m");
  check_count(mu, "mu");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be non-negative");
  return gamma * concentration(bound, grid_size, 1, delta) * (2.0 * inv_sqrt(m) + inv_sqrt(mu));
}

double h3_kappa(double rho_in, double bound, std::size_t grid_size, double delta, std::size_t n, std::size_t m,
                std::size_t mu) {
  check_common(bound, grid_size, delta);
  check_count(n, "n");
  check_count(m, "m");
  check_count(mu, "mu");
  if (!(rho_in >= 0.0)) throw ConfigError("rho_in must be non-negative");
  return rho_in + concentration(bound, grid_size, 2, delta) * (2.0 * inv_sqrt(n) + 2.0 * inv_sqrt(m) + inv_sqrt(mu));
}

H3State h3_start(double rho_in, double kappa, double nu) {
  if (!(rho_in > 0.0) || !std::isfinite(rho_in)) throw ConfigError("h3: rho_in must be positive");
  if (!(kappa > 0.0)) throw ConfigError("h3: kappa must be positive");
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("h3: nu must be in (0, 1)");
  H3State s;
  s.current_rho_out = rho_in;
  s.kappa = kappa;
  s.nu = nu;
  return s;
}

const char* to_string(H3Decision decision) {
  switch (decision) {
    case H3Decision::bootstrap:
      return "bootstrap";
    case H3Decision::reduce:
      return "reduce";
    case H3Decision::exit:
      return "exit";
  }
  return "?";
}

H3State h3_step(const H3State& state, double gamma_current, double gamma_h3, H3Trace* trace) {
  if (state.terminated) throw StateError("h3_step called after termination");
  if (!(gamma_h3 > 0.0)) throw ConfigError("h3: gamma must be positive");
  H3State next = state;
  H3Decision decision = H3Decision::bootstrap;
  if (state.previous_gamma_value &&
      !(*state.previous_gamma_value - gamma_current > gamma_h3 * state.kappa)) {
    decision = H3Decision::exit;
    next.terminated = true;
    next.final_rho_out = *state.previous_rho_out;
  } else {
    decision = state.previous_gamma_value ? H3Decision::reduce : H3Decision::bootstrap;
    next.previous_gamma_value = gamma_current;
    next.previous_rho_out = state.current_rho_out;
    next.current_rho_out = state.nu * state.current_rho_out;
    next.iteration = state.iteration + 1;
  }
  if (trace) *trace = H3Trace{state.iteration, state.current_rho_out, gamma_current, decision};
  return next;
}

H3Run h3_run(double rho_in, double kappa, double nu, double gamma_h3, const std::vector<double>& gamma_values) {
  H3Run run{h3_start(rho_in, kappa, nu), {}};
  for (const double g : gamma_values) {
    H3Trace t;
    run.state = h3_step(run.state, g, gamma_h3, &t);
    run.trace.push_back(t);
    if (run.state.terminated) break;
  }
  return run;
}

void write_h3_trace_csv(const std::vector<H3Trace>& trace, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"T", "rho_out", "gamma_value", "decision"});
  for (const auto& t : trace) {
    write_csv_row(out, {std::to_string(t.iteration), format_double(t.rho_out), format_double(t.gamma_value),
                        to_string(t.decision)});
  }
}

}  // namespace hpoerm

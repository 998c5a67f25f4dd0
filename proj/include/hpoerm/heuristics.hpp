#pragma once

// Data-driven rules for choosing between the hold-in and retrained models and
// for setting the inner and outer ERM tolerances. All logarithms are natural.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hpoerm {

struct HeuristicParams {
  double bound = 1.0;  // loss bound B
  std::size_t grid_size = 1;  // L = |grid|
  double delta = 0.05;
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t mu = 1;
  double gamma = 0.1;
  double nu = 0.5;

  void validate() const;
};

// 2 B sqrt(2 log(2 (L + 2) / delta) / n).
double h1_threshold(double bound, std::size_t grid_size, double delta, std::size_t n);

enum class ModelChoice { retrained, hold_in };

const char* to_string(ModelChoice choice);

// Retrained iff the improvement strictly exceeds the threshold.
ModelChoice h1_choose(double improvement, double threshold);

// gamma B sqrt(2 log(2 (L + 1) / delta)) (2 / sqrt(m) + 1 / sqrt(mu)).
double h2_rho_in(double gamma, double bound, std::size_t grid_size, double delta, std::size_t m, std::size_t mu);

// rho_in + B sqrt(2 log(2 (L + 2) / delta)) (2 / sqrt(n) + 2 / sqrt(m) + 1 / sqrt(mu)).
double h3_kappa(double rho_in, double bound, std::size_t grid_size, double delta, std::size_t n, std::size_t m,
                std::size_t mu);

// Outer-tolerance controller. Starting at rho_in, the tolerance shrinks by nu
// while the improvement gained by the last reduction exceeds gamma * kappa.
// The first evaluation only records its value and reduces unconditionally,
// since a comparison needs two levels. On exit, the level before the last
// (unprofitable) reduction is the selected outer tolerance.
struct H3State {
  double current_rho_out = 0.0;  // rho^(T), the level evaluated next
  std::optional<double> previous_gamma_value;  // Gamma(rho^(T-1))
  std::optional<double> previous_rho_out;      // rho^(T-1)
  int iteration = 0;
  double kappa = 0.0;
  double nu = 0.5;
  bool terminated = false;
  double final_rho_out = 0.0;  // valid once terminated
};

H3State h3_start(double rho_in, double kappa, double nu);

enum class H3Decision { bootstrap, reduce, exit };

const char* to_string(H3Decision decision);

struct H3Trace {
  int iteration = 0;
  double rho_out = 0.0;
  double gamma_value = 0.0;
  H3Decision decision = H3Decision::bootstrap;
};

// Consumes Gamma(rho^(T)). Throws StateError once terminated.
H3State h3_step(const H3State& state, double gamma_current, double gamma_h3, H3Trace* trace = nullptr);

// Runs the controller over a precomputed sequence of Gamma values, one per
// level. Stops at termination or when the values run out.
struct H3Run {
  H3State state;
  std::vector<H3Trace> trace;
};

H3Run h3_run(double rho_in, double kappa, double nu, double gamma_h3, const std::vector<double>& gamma_values);

// Columns T,rho_out,gamma_value,decision.
void write_h3_trace_csv(const std::vector<H3Trace>& trace, std::ostream& out);

}  // namespace hpoerm

#pragma once

// SGD-based empirical risk minimization with restarts.
//
// A training run is a fixed sequence of restarts. Restart r starts from
// init_model(hp, d, derive_seed(seed, {1, r})) and shuffles epoch e with
// derive_seed(seed, {2, r, e}); every mini-batch is one step. The empirical
// risk of the current model is evaluated every `checkpoint_every` steps of a
// restart (default: one epoch) and at the end of a restart. A restart ends
// after max_epochs or when its best checkpoint risk has not improved by at
// least plateau_min_improvement for plateau_patience checkpoints.
//
// exact_erm runs every restart to completion and returns the best checkpoint;
// its risk is the reference minimum. approx_erm replays the same sequence and
// stops at the first checkpoint within rho of a reference minimum, so with
// identical seeds it visits a prefix of the exact run.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hpoerm/model.hpp"
#include "hpoerm/synth_data.hpp"
#include "json.hpp"

namespace hpoerm {

struct TrainBudget {
  int max_epochs = 20;
  int restarts = 5;
  std::optional<std::int64_t> checkpoint_every;  // steps within a restart; unset = one epoch
  int plateau_patience = 10;
  double plateau_min_improvement = 1e-6;
  // Extra checkpoints at restart steps 1, 2, ..., 8, 10, 12, 15, ... (each
  // about a quarter past the last) below the interval, so tolerances met
  // within the first interval are told apart.
  bool warmup_checkpoints = false;

  void validate() const;
  std::int64_t checkpoint_interval(std::size_t train_count, int batch_size) const;
};

enum class StopReason { tolerance, budget, plateau };

const char* to_string(StopReason reason);

struct Checkpoint {
  std::int64_t step = 0;  // cumulative over restarts
  double empirical_risk = 0.0;
};

struct TrainResult {
  Model model;
  double achieved_risk = 0.0;
  std::int64_t steps_used = 0;
  std::vector<Checkpoint> trajectory;
  StopReason stopped_by = StopReason::budget;
};

TrainResult exact_erm(const Dataset& train, const HyperParams& hp, const LossSpec& loss,
                      const TrainBudget& budget, std::uint64_t seed);

// rho == 0 requests exact ERM and returns exact_erm's result, steps included.
// Throws ConfigError when rho is negative or NaN. rho may be +infinity.
TrainResult approx_erm(const Dataset& train, const HyperParams& hp, const LossSpec& loss, double rho,
                       double reference_min, const TrainBudget& budget, std::uint64_t seed);

struct ScheduleSnapshot {
  double rho = 0.0;
  TrainResult result;
};

// One run emitting a snapshot the first time each tolerance level is met.
// Levels never met, and a final level of 0, take the best model of the whole run.
std::vector<ScheduleSnapshot> erm_with_schedule(const Dataset& train, const HyperParams& hp, const LossSpec& loss,
                                                double reference_min, std::span<const double> schedule,
                                                const TrainBudget& budget, std::uint64_t seed);

// exact_erm plus, for every rho, the result approx_erm(rho, exact.achieved_risk)
// would return with the same seed; computed in a single pass.
struct ToleranceSweep {
  TrainResult exact;
  std::vector<TrainResult> approx;
};

ToleranceSweep tolerance_sweep(const Dataset& train, const HyperParams& hp, const LossSpec& loss,
                               std::span<const double> rhos, const TrainBudget& budget, std::uint64_t seed);

// Reference-free variant: a restart ends once its risk dropped by at most rho
// over the last plateau_patience checkpoints. Returns the best checkpoint.
TrainResult approx_erm_online(const Dataset& train, const HyperParams& hp, const LossSpec& loss, double rho,
                              const TrainBudget& budget, std::uint64_t seed);

void write_trajectory_csv(const TrainResult& result, std::ostream& out);

void to_json(nlohmann::json& j, const TrainBudget& budget);
void from_json(const nlohmann::json& j, TrainBudget& budget);

}  // namespace hpoerm

#include "hpoerm/trainer.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/random.hpp"

namespace hpoerm {

namespace {

constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kShuffleTag = 2;

enum class Verdict { keep_going, end_restart, stop };

struct CheckpointEvent {
  int restart = 0;
  std::int64_t step = 0;
  double risk = 0.0;
  std::size_t trajectory_size = 0;  // including this checkpoint
};

struct RunLog {
  std::int64_t steps = 0;
  std::vector<Checkpoint> trajectory;
  std::vector<StopReason> restart_end;
  bool stopped = false;
};

// Drives the restart sequence and reports every checkpoint to `on_checkpoint`,
// which returns whether to continue, end the current restart, or stop.
template <class OnCheckpoint>
RunLog run_sgd(const Dataset& train, const HyperParams& hp, const LossSpec& loss, const TrainBudget& budget,
               std::uint64_t seed, OnCheckpoint&& on_checkpoint) {
  budget.validate();
  hp.validate();
  loss.validate();
  if (loss.kind != LossKind::clipped_logistic) throw ConfigError("training requires a differentiable loss");
  if (train.count() < static_cast<std::size_t>(hp.batch_size)) {
    throw SizeError("training set of " + std::to_string(train.count()) + " rows is smaller than batch size " +
                    std::to_string(hp.batch_size));
  }

  const auto n = train.count();
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  const std::int64_t interval = budget.checkpoint_interval(n, hp.batch_size);
  const int d = static_cast<int>(train.n_features());

  RunLog log;
  Workspace ws;
  Matrix batch_x(static_cast<Eigen::Index>(batch), d);
  Vector batch_y(static_cast<Eigen::Index>(batch));

  for (int r = 0; r < budget.restarts; ++r) {
    Model model = init_model(hp, d, derive_seed(seed, {kInitTag, static_cast<std::uint64_t>(r)}));
    std::vector<double> grad(model.parameters().size());
    std::int64_t restart_steps = 0;
    std::int64_t last_checkpoint = 0;
    std::int64_t next_warmup = 1;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    StopReason ended = StopReason::budget;
    bool restart_over = false;

    // Warm-up checkpoints are reported but leave the plateau rule alone, so
    // a restart ends exactly where it would without them.
    auto checkpoint = [&](bool regular) -> Verdict {
      last_checkpoint = restart_steps;
      const double risk = empirical_risk(model, train, loss);
      if (!std::isfinite(risk)) {
        throw NumericError("non-finite empirical risk for " + hp.label() + " at restart " + std::to_string(r) +
                           ", step " + std::to_string(log.steps));
      }
      log.trajectory.push_back({log.steps, risk});
      const Verdict v = on_checkpoint(CheckpointEvent{r, log.steps, risk, log.trajectory.size()}, model);
      if (!regular) {
        if (v == Verdict::end_restart) ended = StopReason::tolerance;
        return v;
      }
      if (risk < best - budget.plateau_min_improvement) {
        best = risk;
        stale = 0;
      } else if (++stale >= budget.plateau_patience) {
        ended = StopReason::plateau;
        return v == Verdict::stop ? Verdict::stop : Verdict::end_restart;
      }
      if (v == Verdict::end_restart) ended = StopReason::tolerance;
      return v;
    };

    for (int epoch = 0; epoch < budget.max_epochs && !restart_over; ++epoch) {
      Rng rng(derive_seed(seed, {kShuffleTag, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(epoch)}));
      const auto perm = random_permutation(n, rng);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t rows = std::min(batch, n - start);
        if (static_cast<Eigen::Index>(rows) != batch_x.rows()) {
          batch_x.resize(static_cast<Eigen::Index>(rows), d);
          batch_y.resize(static_cast<Eigen::Index>(rows));
        }
        for (std::size_t i = 0; i < rows; ++i) {
          const auto src = static_cast<Eigen::Index>(perm[start + i]);
          batch_x.row(static_cast<Eigen::Index>(i)) = train.features.row(src);
          batch_y[static_cast<Eigen::Index>(i)] = train.labels[src];
        }
        model.loss_and_gradient(batch_x, batch_y, loss, grad, ws);
        auto params = model.parameters();
        for (std::size_t k = 0; k < params.size(); ++k) params[k] -= hp.learning_rate * grad[k];
        ++log.steps;
        ++restart_steps;
        // Warm-up checkpoints grow by about a quarter: 1..8, 10, 12, 15, 18, ...
        const bool warmup = budget.warmup_checkpoints && restart_steps < interval && restart_steps == next_warmup;
        if (warmup) next_warmup += std::max<std::int64_t>(1, next_warmup / 4);
        if (restart_steps % interval == 0 || warmup) {
          const Verdict v = checkpoint(!warmup);
          if (v == Verdict::stop) {
            log.restart_end.push_back(StopReason::tolerance);
            log.stopped = true;
            return log;
          }
          if (v == Verdict::end_restart) {
            restart_over = true;
            break;
          }
        }
      }
      if (batch_x.rows() != static_cast<Eigen::Index>(batch)) {
        batch_x.resize(static_cast<Eigen::Index>(batch), d);
        batch_y.resize(static_cast<Eigen::Index>(batch));
      }
    }
    if (!restart_over && restart_steps != last_checkpoint) {
      const Verdict v = checkpoint(true);
      if (v == Verdict::stop) {
        log.restart_end.push_back(StopReason::tolerance);
        log.stopped = true;
        return log;
      }
    }
    log.restart_end.push_back(ended);
  }
  return log;
}

// Best checkpoint over a run; strict improvement keeps the first minimum.
struct BestTracker {
  double risk = std::numeric_limits<double>::infinity();
  Model model;
  std::int64_t step = 0;
  int restart = 0;
  std::size_t trajectory_size = 0;

  bool offer(const CheckpointEvent& e, const Model& m) {
    if (!(e.risk < risk)) return false;
    risk = e.risk;
    model = m;
    step = e.step;
    restart = e.restart;
    trajectory_size = e.trajectory_size;
    return true;
  }
};

TrainResult best_result(const BestTracker& best, const RunLog& log) {
  TrainResult out;
  out.model = best.model;
  out.achieved_risk = best.risk;
  out.steps_used = log.steps;
  out.trajectory = log.trajectory;
  out.stopped_by = log.restart_end.at(static_cast<std::size_t>(best.restart));
  return out;
}

TrainResult snapshot_result(const Model& model, const CheckpointEvent& e, const std::vector<Checkpoint>& trajectory) {
  TrainResult out;
  out.model = model;
  out.achieved_risk = e.risk;
  out.steps_used = e.step;
  out.trajectory.assign(trajectory.begin(), trajectory.begin() + static_cast<std::ptrdiff_t>(e.trajectory_size));
  out.stopped_by = StopReason::tolerance;
  return out;
}

void check_rho(double rho) {
  if (std::isnan(rho) || rho < 0.0) throw ConfigError("tolerance rho must be non-negative");
}

}  // namespace

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::tolerance:
      return "tolerance";
    case StopReason::budget:
      return "budget";
    case StopReason::plateau:
      return "plateau";
  }
  return "?";
}

void TrainBudget::validate() const {
  if (max_epochs < 1) throw ConfigError("TrainBudget: max_epochs must be >= 1");
  if (restarts < 1) throw ConfigError("TrainBudget: restarts must be >= 1");
  if (checkpoint_every && *checkpoint_every < 1) throw ConfigError("TrainBudget: checkpoint_every must be >= 1");
  if (plateau_patience < 1) throw ConfigError("TrainBudget: plateau_patience must be >= 1");
  if (!(plateau_min_improvement >= 0.0)) throw ConfigError("TrainBudget: plateau_min_improvement must be >= 0");
}

std::int64_t TrainBudget::checkpoint_interval(std::size_t train_count, int batch_size) const {
  if (checkpoint_every) return *checkpoint_every;
  const auto b = static_cast<std::size_t>(batch_size);
  return static_cast<std::int64_t>((train_count + b - 1) / b);
}

TrainResult exact_erm(const Dataset& train, const HyperParams& hp, const LossSpec& loss, const TrainBudget& budget,
                      std::uint64_t seed) {
  BestTracker best;
  const RunLog log = run_sgd(train, hp, loss, budget, seed, [&](const CheckpointEvent& e, const Model& m) {
    best.offer(e, m);
    return Verdict::keep_going;
  });
  return best_result(best, log);
}

TrainResult approx_erm(const Dataset& train, const HyperParams& hp, const LossSpec& loss, double rho,
                       double reference_min, const TrainBudget& budget, std::uint64_t seed) {
  check_rho(rho);
  if (rho == 0.0) return exact_erm(train, hp, loss, budget, seed);
  const double threshold = reference_min + rho;
  BestTracker best;
  std::optional<TrainResult> hit;
  const RunLog log = run_sgd(train, hp, loss, budget, seed, [&](const CheckpointEvent& e, const Model& m) {
    best.offer(e, m);
    if (e.risk <= threshold) {
      hit = TrainResult{m, e.risk, e.step, {}, StopReason::tolerance};
      return Verdict::stop;
    }
    return Verdict::keep_going;
  });
  if (hit) {
    hit->trajectory = log.trajectory;
    return std::move(*hit);
  }
  return best_result(best, log);
}

std::vector<ScheduleSnapshot> erm_with_schedule(const Dataset& train, const HyperParams& hp, const LossSpec& loss,
                                                double reference_min, std::span<const double> schedule,
                                                const TrainBudget& budget, std::uint64_t seed) {
  if (schedule.empty()) throw ConfigError("erm_with_schedule: empty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    check_rho(schedule[i]);
    if (i > 0 && !(schedule[i] < schedule[i - 1])) {
      throw ConfigError("erm_with_schedule: schedule must be strictly decreasing");
    }
  }
  std::vector<ScheduleSnapshot> out;
  BestTracker best;
  std::vector<CheckpointEvent> events;
  std::vector<Model> models;
  std::vector<std::size_t> level_event;
  const RunLog log = run_sgd(train, hp, loss, budget, seed, [&](const CheckpointEvent& e, const Model& m) {
    best.offer(e, m);
    const std::size_t before = level_event.size();
    while (level_event.size() < schedule.size() && schedule[level_event.size()] > 0.0 &&
           e.risk <= reference_min + schedule[level_event.size()]) {
      level_event.push_back(events.size());
    }
    if (level_event.size() != before) {
      events.push_back(e);
      models.push_back(m);
    }
    return level_event.size() == schedule.size() ? Verdict::stop : Verdict::keep_going;
  });

  for (std::size_t i = 0; i < level_event.size(); ++i) {
    const std::size_t k = level_event[i];
    out.push_back({schedule[i], snapshot_result(models[k], events[k], log.trajectory)});
  }
  for (std::size_t i = out.size(); i < schedule.size(); ++i) out.push_back({schedule[i], best_result(best, log)});
  return out;
}

ToleranceSweep tolerance_sweep(const Dataset& train, const HyperParams& hp, const LossSpec& loss,
                               std::span<const double> rhos, const TrainBudget& budget, std::uint64_t seed) {
  for (const double rho : rhos) check_rho(rho);
  // Every first crossing of a threshold is a new running minimum, so
  // snapshots at running minima suffice to answer every tolerance.
  struct Record {
    CheckpointEvent event;
    Model model;
  };
  std::vector<Record> records;
  BestTracker best;
  const RunLog log = run_sgd(train, hp, loss, budget, seed, [&](const CheckpointEvent& e, const Model& m) {
    if (best.offer(e, m)) records.push_back({e, m});
    return Verdict::keep_going;
  });

  ToleranceSweep out;
  out.exact = best_result(best, log);
  const double reference = out.exact.achieved_risk;
  for (const double rho : rhos) {
    if (rho == 0.0) {
      out.approx.push_back(out.exact);
      continue;
    }
    const double threshold = reference + rho;
    const Record* chosen = &records.back();
    for (const auto& rec : records) {
      if (rec.event.risk <= threshold) {
        chosen = &rec;
        break;
      }
    }
    out.approx.push_back(snapshot_result(chosen->model, chosen->event, log.trajectory));
  }
  return out;
}

TrainResult approx_erm_online(const Dataset& train, const HyperParams& hp, const LossSpec& loss, double rho,
                              const TrainBudget& budget, std::uint64_t seed) {
  check_rho(rho);
  BestTracker best;
  std::vector<double> window;
  int current_restart = -1;
  const auto patience = static_cast<std::size_t>(budget.plateau_patience);
  const RunLog log = run_sgd(train, hp, loss, budget, seed, [&](const CheckpointEvent& e, const Model& m) {
    best.offer(e, m);
    if (e.restart != current_restart) {
      current_restart = e.restart;
      window.clear();
    }
    window.push_back(e.risk);
    if (window.size() > patience && window[window.size() - 1 - patience] - e.risk <= rho) {
      return Verdict::end_restart;
    }
    return Verdict::keep_going;
  });
  return best_result(best, log);
}

void write_trajectory_csv(const TrainResult& result, std::ostream& out) {
  out << kSchemaLine << '\n';
  write_csv_row(out, {"step", "empirical_risk"});
  for (const auto& c : result.trajectory) write_csv_row(out, {std::to_string(c.step), format_double(c.empirical_risk)});
}

void to_json(nlohmann::json& j, const TrainBudget& budget) {
  j = nlohmann::json{{"max_epochs", budget.max_epochs},
                     {"restarts", budget.restarts},
                     {"plateau_patience", budget.plateau_patience},
                     {"plateau_min_improvement", budget.plateau_min_improvement},
                     {"warmup_checkpoints", budget.warmup_checkpoints}};
  j["checkpoint_every"] = budget.checkpoint_every ? nlohmann::json(*budget.checkpoint_every) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TrainBudget& budget) {
  const TrainBudget defaults;
  budget.max_epochs = j.value("max_epochs", defaults.max_epochs);
  budget.restarts = j.value("restarts", defaults.restarts);
  budget.plateau_patience = j.value("plateau_patience", defaults.plateau_patience);
  budget.plateau_min_improvement = j.value("plateau_min_improvement", defaults.plateau_min_improvement);
  budget.warmup_checkpoints = j.value("warmup_checkpoints", defaults.warmup_checkpoints);
  budget.checkpoint_every.reset();
  if (j.contains("checkpoint_every") && !j.at("checkpoint_every").is_null()) {
    budget.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  }
  budget.validate();
}

}  // namespace hpoerm

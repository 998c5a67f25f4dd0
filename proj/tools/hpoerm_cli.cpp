// Command-line front end: data generation, single HPO runs, the three
// experiment families and report rendering.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/experiment.hpp"
#include "hpoerm/heuristics.hpp"
#include "hpoerm/hpo.hpp"
#include "hpoerm/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hpoerm;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "base seed, overrides the config");
  cmd->add_option("--out-dir", c.out_dir, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads, overrides the config");
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ExperimentPlan load_plan(const Common& c, RhoMode mode) {
  ExperimentPlan plan = load_json(c.config).get<ExperimentPlan>();
  if (c.seed) plan.base_seed = *c.seed;
  if (c.threads) plan.threads = *c.threads;
  plan.rho_mode = mode;
  plan.validate();
  return plan;
}

fs::path prepare_dir(const Common& c) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

void write_summary(const fs::path& rows_path, const fs::path& summary_path) {
  auto f = open_out(summary_path);
  write_aggregate_csv(aggregate(read_csv_file(rows_path.string())), f);
}

int count_errors(const std::vector<ExperimentRow>& rows) {
  int k = 0;
  for (const auto& r : rows) k += !r.error.empty();
  return k;
}

void run_gen_data(const Common& c) {
  const json cfg = load_json(c.config);
  const DataSpec spec = cfg.contains("data") ? cfg.at("data").get<DataSpec>() : DataSpec{};
  const json gen = cfg.value("gen", json::object());
  const auto count = gen.value("count", std::size_t{1000});
  const std::uint64_t seed = c.seed.value_or(gen.value("draw_seed", std::uint64_t{0}));
  const fs::path dir = prepare_dir(c);
  auto f = open_out(dir / "data.csv");
  f << kSchemaLine << '\n';
  write_csv(generate(spec, count, seed), f);
  write_json(dir / "data_spec.json", json{{"data", spec}, {"count", count}, {"draw_seed", seed}});
  std::cout << "wrote " << count << " rows to " << (dir / "data.csv").string() << '\n';
}

void run_single_hpo(const Common& c) {
  const json cfg = load_json(c.config);
  ExperimentPlan plan = cfg.get<ExperimentPlan>();
  if (c.seed) plan.base_seed = *c.seed;
  if (c.threads) plan.threads = *c.threads;
  plan.validate();
  const json h = cfg.value("hpo", json::object());
  const auto n = h.value("n", std::size_t{1024});
  const double fraction = h.value("mu_fraction", 0.1);
  const int trial = h.value("trial", 0);

  const InstanceSeeds seeds = instance_seeds(plan.base_seed, n, fraction, trial);
  const Dataset data = generate(plan.data, n, seeds.data);
  HpoConfig hc;
  hc.grid = plan.grid();
  hc.mu = validation_count(n, fraction);
  hc.m = n - hc.mu;
  hc.rho_in = h.value("rho_in", 0.0);
  hc.rho_out = h.value("rho_out", 0.0);
  hc.delta = plan.delta;
  hc.budget = plan.budget;
  hc.seeds = seeds.hpo;
  hc.threads = plan.threads;

  Selection sel;
  const HpoOutcome outcome = run_hpo(data, hc, plan.train_loss, &sel);
  const double threshold = h1_threshold(plan.train_loss.bound, hc.grid.size(), hc.delta, n);
  const ModelChoice choice = h1_choose(outcome.improvement_I, threshold);
  const RiskReport rep = risk_report(outcome, sel.runs, generate(plan.data, plan.test_count, seeds.test),
                                     plan.eval_loss);

  const fs::path dir = prepare_dir(c);
  json o = outcome;
  o["h1_threshold"] = threshold;
  o["choice"] = to_string(choice);
  o["m"] = hc.m;
  o["mu"] = hc.mu;
  o["seeds"] = hc.seeds;
  write_json(dir / "hpo_outcome.json", o);
  write_json(dir / "risk_report.json", rep);
  auto f = open_out(dir / "validation.csv");
  write_validation_csv(sel, f);
  std::cout << "lambda_hat " << outcome.lambda_hat.label() << "  I " << outcome.improvement_I << "  threshold "
            << threshold << "  choice " << to_string(choice) << '\n'
            << "true risk hold-in " << rep.true_risk_holdin.risk << "  retrained " << rep.true_risk_retrained.risk
            << "  oracle " << rep.lambda_bar.label() << " " << rep.true_risk_oracle_holdin.risk << '\n';
}

void finish_rows(const fs::path& dir, const std::string& name, const std::vector<ExperimentRow>& rows) {
  const fs::path rows_path = dir / (name + "_rows.csv");
  {
    auto f = open_out(rows_path);
    write_rows_csv(rows, f);
  }
  write_summary(rows_path, dir / (name + "_summary.csv"));
  const int errors = count_errors(rows);
  std::cout << "wrote " << rows.size() << " rows to " << rows_path.string();
  if (errors > 0) std::cout << " (" << errors << " with errors)";
  std::cout << '\n';
}

void run_choice(const Common& c) {
  const ExperimentPlan plan = load_plan(c, RhoMode::fixed);
  const fs::path dir = prepare_dir(c);
  write_json(dir / "choice_plan.json", plan);
  finish_rows(dir, "choice", run_choice_experiment(plan));
}

void run_tolerance(const Common& c) {
  const ExperimentPlan plan = load_plan(c, RhoMode::h2_driven);
  const fs::path dir = prepare_dir(c);
  write_json(dir / "tolerance_plan.json", plan);
  finish_rows(dir, "tolerance", run_tolerance_experiment(plan));
}

void run_h3(const Common& c) {
  const ExperimentPlan plan = load_plan(c, RhoMode::h3_driven);
  const fs::path dir = prepare_dir(c);
  write_json(dir / "h3_plan.json", plan);
  const H3Result res = run_h3_experiment(plan);
  const fs::path rows_path = dir / "h3_rows.csv";
  {
    auto f = open_out(rows_path);
    write_h3_rows_csv(res.rows, f);
  }
  {
    auto f = open_out(dir / "h3_trace.csv");
    write_h3_trace_rows_csv(res.trace, f);
  }
  write_summary(rows_path, dir / "h3_summary.csv");
  std::cout << "wrote " << res.rows.size() << " rows to " << rows_path.string() << '\n';
}

void run_report(const Common& c, std::vector<std::string> inputs) {
  const json cfg = load_json(c.config);
  if (cfg.contains("report")) {
    for (const auto& p : cfg.at("report").value("inputs", std::vector<std::string>{})) inputs.push_back(p);
  }
  const ReportOutput out = report(inputs, c.out_dir);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "experiment,cell,n,series,mean,stderr,count\n";
  for (const auto& r : out.table) {
    std::cout << r.experiment << ',' << r.cell << ',' << r.n << ',' << r.series << ',' << format_double(r.summary.mean)
              << ',' << format_double(r.summary.std_error) << ',' << r.summary.count << '\n';
  }
  std::cout << out.plot_files.size() << " plots in " << c.out_dir << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter optimization with approximate ERM"};
  app.require_subcommand(1);

  Common gen, hpo, choice, tol, h3, rep;
  std::vector<std::string> report_inputs;
  add_common(app.add_subcommand("gen-data", "draw a synthetic dataset"), gen);
  add_common(app.add_subcommand("hpo", "one HPO run with retraining and risk report"), hpo);
  add_common(app.add_subcommand("choice-exp", "retrain-or-not choice experiment"), choice);
  add_common(app.add_subcommand("tol-exp", "data-dependent inner tolerance experiment"), tol);
  add_common(app.add_subcommand("h3-exp", "outer tolerance controller experiment"), h3);
  auto* report_cmd = app.add_subcommand("report", "aggregate experiment CSVs and draw plots");
  add_common(report_cmd, rep);
  report_cmd->add_option("--inputs", report_inputs, "experiment CSV files")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-data")) run_gen_data(gen);
    if (app.got_subcommand("hpo")) run_single_hpo(hpo);
    if (app.got_subcommand("choice-exp")) run_choice(choice);
    if (app.got_subcommand("tol-exp")) run_tolerance(tol);
    if (app.got_subcommand("h3-exp")) run_h3(h3);
    if (app.got_subcommand("report")) run_report(rep, report_inputs);
  } catch (const ParseError& e) {
    std::cerr << "parse error at line " << e.line() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

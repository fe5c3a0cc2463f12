#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ctid/errors.hpp"
#include "ctid/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> runs;
  std::vector<std::string> rows;
};

ctid::ExperimentConfig load(const Options& o) {
  ctid::ExperimentConfig c;
  if (!o.config.empty()) {
    c = ctid::load_experiment(o.config);
    if (!o.scenario.empty()) throw ctid::ConfigError("--scenario", "use either --config or --scenario");
  } else {
    c = ctid::builtin_experiment(o.scenario.empty() ? "section5" : o.scenario);
  }
  if (o.seed) c.set_seed(*o.seed);
  if (o.runs) c.monte_carlo_runs = *o.runs;
  c.validate();
  return c;
}

json summary(const json& metrics) {
  json s = metrics;
  s.erase("snapshots");
  return s;
}

int simulate_cmd(const Options& o) {
  const ctid::ExperimentConfig c = load(o);
  const ctid::Record rec = ctid::simulate(c.scenario);
  const fs::path path = fs::path(o.out) / (c.outputs.record.empty() ? "record.csv" : c.outputs.record);
  ctid::write_record_csv(path, rec);
  std::cout << json{{"record", path.string()}, {"samples", rec.size()}, {"diverged", rec.diverged}}.dump(2) << '\n';
  return rec.diverged ? 3 : 0;
}

int estimate_cmd(const Options& o) {
  const ctid::ExperimentConfig c = load(o);
  const ctid::ExperimentResult r = ctid::run_experiment(c, o.out);
  std::cout << summary(r.metrics).dump(2) << '\n';
  return r.tracking.diverged || r.record.diverged ? 3 : 0;
}

int section5_cmd(Options o) {
  if (!o.config.empty()) throw ctid::ConfigError("--config", "reproduce-section5 runs the builtin preset only");
  o.scenario = "section5";
  ctid::ExperimentConfig c = load(o);
  const ctid::ExperimentResult r = ctid::run_experiment(c, o.out);

  // worst relative error outside the ramp windows
  double worst = 0.0;
  for (std::size_t k = 0; k < r.tracking.t.size(); ++k) {
    const double t = r.tracking.t[k];
    if (!((t >= 350.0 && t <= 480.0) || (t >= 850.0 && t <= 950.0))) continue;
    const Eigen::VectorXd e =
        ((r.tracking.estimate[k] - r.record.beta[k]).array().abs() / r.record.beta[k].array().abs()).matrix();
    worst = std::max(worst, e.maxCoeff());
  }
  json s = summary(r.metrics);
  s["max_relative_error_outside_ramps"] = worst;
  std::cout << s.dump(2) << '\n';
  return r.tracking.diverged || r.record.diverged ? 3 : 0;
}

int parsimony_cmd(const Options& o) {
  std::vector<ctid::ParsimonyRow> rows;
  json lines = json::array();
  auto add = [&](const std::string& text) {
    try {
      rows.push_back(ctid::parse_parsimony_row(text));
    } catch (const ctid::ConfigError& e) {
      lines.push_back({{"input", text}, {"error", e.what()}});
    }
  };
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ctid::ConfigError("--config", "cannot open " + o.config);
    for (std::string line; std::getline(in, line);) {
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
      add(line);
    }
  }
  for (const std::string& r : o.rows) add(r);
  if (o.config.empty() && o.rows.empty()) rows = ctid::parsimony_examples();

  for (const ctid::ParsimonyLine& l : ctid::run_parsimony_report(rows)) {
    json j{{"label", l.label}, {"K", l.submodels}};
    if (!l.error.empty()) {
      j["error"] = l.error;
    } else {
      j["sum_relative_degrees"] = l.sum_relative_degrees;
      j["relative_degree"] = l.relative_degree;
      j["surplus"] = l.surplus;
      j["reported"] = l.reported;
      if (!l.note.empty()) j["note"] = l.note;
    }
    lines.push_back(j);
  }
  std::cout << lines.dump(2) << '\n';
  return 0;
}

int monte_carlo_cmd(const Options& o) {
  ctid::ExperimentConfig c = load(o);
  if (c.monte_carlo_runs == 0) c.monte_carlo_runs = 20;
  if (o.seed) c.base_seed = *o.seed;
  const ctid::MonteCarloSummary s = ctid::run_experiment_monte_carlo(c, o.out);
  std::ifstream in(fs::path(o.out) / "monte_carlo_summary.json");
  std::cout << in.rdbuf() << std::flush;
  return s.failures == s.runs ? 3 : 0;
}

int report_error(const std::string& kind, const std::string& message, const std::string& where = {}) {
  json e{{"error", kind}, {"message", message}};
  if (!where.empty()) e["where"] = where;
  std::cerr << e.dump() << '\n';
  return kind == "config" || kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive identification of additive continuous-time models"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool with_runs) {
    sub->add_option("--config", o.config, "JSON experiment configuration");
    sub->add_option("--scenario", o.scenario, "builtin preset (section5, beam) when no --config is given");
    sub->add_option("--seed", o.seed, "scenario seed");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    if (with_runs) sub->add_option("--runs", o.runs, "number of Monte Carlo runs");
  };
  CLI::App* sim = app.add_subcommand("simulate", "simulate a scenario and write record.csv");
  common(sim, false);
  CLI::App* est = app.add_subcommand("estimate", "simulate and run the recursive estimator");
  common(est, false);
  CLI::App* s5 = app.add_subcommand("reproduce-section5", "run the builtin section5 preset");
  s5->add_option("--seed", o.seed, "scenario seed");
  s5->add_option("--out", o.out, "output directory")->capture_default_str();
  CLI::App* par = app.add_subcommand("parsimony", "parameter surplus of unfactored versus additive models");
  par->add_option("--config", o.config, "file with one row per line: 'label: n,m n,m [r=R]'");
  par->add_option("rows", o.rows, "rows in the same format");
  CLI::App* mc = app.add_subcommand("monte-carlo", "seeded runs of an experiment in parallel");
  common(mc, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (sim->parsed()) return simulate_cmd(o);
    if (est->parsed()) return estimate_cmd(o);
    if (s5->parsed()) return section5_cmd(o);
    if (par->parsed()) return parsimony_cmd(o);
    if (mc->parsed()) return monte_carlo_cmd(o);
  } catch (const ctid::ConfigError& e) {
    return report_error("config", e.what(), e.where());
  } catch (const ctid::EstimatorDiverged& e) {
    return report_error("diverged", e.what());
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
  return 0;
}

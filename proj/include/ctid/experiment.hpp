#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctid/estimator.hpp"
#include "ctid/model.hpp"
#include "ctid/monte_carlo.hpp"
#include "ctid/simulator.hpp"
#include "json.hpp"

namespace ctid {

/// Invalid experiment configuration. `where` is a JSON-pointer-like path to
/// the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  [[nodiscard]] const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct InitSpec {
  /// theta0 = theta*(0) (1 + U(-p, p)) entrywise.
  double perturbation = 0.02;
  /// Per-submodel P0 diagonals. When empty, P0 = p0_relative * diag(theta0^2).
  std::vector<Eigen::VectorXd> p0_diagonal;
  double p0_relative = 0.1;
  /// Leading samples that only initialize the filters.
  std::size_t warm_start_samples = 0;
  /// Fit theta0 on the warm-start window with batch coordinate descent.
  bool batch_refine = false;
};

struct EstimatorSetup {
  EstimatorConfig config;
  /// Forgetting factor per submodel; empty keeps the scenario's values.
  std::vector<double> lambdas;
  InitSpec init;
};

AdditiveModel perturbed_model(const AdditiveModel& truth, double fraction, std::uint64_t seed);
std::vector<Eigen::MatrixXd> initial_covariance(const AdditiveModel& theta0, const InitSpec& init);

/// True model in force at sample k of a record.
AdditiveModel true_model(const Record& rec, std::size_t k);

struct Tracking {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> estimate;  ///< committed beta after each sample
  std::vector<std::pair<double, AdditiveModel>> snapshots;
  AdditiveModel initial_model;
  AdditiveModel final_model;
  std::size_t skips = 0;
  std::size_t projections = 0;
  std::vector<std::string> warnings;
  bool diverged = false;
  std::string error;
};

/// Runs the recursive estimator over a record. Warm-start samples report
/// theta0. A snapshot is taken at the last sample with t_k <= each requested
/// time. An estimator failure ends the run with `diverged` set.
Tracking track(const Record& rec, const EstimatorSetup& setup, std::uint64_t init_seed,
               std::span<const double> snapshot_times = {});

struct OutputSpec {
  std::string record = "record.csv";
  std::string trajectory = "trajectory.csv";
  std::string errors = "errors.csv";
  std::string frequency = "frequency.csv";
  std::string metrics = "metrics.json";
  std::vector<double> snapshot_times;
  double omega_min = 0.1;
  double omega_max = 100.0;
  int omega_points = 200;
};

struct ExperimentConfig {
  std::string scenario_name;
  Scenario scenario;
  EstimatorSetup estimator;
  OutputSpec outputs;
  std::size_t monte_carlo_runs = 0;
  std::uint64_t base_seed = 1;

  /// Overrides the scenario seed (and the initialization seed derived from it).
  void set_seed(std::uint64_t seed);
  void validate() const;
};

/// Builtin presets: "section5" (three drifting modes under the stabilized
/// controller) and "beam" (two lightly damped modes with per-mode forgetting,
/// one of them drifting).
ExperimentConfig builtin_experiment(const std::string& name);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

Scenario scenario_beam();

std::vector<double> log_spaced(double lo, double hi, int points);

void write_record_csv(const std::filesystem::path& path, const Record& rec);
void write_trajectory_csv(const std::filesystem::path& path, const Record& rec, const Tracking& tr);
void write_error_csv(const std::filesystem::path& path, const Record& rec, const Tracking& tr);
/// Long format: snapshot_t, omega, mag_hat, phase_hat, mag_true, phase_true.
void write_frequency_csv(const std::filesystem::path& path, const Scenario& scenario, const Tracking& tr,
                         std::span<const double> omegas);

struct ExperimentResult {
  Record record;
  Tracking tracking;
  nlohmann::json metrics;
};

/// Simulates, estimates and writes every artifact named in config.outputs
/// under `out_dir` (created if needed).
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// One seeded simulate-and-estimate run of the experiment, as used by the
/// Monte Carlo fan-out.
RunSummary experiment_run(const ExperimentConfig& config, std::uint64_t seed);

/// config.monte_carlo_runs seeded runs in parallel; writes
/// monte_carlo_runs.csv and monte_carlo_summary.json under `out_dir`.
MonteCarloSummary run_experiment_monte_carlo(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct ParsimonyRow {
  std::string label;
  std::vector<std::pair<int, int>> degrees;  ///< (n_i, m_i)
  std::optional<int> relative_degree;        ///< of the unfactored model
};

struct ParsimonyLine {
  std::string label;
  int sum_relative_degrees = 0;
  int relative_degree = 0;
  int submodels = 0;
  int surplus = 0;
  int reported = 0;  ///< surplus clamped at zero
  std::string note;
  std::string error;  ///< non-empty when the row was rejected
};

/// Parses "label: n,m n,m ... [r=R]". Throws ConfigError on malformed text.
ParsimonyRow parse_parsimony_row(const std::string& text);
std::vector<ParsimonyRow> parsimony_examples();
/// One line per row; a bad row yields a line with `error` set.
std::vector<ParsimonyLine> run_parsimony_report(const std::vector<ParsimonyRow>& rows);

}  // namespace ctid

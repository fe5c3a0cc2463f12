#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ctid {

/// Outcome of one seeded identification run.
struct RunSummary {
  std::uint64_t seed = 0;
  Eigen::VectorXd estimate;  ///< terminal beta
  Eigen::VectorXd truth;     ///< true beta at the terminal sample
  std::size_t skips = 0;
  bool failed = false;
  std::string error;

  /// |estimate - truth| / |truth| per entry.
  [[nodiscard]] Eigen::VectorXd relative_errors() const;
  [[nodiscard]] double max_relative_error() const;
};

using RunFunction = std::function<RunSummary(std::uint64_t seed)>;

/// Runs seeds base_seed, base_seed + 1, ... one after the other. An exception
/// thrown by `run` marks that run failed and the loop continues.
std::vector<RunSummary> run_monte_carlo_serial(const RunFunction& run, std::size_t runs, std::uint64_t base_seed);

/// Same runs distributed over OpenMP threads. Results are in seed order and
/// equal the serial ones whenever `run` is a pure function of its seed.
std::vector<RunSummary> run_monte_carlo(const RunFunction& run, std::size_t runs, std::uint64_t base_seed);

struct MonteCarloSummary {
  std::size_t runs = 0;
  std::size_t failures = 0;
  double median_max_error = 0.0;           ///< over successful runs
  Eigen::VectorXd median_relative_error;   ///< per parameter
  Eigen::VectorXd mean_bias;               ///< mean of estimate - truth
  Eigen::VectorXd mean_relative_bias;      ///< |mean_bias| / |mean truth|
};

/// Aggregates successful runs. All of them must share one parameter layout.
MonteCarloSummary summarize(const std::vector<RunSummary>& runs);

double median(std::vector<double> values);

}  // namespace ctid

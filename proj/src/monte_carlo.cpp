#include "ctid/monte_carlo.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctid {

Eigen::VectorXd RunSummary::relative_errors() const {
  if (estimate.size() != truth.size()) throw std::logic_error("RunSummary: estimate and truth sizes differ");
  return ((estimate - truth).array().abs() / truth.array().abs()).matrix();
}

double RunSummary::max_relative_error() const {
  return truth.size() == 0 ? 0.0 : relative_errors().maxCoeff();
}

namespace {

RunSummary guarded(const RunFunction& run, std::uint64_t seed) {
  try {
    RunSummary s = run(seed);
    s.seed = seed;
    return s;
  } catch (const std::exception& e) {
    RunSummary s;
    s.seed = seed;
    s.failed = true;
    s.error = e.what();
    return s;
  }
}

}  // namespace

std::vector<RunSummary> run_monte_carlo_serial(const RunFunction& run, std::size_t runs, std::uint64_t base_seed) {
  std::vector<RunSummary> out;
  out.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) out.push_back(guarded(run, base_seed + r));
  return out;
}

std::vector<RunSummary> run_monte_carlo(const RunFunction& run, std::size_t runs, std::uint64_t base_seed) {
  std::vector<RunSummary> out(runs);
  const auto n = static_cast<long long>(runs);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)] = guarded(run, base_seed + static_cast<std::uint64_t>(r));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

MonteCarloSummary summarize(const std::vector<RunSummary>& runs) {
  MonteCarloSummary s;
  s.runs = runs.size();
  std::vector<const RunSummary*> ok;
  for (const RunSummary& r : runs) {
    if (r.failed) {
      ++s.failures;
    } else {
      ok.push_back(&r);
    }
  }
  if (ok.empty()) return s;
  const Eigen::Index n = ok.front()->truth.size();
  std::vector<double> max_err;
  std::vector<std::vector<double>> per(static_cast<std::size_t>(n));
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(n), truth = Eigen::VectorXd::Zero(n);
  for (const RunSummary* r : ok) {
    if (r->truth.size() != n || r->estimate.size() != n) throw std::invalid_argument("summarize: mixed layouts");
    const Eigen::VectorXd e = r->relative_errors();
    max_err.push_back(e.size() ? e.maxCoeff() : 0.0);
    for (Eigen::Index j = 0; j < n; ++j) per[static_cast<std::size_t>(j)].push_back(e(j));
    bias += r->estimate - r->truth;
    truth += r->truth;
  }
  const double count = static_cast<double>(ok.size());
  s.median_max_error = median(max_err);
  s.median_relative_error.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) s.median_relative_error(j) = median(per[static_cast<std::size_t>(j)]);
  s.mean_bias = bias / count;
  s.mean_relative_bias = (s.mean_bias.array().abs() / (truth / count).array().abs()).matrix();
  return s;
}

}  // namespace ctid

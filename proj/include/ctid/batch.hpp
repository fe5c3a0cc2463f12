#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "ctid/estimator.hpp"
#include "ctid/model.hpp"

namespace ctid {

/// A full record plus the model structure to fit.
struct BatchProblem {
  double sample_period = 0.05;
  std::vector<double> u, y;
  std::vector<double> r;  ///< reference, used in closed-loop mode
  std::vector<SubmodelSpec> specs;
  double lambda = 1.0;
  int max_srivc_iters = 20;
  int max_outer_iters = 20;
  double tol = 1e-10;
  LoopMode mode = LoopMode::open_loop;
  std::optional<DtTransferFunction> controller;
  InstrumentKind instrument = InstrumentKind::auxiliary_model;

  [[nodiscard]] std::size_t size() const { return u.size(); }
  void validate() const;
};

struct IvPrior {
  Eigen::VectorXd theta0;
  Eigen::MatrixXd P0;
};

struct IvSolution {
  Eigen::VectorXd theta;
  Eigen::MatrixXd P;  ///< inverse of the weighted normal matrix
  double condition_number = 0.0;
};

/// Solves [lambda^N P0^-1 + sum_k lambda^(N-k) phi_hat phi^T] theta =
///        lambda^N P0^-1 theta0 + sum_k lambda^(N-k) phi_hat y_f
/// (prior terms only when `prior` is given). Throws SingularSystem.
IvSolution weighted_iv_solve(std::span<const RegressionData> data, double lambda,
                             const std::optional<IvPrior>& prior = std::nullopt);

/// Filtered residual output, regressor and instrument of submodel i over the
/// whole record, recomputed from zero state with prefilter A_i(theta_iter)
/// and the other submodels fixed at `context`.
std::vector<RegressionData> batch_regression(const BatchProblem& problem, std::size_t i,
                                             const ThetaVector& theta_iter, const AdditiveModel& context);

struct SrivcStep {
  ThetaVector theta;
  double condition_number = 0.0;
};

SrivcStep batch_srivc_step(const BatchProblem& problem, std::size_t i, const ThetaVector& theta_iter,
                           const AdditiveModel& context);

struct BatchResult {
  AdditiveModel model;
  std::vector<double> cost_trace;  ///< V_N at the start and after each A-iteration
  int outer_iterations = 0;
  bool converged = false;
};

/// Cyclic SRIVC over the submodels. A submodel update that would raise V_N
/// is rejected, so the cost trace never increases.
BatchResult batch_coordinate_descent(const BatchProblem& problem, const AdditiveModel& theta0s);

/// V_N of `model` on the problem's record.
double batch_cost(const BatchProblem& problem, const AdditiveModel& model);

}  // namespace ctid

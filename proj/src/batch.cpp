#include "ctid/batch.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ctid/errors.hpp"
#include "ctid/sensitivity.hpp"
#include "ctid/simulator.hpp"

namespace ctid {

void BatchProblem::validate() const {
  if (!(sample_period > 0.0)) throw std::invalid_argument("BatchProblem: sample period must be positive");
  if (u.size() != y.size()) throw std::invalid_argument("BatchProblem: u and y lengths differ");
  if (mode == LoopMode::closed_loop) {
    if (!controller) throw std::invalid_argument("BatchProblem: closed loop needs a controller");
    if (r.size() != u.size()) throw std::invalid_argument("BatchProblem: reference length differs");
  }
  if (specs.empty()) throw std::invalid_argument("BatchProblem: no submodels");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("BatchProblem: lambda must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("BatchProblem: tol must be positive");
  if (max_srivc_iters < 1 || max_outer_iters < 1) throw std::invalid_argument("BatchProblem: iteration caps must be >= 1");
}

IvSolution weighted_iv_solve(std::span<const RegressionData> data, double lambda,
                             const std::optional<IvPrior>& prior) {
  if (data.empty() && !prior) throw std::invalid_argument("weighted_iv_solve: no data");
  const Eigen::Index n = prior ? prior->theta0.size() : data.front().phi_f.size();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  if (prior) {
    normal = prior->P0.inverse();
    rhs = normal * prior->theta0;
  }
  for (const RegressionData& d : data) {
    normal = lambda * normal + d.phi_hat_f * d.phi_f.transpose();
    rhs = lambda * rhs + d.phi_hat_f * d.y_f;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(normal);
  const auto& sv = svd.singularValues();
  const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  if (!normal.allFinite() || qr.rank() < n || !(cond < 1e15)) {
    throw SingularSystem("weighted IV normal matrix is singular (condition number " + std::to_string(cond) + ")",
                         cond);
  }
  return {qr.solve(rhs), qr.inverse(), cond};
}

std::vector<RegressionData> batch_regression(const BatchProblem& problem, std::size_t i,
                                             const ThetaVector& theta_iter, const AdditiveModel& context) {
  problem.validate();
  if (context.size() != problem.specs.size() || i >= context.size()) {
    throw std::invalid_argument("batch_regression: context does not match the problem");
  }
  const double ts = problem.sample_period;
  const bool closed = problem.mode == LoopMode::closed_loop;
  const SubmodelSpec& spec = problem.specs[i];
  AdditiveModel iterate = context;
  iterate.submodels[i].theta = theta_iter;
  iterate.validate();

  auto cache = std::make_shared<DiscretizationCache>(8);
  std::vector<TransferFunctionFilter> others;
  for (std::size_t j = 0; j < context.size(); ++j) {
    if (j != i) others.emplace_back(context.submodels[j], ts, cache);
  }
  TransferFunctionFilter aux(iterate.submodels[i], ts, cache);
  RegressionBanks banks(spec, theta_iter.denominator(), ts, cache, closed);
  std::optional<SensitivityFilter> sens;
  if (closed) sens.emplace(iterate, *problem.controller, ts);

  std::vector<RegressionData> out;
  out.reserve(problem.size());
  double u_prev = 0.0, z_prev = 0.0, yt_prev = 0.0, xh_prev = 0.0;
  for (std::size_t k = 0; k < problem.size(); ++k) {
    const double u = problem.u[k];
    double ytilde = problem.y[k];
    for (auto& f : others) ytilde -= f.step(u_prev, u);
    const double z = closed ? sens->step(problem.r[k]) : u;
    const double w_prev = closed ? z_prev : u_prev;
    const double xhat = aux.step(w_prev, z);
    out.push_back(banks.step({yt_prev, ytilde, u_prev, u, xh_prev, xhat, w_prev, z}, problem.instrument));
    u_prev = u;
    z_prev = z;
    yt_prev = ytilde;
    xh_prev = xhat;
  }
  return out;
}

SrivcStep batch_srivc_step(const BatchProblem& problem, std::size_t i, const ThetaVector& theta_iter,
                           const AdditiveModel& context) {
  const auto data = batch_regression(problem, i, theta_iter, context);
  const IvSolution sol = weighted_iv_solve(data, problem.lambda);
  return {ThetaVector::from_vector(problem.specs[i], sol.theta), sol.condition_number};
}

double batch_cost(const BatchProblem& problem, const AdditiveModel& model) {
  Plant plant(model, problem.sample_period);
  double cost = 0.0;
  for (std::size_t k = 0; k < problem.size(); ++k) {
    const double e = problem.y[k] - plant.output(problem.u[k]);
    cost = problem.lambda * cost + e * e;
    plant.advance(problem.u[k]);
  }
  return cost;
}

namespace {

ThetaVector stabilized(const SubmodelSpec& spec, const ThetaVector& theta) {
  const Polynomial a = theta.denominator();
  if (a.degree() != spec.n || is_stable(a)) return theta;
  return ThetaVector::from_polynomials(spec, theta.numerator(), project_stable(a));
}

double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
  return (next - prev).norm() / std::max(prev.norm(), 1e-300);
}

}  // namespace

BatchResult batch_coordinate_descent(const BatchProblem& problem, const AdditiveModel& theta0s) {
  problem.validate();
  BatchResult result;
  result.model = theta0s;
  for (Submodel& s : result.model.submodels) s.theta = stabilized(s.spec, s.theta);
  result.model.validate();
  double cost = batch_cost(problem, result.model);
  result.cost_trace.push_back(cost);

  for (int outer = 0; outer < problem.max_outer_iters; ++outer) {
    const Eigen::VectorXd before = result.model.beta();
    for (std::size_t i = 0; i < result.model.size(); ++i) {
      const SubmodelSpec& spec = problem.specs[i];
      ThetaVector theta = result.model.submodels[i].theta;
      for (int s = 0; s < problem.max_srivc_iters; ++s) {
        SrivcStep step;
        try {
          step = batch_srivc_step(problem, i, theta, result.model);
        } catch (const SingularSystem& e) {
          throw SingularSystem("submodel " + std::to_string(i) + ", outer iteration " + std::to_string(outer) +
                                   ": " + e.what(),
                               e.condition_number());
        }
        ThetaVector next = stabilized(spec, step.theta);
        if (next.denominator().degree() != spec.n) break;
        const double change = relative_change(next.to_vector(), theta.to_vector());
        theta = std::move(next);
        if (change < problem.tol) break;
      }
      AdditiveModel candidate = result.model;
      candidate.submodels[i].theta = theta;
      const double c = batch_cost(problem, candidate);
      if (std::isfinite(c) && c <= cost) {
        result.model = std::move(candidate);
        cost = c;
      }
    }
    result.cost_trace.push_back(cost);
    ++result.outer_iterations;
    if (relative_change(result.model.beta(), before) < problem.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace ctid

#include "ctid/estimator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ctid/batch.hpp"
#include "ctid/errors.hpp"
#include "ctid/simulator.hpp"

namespace ctid {

namespace {

ThetaVector to_theta(const SubmodelSpec& spec, const Eigen::VectorXd& v) {
  return ThetaVector::from_vector(spec, v);
}

Polynomial denominator_of(const SubmodelSpec& spec, const Eigen::VectorXd& v) {
  std::vector<double> c{1.0};
  for (int j = 0; j < spec.n; ++j) c.push_back(v(j));
  return Polynomial(std::move(c));
}

bool admissible(const SubmodelSpec& spec, const Eigen::VectorXd& v) {
  if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e150) return false;
  return spec.n == 0 || v(spec.n - 1) != 0.0;
}

}  // namespace

void EstimatorConfig::validate() const {
  if (a_iterations < 1) throw std::invalid_argument("EstimatorConfig: a_iterations must be >= 1");
  if (srivc_refinements < 0) throw std::invalid_argument("EstimatorConfig: srivc_refinements must be >= 0");
  if (decimation < 1) throw std::invalid_argument("EstimatorConfig: decimation must be >= 1");
  if (!(epsilon_gain > 0.0)) throw std::invalid_argument("EstimatorConfig: epsilon_gain must be positive");
  if (!(sample_period > 0.0)) throw std::invalid_argument("EstimatorConfig: sample period must be positive");
  if (mode == LoopMode::closed_loop && !controller) {
    throw std::invalid_argument("EstimatorConfig: closed-loop mode needs a controller");
  }
  if (controller) controller->validate();
}

UpdateResult srivc_recursive_update(const Eigen::VectorXd& theta_bar, const Eigen::MatrixXd& P_bar,
                                    const RegressionData& data, double lambda, double epsilon_gain,
                                    bool symmetrize) {
  UpdateResult out{theta_bar, P_bar, Eigen::VectorXd::Zero(theta_bar.size()), true};
  const Eigen::VectorXd p_hat = P_bar * data.phi_hat_f;
  const double q = data.phi_f.dot(p_hat);
  const double denom = lambda + q;
  if (!std::isfinite(denom) || !(std::abs(denom) > epsilon_gain * (1.0 + std::abs(q)))) return out;
  const Eigen::VectorXd gain = p_hat / denom;
  const double innovation = data.y_f - data.phi_f.dot(theta_bar);
  Eigen::VectorXd theta = theta_bar + gain * innovation;
  Eigen::MatrixXd P = (P_bar - gain * (data.phi_f.transpose() * P_bar)) / lambda;
  if (symmetrize) P = 0.5 * (P + P.transpose()).eval();
  if (!theta.allFinite() || !P.allFinite()) return out;
  out.theta = std::move(theta);
  out.P = std::move(P);
  out.gain = gain;
  out.skipped = false;
  return out;
}

double residual_output(std::size_t i, double y, std::span<const double> aux_outputs) {
  double r = y;
  for (std::size_t j = 0; j < aux_outputs.size(); ++j) {
    if (j != i) r -= aux_outputs[j];
  }
  return r;
}

RegressionBanks::RegressionBanks(const SubmodelSpec& spec, const Polynomial& prefilter, double sample_period,
                                 std::shared_ptr<DiscretizationCache> cache, bool separate_instrument_input)
    : spec_(spec),
      out_(prefilter, 0, spec.n, sample_period, cache),
      in_(prefilter, spec.ell, spec.m, sample_period, cache),
      inst_(prefilter, 0, spec.n, sample_period, cache) {
  if (separate_instrument_input) inst_in_.emplace(prefilter, spec.ell, spec.m, sample_period, cache);
}

void RegressionBanks::retune(const Polynomial& prefilter) {
  out_.retune(prefilter);
  in_.retune(prefilter);
  inst_.retune(prefilter);
  if (inst_in_) inst_in_->retune(prefilter);
}

RegressionData RegressionBanks::step(const Inputs& in, InstrumentKind kind) {
  const int n = spec_.n, m = spec_.m;
  RegressionData d;
  d.phi_f.resize(n + m + 1);
  const auto out = out_.step(in.ytilde_prev, in.ytilde);
  d.y_f = out[0];
  for (int j = 1; j <= n; ++j) d.phi_f(j - 1) = -out[static_cast<std::size_t>(j)];
  const auto inp = in_.step(in.u_prev, in.u);
  for (int j = 0; j <= m; ++j) d.phi_f(n + j) = inp[static_cast<std::size_t>(j)];
  if (kind == InstrumentKind::regressor) {
    d.phi_hat_f = d.phi_f;
    return d;
  }
  d.phi_hat_f.resize(n + m + 1);
  const auto ins = inst_.step(in.xhat_prev, in.xhat);
  for (int j = 1; j <= n; ++j) d.phi_hat_f(j - 1) = -ins[static_cast<std::size_t>(j)];
  if (inst_in_) {
    const auto w = inst_in_->step(in.w_prev, in.w);
    for (int j = 0; j <= m; ++j) d.phi_hat_f(n + j) = w[static_cast<std::size_t>(j)];
  } else {
    d.phi_hat_f.tail(m + 1) = d.phi_f.tail(m + 1);
  }
  return d;
}

RegressionBanks::Snapshot RegressionBanks::snapshot() const {
  return {out_.snapshot(), in_.snapshot(), inst_.snapshot(),
          inst_in_ ? inst_in_->snapshot() : FilterBank::Snapshot{}};
}

void RegressionBanks::restore(const Snapshot& s) {
  out_.restore(s.out);
  in_.restore(s.in);
  inst_.restore(s.inst);
  if (inst_in_) inst_in_->restore(s.inst_in);
}

Estimator::Estimator(EstimatorConfig config, const AdditiveModel& theta0, std::vector<Eigen::MatrixXd> P0)
    : config_(std::move(config)), model_(theta0) {
  config_.validate();
  model_.validate();
  if (P0.size() != model_.size()) throw std::invalid_argument("Estimator: one P0 per submodel required");
  if (!config_.covariance_inflation.empty() && config_.covariance_inflation.size() != model_.size()) {
    throw std::invalid_argument("Estimator: one inflation matrix per submodel required");
  }
  for (Submodel& s : model_.submodels) {
    const Polynomial a = s.theta.denominator();
    if (is_stable(a)) continue;
    if (!config_.stability_projection) throw std::invalid_argument("Estimator: unstable initial denominator");
    s.theta = ThetaVector::from_polynomials(s.spec, s.theta.numerator(), project_stable(a));
  }
  cache_ = std::make_shared<DiscretizationCache>(8 + 4 * model_.size());
  const bool closed = config_.mode == LoopMode::closed_loop;
  subs_.reserve(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i) {
    const Submodel& s = model_.submodels[i];
    const auto n_theta = static_cast<Eigen::Index>(s.spec.n_theta());
    if (P0[i].rows() != n_theta || P0[i].cols() != n_theta) {
      throw std::invalid_argument("Estimator: P0 dimension does not match the submodel");
    }
    if (!config_.covariance_inflation.empty() && config_.covariance_inflation[i].rows() != n_theta) {
      throw std::invalid_argument("Estimator: inflation matrix dimension does not match the submodel");
    }
    subs_.push_back(SubmodelState{
        s.spec, s.theta.to_vector(), P0[i],
        RegressionBanks(s.spec, s.theta.denominator(), config_.sample_period, cache_, closed),
        TransferFunctionFilter(s, config_.sample_period, cache_),
        TransferFunctionFilter(s, config_.sample_period, cache_), {}, {}, 0.0, 0.0, {}});
  }
  if (closed) sensitivity_.emplace(model_, *config_.controller, config_.sample_period);
}

Estimator Estimator::initialize(EstimatorConfig config, const AdditiveModel& theta0,
                                std::vector<Eigen::MatrixXd> P0, const InitOptions& options) {
  AdditiveModel start = theta0;
  if (options.batch_refine && !options.warm_start.empty()) {
    BatchProblem problem;
    problem.sample_period = config.sample_period;
    for (const Sample& s : options.warm_start) {
      problem.u.push_back(s.u);
      problem.y.push_back(s.y);
      problem.r.push_back(s.r);
    }
    for (const Submodel& s : theta0.submodels) problem.specs.push_back(s.spec);
    problem.lambda = 1.0;
    problem.mode = config.mode;
    problem.controller = config.controller;
    start = batch_coordinate_descent(problem, theta0).model;
  }
  Estimator est(std::move(config), start, std::move(P0));
  for (const Sample& s : options.warm_start) est.absorb(s);
  return est;
}

void Estimator::check_sample(const Sample& s) const {
  if (!std::isfinite(s.u) || !std::isfinite(s.y) || !std::isfinite(s.t)) {
    throw std::invalid_argument("Estimator: non-finite sample");
  }
  if (config_.mode == LoopMode::closed_loop && !std::isfinite(s.r)) {
    throw std::invalid_argument("Estimator: non-finite reference");
  }
  if (count_ > 0) {
    const double ts = config_.sample_period;
    if (std::abs(s.t - t_prev_ - ts) > 1e-6 * ts + 1e-12 * std::abs(s.t)) {
      throw std::invalid_argument("Estimator: samples must be spaced by the sample period");
    }
  }
}

void Estimator::begin_sample(const Sample& s, double& z, std::vector<double>& xhat) {
  const bool closed = config_.mode == LoopMode::closed_loop;
  if (closed) {
    sensitivity_->set_model(model_);
    z = sensitivity_->step(s.r);
    if (!std::isfinite(z) || std::abs(z) > 1e100) {
      throw EstimatorDiverged("Estimator: noiseless input estimate diverged at sample " + std::to_string(count_) +
                               "; the loop around the current model is unstable");
    }
  } else {
    z = s.u;
  }
  const double drive_prev = closed ? z_prev_ : u_prev_;
  xhat.resize(subs_.size());
  for (std::size_t i = 0; i < subs_.size(); ++i) {
    SubmodelState& sub = subs_[i];
    sub.aux.retune(model_.submodels[i].theta);
    xhat[i] = sub.aux.step(drive_prev, z);
    sub.banks_snap = sub.banks.snapshot();
    sub.sim_snap = sub.sim.snapshot();
  }
}

double Estimator::simulate_output(std::size_t j, const Eigen::VectorXd& theta, double w) {
  SubmodelState& sub = subs_[j];
  sub.sim.restore(sub.sim_snap);
  sub.sim.retune(to_theta(sub.spec, theta));
  return sub.sim.step(config_.mode == LoopMode::closed_loop ? z_prev_ : u_prev_, w);
}

void Estimator::commit(const Sample& s, double z, const std::vector<double>& xhat) {
  const std::size_t k = subs_.size();
  std::vector<double> xs(k);
  for (std::size_t j = 0; j < k; ++j) xs[j] = simulate_output(j, subs_[j].theta_bar, z);
  const double w_prev = config_.mode == LoopMode::closed_loop ? z_prev_ : u_prev_;
  for (std::size_t i = 0; i < k; ++i) {
    SubmodelState& sub = subs_[i];
    const double ytilde = residual_output(i, s.y, xs);
    sub.banks.restore(sub.banks_snap);
    if (config_.adaptive_prefilter) sub.banks.retune(denominator_of(sub.spec, sub.theta_bar));
    sub.banks.step({sub.ytilde_prev, ytilde, u_prev_, s.u, sub.xhat_prev, xhat[i], w_prev, z}, config_.instrument);
    sub.ytilde_prev = ytilde;
    sub.xhat_prev = xhat[i];
  }
  u_prev_ = s.u;
  z_prev_ = z;
  t_prev_ = s.t;
  ++count_;
}

void Estimator::absorb(const Sample& s) {
  check_sample(s);
  double z = 0.0;
  std::vector<double> xhat;
  begin_sample(s, z, xhat);
  commit(s, z, xhat);
}

SampleReport Estimator::process_sample(const Sample& s) {
  check_sample(s);
  const std::size_t k = subs_.size();
  SampleReport report;
  report.skipped.assign(k, 0);
  double z = 0.0;
  std::vector<double> xhat;
  begin_sample(s, z, xhat);
  if ((count_ + 1) % static_cast<std::size_t>(config_.decimation) != 0) {
    commit(s, z, xhat);
    return report;
  }
  report.updated = true;

  const bool symmetrize = config_.instrument == InstrumentKind::regressor;
  const double w_prev = config_.mode == LoopMode::closed_loop ? z_prev_ : u_prev_;
  std::vector<Eigen::VectorXd> theta(k);
  std::vector<Eigen::MatrixXd> P(k);
  std::vector<double> xs(k);
  for (std::size_t j = 0; j < k; ++j) {
    theta[j] = subs_[j].theta_bar;
    P[j] = subs_[j].P_bar;
    xs[j] = simulate_output(j, theta[j], z);
  }

  for (int l = 0; l < config_.a_iterations; ++l) {
    for (std::size_t i = 0; i < k; ++i) {
      SubmodelState& sub = subs_[i];
      const double ytilde = residual_output(i, s.y, xs);
      for (int it = 0; it <= config_.srivc_refinements; ++it) {
        UpdateResult res;
        try {
          sub.banks.restore(sub.banks_snap);
          if (config_.adaptive_prefilter) sub.banks.retune(denominator_of(sub.spec, theta[i]));
          const RegressionData data = sub.banks.step(
              {sub.ytilde_prev, ytilde, u_prev_, s.u, sub.xhat_prev, xhat[i], w_prev, z}, config_.instrument);
          res = srivc_recursive_update(sub.theta_bar, sub.P_bar, data, sub.spec.lambda, config_.epsilon_gain,
                                       symmetrize);
          if (!res.skipped) sub.last = data;
        } catch (const std::exception&) {
          res = UpdateResult{sub.theta_bar, sub.P_bar, {}, true};
        }
        if (res.skipped || !admissible(sub.spec, res.theta)) {
          ++report.skipped[i];
          ++skips_;
          theta[i] = sub.theta_bar;
          P[i] = sub.P_bar;
        } else {
          theta[i] = std::move(res.theta);
          P[i] = std::move(res.P);
        }
      }
      try {
        xs[i] = simulate_output(i, theta[i], z);
      } catch (const std::exception&) {
        xs[i] = simulate_output(i, sub.theta_bar, z);
      }
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    SubmodelState& sub = subs_[i];
    if (config_.stability_projection && sub.spec.n > 0) {
      try {
        const Polynomial a = denominator_of(sub.spec, theta[i]);
        const Polynomial projected = project_stable(a);
        if (!(projected == a)) {
          for (int j = 0; j < sub.spec.n; ++j) theta[i](j) = projected[j + 1];
          ++projections_;
        }
      } catch (const std::exception&) {
        theta[i] = sub.theta_bar;
        P[i] = sub.P_bar;
        ++report.skipped[i];
        ++skips_;
      }
    }
    sub.theta_bar = theta[i];
    sub.P_bar = P[i];
    if (!config_.covariance_inflation.empty()) sub.P_bar += config_.covariance_inflation[i];
    model_.submodels[i].theta = to_theta(sub.spec, sub.theta_bar);
  }

  if (sensitivity_ && !loop_warning_ && count_ % 200 == 0) {
    sensitivity_->set_model(model_);
    const double rho = sensitivity_->loop_spectral_radius();
    if (!(rho < 1.0)) {
      loop_warning_ = true;
      warnings_.push_back("closed loop around the current model is unstable (spectral radius " +
                          std::to_string(rho) + ") at sample " + std::to_string(count_));
    }
  }

  commit(s, z, xhat);
  return report;
}

double windowed_cost(std::span<const Sample> window, const AdditiveModel& model, double lambda,
                     double sample_period) {
  if (window.empty()) throw std::invalid_argument("windowed_cost: empty window");
  Plant plant(model, sample_period);
  double cost = 0.0;
  for (const Sample& s : window) {
    const double e = s.y - plant.output(s.u);
    cost = lambda * cost + e * e;
    plant.advance(s.u);
  }
  return cost;
}

}  // namespace ctid

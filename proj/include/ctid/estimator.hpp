#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctid/filter_bank.hpp"
#include "ctid/model.hpp"
#include "ctid/sensitivity.hpp"

namespace ctid {

enum class LoopMode { open_loop, closed_loop };

enum class InstrumentKind {
  auxiliary_model,  ///< phi_hat from the noise-free auxiliary model output
  regressor,        ///< phi_hat := phi (recursive least squares)
};

struct EstimatorConfig {
  int a_iterations = 1;       ///< M_l
  int srivc_refinements = 0;  ///< M_s
  LoopMode mode = LoopMode::open_loop;
  int decimation = 1;
  bool stability_projection = true;
  bool adaptive_prefilter = true;
  InstrumentKind instrument = InstrumentKind::auxiliary_model;
  double epsilon_gain = 1e-12;
  /// Added to each committed covariance after every update when set.
  std::vector<Eigen::MatrixXd> covariance_inflation;
  /// Required in closed-loop mode.
  std::optional<DtTransferFunction> controller;
  double sample_period = 0.05;

  void validate() const;
};

/// Filtered residual output, regressor and instrument of one submodel at one
/// sample, laid out like the ThetaVector.
struct RegressionData {
  double y_f = 0.0;
  Eigen::VectorXd phi_f;
  Eigen::VectorXd phi_hat_f;
};

struct UpdateResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd P;
  Eigen::VectorXd gain;
  bool skipped = false;
};

/// One step of the recursive IV update against the previous committed
/// estimate (theta_bar, P_bar).
UpdateResult srivc_recursive_update(const Eigen::VectorXd& theta_bar, const Eigen::MatrixXd& P_bar,
                                    const RegressionData& data, double lambda, double epsilon_gain,
                                    bool symmetrize);

/// y - sum_{j != i} aux_outputs[j].
double residual_output(std::size_t i, double y, std::span<const double> aux_outputs);

/// Filter banks that turn the residual output, the input and the instrument
/// signals of one submodel into RegressionData. All banks share the
/// submodel's current prefilter denominator.
class RegressionBanks {
 public:
  struct Inputs {
    double ytilde_prev, ytilde;
    double u_prev, u;
    double xhat_prev, xhat;  ///< auxiliary model output
    double w_prev, w;        ///< signal in the instrument's input taps (u or z)
  };
  struct Snapshot {
    FilterBank::Snapshot out, in, inst, inst_in;
  };

  RegressionBanks(const SubmodelSpec& spec, const Polynomial& prefilter, double sample_period,
                  std::shared_ptr<DiscretizationCache> cache, bool separate_instrument_input);

  void retune(const Polynomial& prefilter);
  RegressionData step(const Inputs& in, InstrumentKind kind);

  [[nodiscard]] Snapshot snapshot() const;
  void restore(const Snapshot& s);
  [[nodiscard]] const Polynomial& prefilter() const { return out_.denominator(); }

 private:
  SubmodelSpec spec_;
  FilterBank out_;   // p^j / A on the residual output
  FilterBank in_;    // p^j / (p^ell A) on u
  FilterBank inst_;  // p^j / A on the auxiliary output
  std::optional<FilterBank> inst_in_;  // p^j / (p^ell A) on z
};

struct Sample {
  double t = 0.0;
  double u = 0.0;
  double y = 0.0;
  double r = 0.0;
};

struct SampleReport {
  bool updated = false;
  std::vector<int> skipped;  ///< skipped updates per submodel at this sample
};

/// Options for Estimator::initialize.
struct InitOptions {
  /// Samples filtered through the initial prefilters before recursion starts.
  std::vector<Sample> warm_start;
  /// Replace theta0 by a batch coordinate-descent fit on the warm-start window.
  bool batch_refine = false;
};

/// Additive recursive SRIVC estimator.
class Estimator {
 public:
  Estimator(EstimatorConfig config, const AdditiveModel& theta0, std::vector<Eigen::MatrixXd> P0);

  static Estimator initialize(EstimatorConfig config, const AdditiveModel& theta0,
                              std::vector<Eigen::MatrixXd> P0, const InitOptions& options);

  SampleReport process_sample(const Sample& s);
  /// Steps every filter with the committed parameters and performs no update.
  void absorb(const Sample& s);

  [[nodiscard]] std::size_t size() const { return subs_.size(); }
  [[nodiscard]] const AdditiveModel& model() const { return model_; }
  [[nodiscard]] const Eigen::VectorXd& theta_bar(std::size_t i) const { return subs_.at(i).theta_bar; }
  [[nodiscard]] const Eigen::MatrixXd& P_bar(std::size_t i) const { return subs_.at(i).P_bar; }
  [[nodiscard]] const RegressionData& last_regression(std::size_t i) const { return subs_.at(i).last; }
  /// Committed residual output of submodel i at the last sample.
  [[nodiscard]] double last_residual(std::size_t i) const { return subs_.at(i).ytilde_prev; }
  [[nodiscard]] double last_noiseless_input() const { return z_prev_; }
  [[nodiscard]] std::size_t samples_seen() const { return count_; }
  [[nodiscard]] std::size_t skip_count() const { return skips_; }
  [[nodiscard]] std::size_t projection_count() const { return projections_; }
  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }
  [[nodiscard]] const EstimatorConfig& config() const { return config_; }
  [[nodiscard]] const DiscretizationCache& cache() const { return *cache_; }

 private:
  struct SubmodelState {
    SubmodelSpec spec;
    Eigen::VectorXd theta_bar;
    Eigen::MatrixXd P_bar;
    RegressionBanks banks;
    TransferFunctionFilter aux;  // instrument model at theta_bar(t_{k-1})
    TransferFunctionFilter sim;  // input-driven output used for residuals
    RegressionBanks::Snapshot banks_snap;
    FilterBank::Snapshot sim_snap;
    double ytilde_prev = 0.0;
    double xhat_prev = 0.0;
    RegressionData last;
  };

  void begin_sample(const Sample& s, double& z, std::vector<double>& xhat);
  double simulate_output(std::size_t j, const Eigen::VectorXd& theta, double u);
  void commit(const Sample& s, double z, const std::vector<double>& xhat);
  void check_sample(const Sample& s) const;

  EstimatorConfig config_;
  std::shared_ptr<DiscretizationCache> cache_;
  std::vector<SubmodelState> subs_;
  AdditiveModel model_;
  std::optional<SensitivityFilter> sensitivity_;
  double u_prev_ = 0.0;
  double z_prev_ = 0.0;
  double t_prev_ = 0.0;
  std::size_t count_ = 0;
  std::size_t skips_ = 0;
  std::size_t projections_ = 0;
  std::vector<std::string> warnings_;
  bool loop_warning_ = false;
};

/// Exponentially weighted output-error cost of `model` on a window, with the
/// model outputs simulated from zero state: sum_k lambda^(N-1-k) e_k^2.
double windowed_cost(std::span<const Sample> window, const AdditiveModel& model, double lambda,
                     double sample_period);

}  // namespace ctid

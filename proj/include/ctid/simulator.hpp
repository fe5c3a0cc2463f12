#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctid/filter_bank.hpp"
#include "ctid/model.hpp"

namespace ctid {

/// Linear change of one entry of beta between two instants. The entry holds
/// `from` before t_start and `to` after t_end.
struct Ramp {
  std::size_t submodel = 0;
  std::size_t parameter = 0;  ///< index into the submodel's ThetaVector layout
  double t_start = 0.0;
  double t_end = 0.0;
  double from = 0.0;
  double to = 0.0;
};

/// Plant parameters as a function of time. Ramps on the same entry are
/// applied in order of t_start.
class ParameterSchedule {
 public:
  ParameterSchedule() = default;
  explicit ParameterSchedule(AdditiveModel base, std::vector<Ramp> ramps = {});

  [[nodiscard]] AdditiveModel at(double t) const;
  [[nodiscard]] const AdditiveModel& base() const { return base_; }
  [[nodiscard]] const std::vector<Ramp>& ramps() const { return ramps_; }
  [[nodiscard]] bool time_varying() const { return !ramps_.empty(); }

 private:
  AdditiveModel base_;
  std::vector<Ramp> ramps_;
};

/// Sum of per-submodel ZOH realizations driven by one held input.
class Plant {
 public:
  Plant(const AdditiveModel& model, double sample_period);

  /// Swaps in the parameters for the interval that starts at the current
  /// instant.
  void set_parameters(const AdditiveModel& model);
  /// Output at the current instant for input `u` (the feedthrough uses u).
  [[nodiscard]] double output(double u);
  [[nodiscard]] double proper_output();
  [[nodiscard]] double feedthrough() const;
  /// Advances every submodel over one period with `u` held.
  void advance(double u);

 private:
  std::vector<TransferFunctionFilter> parts_;
};

struct Scenario {
  std::string name;
  ParameterSchedule plant;
  std::optional<DtTransferFunction> controller;  ///< present means closed loop
  /// r(t) in closed loop, u(t) in open loop.
  std::function<double(double)> setpoint = [](double) { return 0.0; };
  /// Standard deviation of white Gaussian dither added to the setpoint.
  double excitation_stddev = 0.0;
  double noise_variance = 0.0;
  double sample_period = 0.05;
  double duration = 0.0;
  std::uint64_t seed = 0;
  /// Suggested estimator start: relative uniform perturbation of the true
  /// initial parameters and the diagonal of each P0 (empty when unset).
  double init_perturbation = 0.0;
  std::vector<Eigen::VectorXd> covariance_diagonal;

  [[nodiscard]] bool closed_loop() const { return controller.has_value(); }
  [[nodiscard]] std::size_t sample_count() const;
  void validate() const;
};

/// Sampled record of one run. beta[k] holds the true parameters that are in
/// force over [t_k, t_{k+1}).
struct Record {
  double sample_period = 0.0;
  std::vector<SubmodelSpec> specs;
  std::vector<double> t, r, u, y, x;
  std::vector<Eigen::VectorXd> beta;
  bool diverged = false;

  [[nodiscard]] std::size_t size() const { return t.size(); }
  void reserve(std::size_t n);
};

Record run_open_loop(const Scenario& scenario);
Record run_closed_loop(const Scenario& scenario);
/// Dispatches on scenario.closed_loop().
Record simulate(const Scenario& scenario);

enum class ControllerVariant { printed, stabilized };

struct Section5Options {
  ControllerVariant controller = ControllerVariant::stabilized;
  double ramp_fraction = 0.3;  ///< relative change applied by each ramp
  double duration = 1000.0;
  std::uint64_t seed = 1;
};

DtTransferFunction section5_controller(ControllerVariant variant);
AdditiveModel section5_plant();
Scenario scenario_section5(const Section5Options& options = {});

}  // namespace ctid

#pragma once

#include <vector>

#include "ctid/dt_filter.hpp"
#include "ctid/filter_bank.hpp"
#include "ctid/model.hpp"

namespace ctid {

/// Estimates the noiseless plant input z = C_d / (1 + C_d G_d) r by running
/// the control loop around the current model instead of the plant. The model
/// parameters may change between samples; the loop state is carried over.
class SensitivityFilter {
 public:
  SensitivityFilter(const AdditiveModel& model, const DtTransferFunction& controller,
                    double sample_period);

  /// Parameters used for the interval that ends at the next call to step().
  void set_model(const AdditiveModel& model);
  /// Advances the model over the previous interval and returns z(t_k).
  double step(double r);

  [[nodiscard]] double last() const { return z_prev_; }
  /// Spectral radius of the discretized loop at the current model.
  [[nodiscard]] double loop_spectral_radius() const;

 private:
  AdditiveModel model_;
  DtTransferFunction controller_tf_;
  double sample_period_;
  DtFilter controller_;
  std::vector<TransferFunctionFilter> parts_;
  double z_prev_ = 0.0;
  bool started_ = false;
};

}  // namespace ctid

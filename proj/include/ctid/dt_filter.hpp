#pragma once

#include <vector>

#include "ctid/model.hpp"

namespace ctid {

/// Direct-form-II-transposed realization of a proper DtTransferFunction.
/// output = direct() * x + pending(); commit(x, output) then shifts the state.
class DtFilter {
 public:
  explicit DtFilter(const DtTransferFunction& tf);

  [[nodiscard]] double direct() const { return b_[0]; }
  [[nodiscard]] double pending() const { return state_.empty() ? 0.0 : state_[0]; }
  void commit(double x, double y);
  double step(double x);

  /// New coefficients of the same order; the state is kept.
  void set_coefficients(const DtTransferFunction& tf);
  void reset();

  [[nodiscard]] const std::vector<double>& state() const { return state_; }
  void set_state(const std::vector<double>& s);

 private:
  void load(const DtTransferFunction& tf);

  std::vector<double> b_;
  std::vector<double> a_;
  std::vector<double> state_;
};

}  // namespace ctid

#include "ctid/dt_filter.hpp"

#include <stdexcept>

namespace ctid {

DtFilter::DtFilter(const DtTransferFunction& tf) {
  load(tf);
  state_.assign(a_.size() - 1, 0.0);
}

void DtFilter::load(const DtTransferFunction& tf) {
  tf.validate();
  if (tf.num.size() > tf.den.size()) throw std::invalid_argument("DtFilter: improper transfer function");
  const double a0 = tf.den.front();
  a_.resize(tf.den.size());
  b_.assign(tf.den.size(), 0.0);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] = tf.den[i] / a0;
  const std::size_t shift = tf.den.size() - tf.num.size();
  for (std::size_t i = 0; i < tf.num.size(); ++i) b_[i + shift] = tf.num[i] / a0;
}

void DtFilter::commit(double x, double y) {
  const std::size_t n = state_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? state_[i + 1] : 0.0;
    state_[i] = next + b_[i + 1] * x - a_[i + 1] * y;
  }
}

double DtFilter::step(double x) {
  const double y = direct() * x + pending();
  commit(x, y);
  return y;
}

void DtFilter::set_coefficients(const DtTransferFunction& tf) {
  if (tf.den.size() != a_.size()) throw std::invalid_argument("DtFilter: order mismatch");
  load(tf);
}

void DtFilter::reset() { std::fill(state_.begin(), state_.end(), 0.0); }

void DtFilter::set_state(const std::vector<double>& s) {
  if (s.size() != state_.size()) throw std::invalid_argument("DtFilter: state size mismatch");
  state_ = s;
}

}  // namespace ctid

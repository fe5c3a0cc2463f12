#include "ctid/filter_bank.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace ctid {

namespace {

std::size_t hash_key(const std::vector<double>& coeffs, int ell, double ts) {
  std::size_t h = std::hash<int>{}(ell);
  auto mix = [&h](double x) {
    h ^= std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(x)) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
  };
  mix(ts);
  for (double c : coeffs) mix(c);
  return h;
}

}  // namespace

std::shared_ptr<const DiscreteMaps> DiscretizationCache::get(const Polynomial& a, int ell,
                                                             double sample_period) {
  const std::size_t h = hash_key(a.coeffs(), ell, sample_period);
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->hash == h && it->ell == ell && it->sample_period == sample_period &&
        it->coeffs == a.coeffs()) {
      ++hits_;
      auto maps = it->maps;
      if (std::next(it) != entries_.end()) {
        Entry e = std::move(*it);
        entries_.erase(it);
        entries_.push_back(std::move(e));
      }
      return maps;
    }
  }
  ++misses_;
  const Polynomial d = Polynomial::monomial(ell) * a;
  const int n = d.degree();
  auto maps = std::make_shared<DiscreteMaps>();
  if (n > 0) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    *maps = zoh_maps(companion_dynamics(d), b, sample_period);
  }
  if (entries_.size() >= capacity_ && !entries_.empty()) entries_.erase(entries_.begin());
  entries_.push_back({h, a.coeffs(), ell, sample_period, maps});
  return maps;
}

FilterBank::FilterBank(const Polynomial& a, int ell, int max_tap, double sample_period,
                       std::shared_ptr<DiscretizationCache> cache)
    : a_(a),
      ell_(ell),
      max_tap_(max_tap),
      order_(a.degree() + ell),
      sample_period_(sample_period),
      cache_(cache ? std::move(cache) : std::make_shared<DiscretizationCache>(4)) {
  if (!a.is_anti_monic()) throw std::invalid_argument("FilterBank: denominator must be anti-monic");
  if (ell < 0) throw std::invalid_argument("FilterBank: negative integrator count");
  if (!(sample_period > 0.0)) throw std::invalid_argument("FilterBank: sample period must be positive");
  if (max_tap < 0 || max_tap > order_) throw std::invalid_argument("FilterBank: max_tap out of range");
  state_ = Eigen::VectorXd::Zero(order_);
  scratch_ = Eigen::VectorXd::Zero(order_);
  taps_.assign(static_cast<std::size_t>(max_tap_) + 1, 0.0);
  rebuild();
}

void FilterBank::rebuild() {
  const Polynomial d = Polynomial::monomial(ell_) * a_;
  lead_ = d.leading();
  monic_.resize(static_cast<std::size_t>(order_));
  for (int j = 0; j < order_; ++j) monic_[static_cast<std::size_t>(j)] = d[j] / lead_;
  maps_ = cache_->get(a_, ell_, sample_period_);
}

void FilterBank::retune(const Polynomial& a) {
  if (a.degree() != a_.degree()) throw std::invalid_argument("FilterBank::retune: degree mismatch");
  if (!a.is_anti_monic()) throw std::invalid_argument("FilterBank::retune: denominator must be anti-monic");
  if (a == a_) return;
  a_ = a;
  rebuild();
}

void FilterBank::restore(const Snapshot& snap) {
  if (snap.state.size() != order_) throw std::invalid_argument("FilterBank::restore: snapshot dimension mismatch");
  state_ = snap.state;
  poisoned_ = false;
}

void FilterBank::poison() {
  poisoned_ = true;
  state_.setConstant(std::numeric_limits<double>::quiet_NaN());
  std::fill(taps_.begin(), taps_.end(), std::numeric_limits<double>::quiet_NaN());
}

void FilterBank::advance(double held) {
  if (!std::isfinite(held)) {
    poison();
    throw std::domain_error("FilterBank: non-finite input");
  }
  if (order_ == 0) return;
  scratch_.noalias() = maps_->transition * state_;
  state_ = scratch_ + maps_->input * (held / lead_);
}

std::span<const double> FilterBank::evaluate(double current) {
  if (!std::isfinite(current)) {
    poison();
    throw std::domain_error("FilterBank: non-finite input");
  }
  for (int j = 0; j <= max_tap_; ++j) {
    double v;
    if (j < order_) {
      v = state_(j);
    } else {
      v = current / lead_;
      for (int i = 0; i < order_; ++i) v -= monic_[static_cast<std::size_t>(i)] * state_(i);
    }
    taps_[static_cast<std::size_t>(j)] = v;
  }
  return taps_;
}

std::span<const double> FilterBank::step(double held, double current) {
  advance(held);
  return evaluate(current);
}

double FilterBank::l1_gain(int tap) const {
  if (tap < 0 || tap > max_tap_) throw std::invalid_argument("FilterBank::l1_gain: tap out of range");
  if (order_ == 0) return std::abs(1.0 / lead_);
  if (ell_ > 0) return std::numeric_limits<double>::infinity();
  for (const Complex& r : poles(a_, 0)) {
    if (!(r.real() < 0.0)) return std::numeric_limits<double>::infinity();
  }
  // Readout row of the tap and its feedthrough.
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(order_);
  double direct = 0.0;
  if (tap < order_) {
    c(tap) = 1.0;
  } else {
    for (int i = 0; i < order_; ++i) c(i) = -monic_[static_cast<std::size_t>(i)];
    direct = 1.0 / lead_;
  }
  double sum = std::abs(direct);
  Eigen::VectorXd x = maps_->input / lead_;
  const int max_steps = 10'000'000;
  for (int k = 0; k < max_steps; ++k) {
    sum += std::abs(c.dot(x));
    x = maps_->transition * x;
    if (x.lpNorm<Eigen::Infinity>() < 1e-18 * std::max(1.0, sum)) break;
  }
  return sum;
}

TransferFunctionFilter::TransferFunctionFilter(const Submodel& submodel, double sample_period,
                                               std::shared_ptr<DiscretizationCache> cache)
    : spec_(submodel.spec),
      theta_(submodel.theta),
      bank_(submodel.theta.denominator(), submodel.spec.ell, submodel.spec.m, sample_period,
            std::move(cache)) {}

double TransferFunctionFilter::step(double held, double current) {
  const auto taps = bank_.step(held, current);
  double y = 0.0;
  for (std::size_t j = 0; j < theta_.b.size(); ++j) y += theta_.b[j] * taps[j];
  return y;
}

double TransferFunctionFilter::proper_output() {
  const auto taps = bank_.evaluate(0.0);
  double y = 0.0;
  for (std::size_t j = 0; j < theta_.b.size(); ++j) y += theta_.b[j] * taps[j];
  return y;
}

double TransferFunctionFilter::feedthrough() const {
  if (spec_.m < bank_.order()) return 0.0;
  const Polynomial d = Polynomial::monomial(spec_.ell) * theta_.denominator();
  return theta_.b.back() / d.leading();
}

void TransferFunctionFilter::retune(const ThetaVector& theta) {
  if (theta.a.size() != theta_.a.size() || theta.b.size() != theta_.b.size()) {
    throw std::invalid_argument("TransferFunctionFilter::retune: layout mismatch");
  }
  bank_.retune(theta.denominator());
  theta_ = theta;
}

}  // namespace ctid

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "ctid/model.hpp"
#include "ctid/polynomial.hpp"
#include "ctid/state_space.hpp"

namespace ctid {

/// Small cache of ZOH maps keyed by (denominator coefficients, integrators,
/// sample period). Not thread-safe; share only between banks that live on the
/// same thread.
class DiscretizationCache {
 public:
  explicit DiscretizationCache(std::size_t capacity = 8) : capacity_(capacity) {}

  std::shared_ptr<const DiscreteMaps> get(const Polynomial& a, int ell, double sample_period);

  [[nodiscard]] std::size_t hits() const { return hits_; }
  [[nodiscard]] std::size_t misses() const { return misses_; }

 private:
  struct Entry {
    std::size_t hash;
    std::vector<double> coeffs;
    int ell;
    double sample_period;
    std::shared_ptr<const DiscreteMaps> maps;
  };

  std::size_t capacity_;
  std::vector<Entry> entries_;  // most recent last
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// State-variable filter producing the taps p^j / (p^ell A(p)) u for
/// j = 0 .. max_tap from one shared controllable-canonical state.
///
/// The state is advanced exactly over one sample period with the input held
/// constant (zero-order hold). State entry j is tap j itself, so the proper
/// taps stay continuous across a retune. The biproper tap j == deg(A) + ell
/// adds the direct feedthrough of the input value at the new sample instant.
class FilterBank {
 public:
  struct Snapshot {
    Eigen::VectorXd state;
  };

  FilterBank(const Polynomial& a, int ell, int max_tap, double sample_period,
             std::shared_ptr<DiscretizationCache> cache = nullptr);

  /// Advances with `input` held over the interval; feedthrough uses `input`.
  std::span<const double> step(double input) { return step(input, input); }
  /// Advances with `held` over the interval; feedthrough uses `current`.
  std::span<const double> step(double held, double current);

  /// Two-phase form of step() for callers that close an algebraic loop.
  void advance(double held);
  std::span<const double> evaluate(double current);

  /// Swaps in a new denominator of the same degree. The state is kept as is.
  void retune(const Polynomial& a);

  [[nodiscard]] Snapshot snapshot() const { return {state_}; }
  void restore(const Snapshot& snap);

  [[nodiscard]] const Polynomial& denominator() const { return a_; }
  [[nodiscard]] int integrators() const { return ell_; }
  [[nodiscard]] int max_tap() const { return max_tap_; }
  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] double sample_period() const { return sample_period_; }
  [[nodiscard]] std::span<const double> taps() const { return taps_; }
  [[nodiscard]] const Eigen::VectorXd& state() const { return state_; }
  [[nodiscard]] bool poisoned() const { return poisoned_; }

  /// Sum of |h_k| of the sampled impulse response of one tap (its BIBO gain
  /// for ZOH inputs). Infinite for unstable or marginal denominators.
  [[nodiscard]] double l1_gain(int tap) const;

 private:
  void rebuild();
  void poison();

  Polynomial a_;
  int ell_;
  int max_tap_;
  int order_;
  double sample_period_;
  std::shared_ptr<DiscretizationCache> cache_;
  std::shared_ptr<const DiscreteMaps> maps_;
  std::vector<double> monic_;  // d_0 .. d_{n-1} of the monic p^ell A
  double lead_ = 1.0;
  Eigen::VectorXd state_;
  Eigen::VectorXd scratch_;
  std::vector<double> taps_;
  bool poisoned_ = false;
};

/// B(p) / (p^ell A(p)) applied to a sampled input, built on a FilterBank.
class TransferFunctionFilter {
 public:
  TransferFunctionFilter(const Submodel& submodel, double sample_period,
                         std::shared_ptr<DiscretizationCache> cache = nullptr);

  double step(double held, double current);
  void advance(double held) { bank_.advance(held); }
  /// Output at the current instant excluding the feedthrough term.
  [[nodiscard]] double proper_output();
  [[nodiscard]] double feedthrough() const;

  void retune(const ThetaVector& theta);

  [[nodiscard]] FilterBank::Snapshot snapshot() const { return bank_.snapshot(); }
  void restore(const FilterBank::Snapshot& s) { bank_.restore(s); }
  [[nodiscard]] const FilterBank& bank() const { return bank_; }
  [[nodiscard]] const ThetaVector& theta() const { return theta_; }

 private:
  SubmodelSpec spec_;
  ThetaVector theta_;
  FilterBank bank_;
};

}  // namespace ctid

#pragma once

#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

namespace ctid {

using Complex = std::complex<double>;

/// Real polynomial in the differential operator p, stored in ascending
/// degree: coeffs()[0] is the constant term.
///
/// The degree is kept tight (leading coefficient nonzero). The zero
/// polynomial is the only exception and is stored as {0}.
class Polynomial {
 public:
  Polynomial();
  Polynomial(std::initializer_list<double> coeffs);
  explicit Polynomial(std::vector<double> coeffs);

  /// Monic-free expansion leading * prod (p - root). Conjugate roots must come
  /// in pairs; the imaginary residue of the expansion is dropped.
  static Polynomial from_roots(std::span<const Complex> roots, double leading = 1.0);

  static Polynomial monomial(int degree, double coeff = 1.0);

  [[nodiscard]] int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  [[nodiscard]] const std::vector<double>& coeffs() const { return coeffs_; }
  [[nodiscard]] double operator[](int i) const;
  [[nodiscard]] double leading() const { return coeffs_.back(); }
  [[nodiscard]] bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
  [[nodiscard]] bool is_anti_monic() const { return coeffs_[0] == 1.0; }

  [[nodiscard]] double operator()(double p) const;
  [[nodiscard]] Complex operator()(Complex p) const;

  [[nodiscard]] Polynomial derivative() const;
  /// Returns a copy scaled so that the constant coefficient is 1.
  [[nodiscard]] Polynomial anti_monic() const;

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& a);
  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  void trim();

  std::vector<double> coeffs_;
};

}  // namespace ctid

#include "ctid/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctid {

Polynomial::Polynomial() : coeffs_{0.0} {}

Polynomial::Polynomial(std::initializer_list<double> coeffs)
    : Polynomial(std::vector<double>(coeffs)) {}

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  for (double c : coeffs_) {
    if (!std::isfinite(c)) throw std::invalid_argument("Polynomial: non-finite coefficient");
  }
  trim();
}

Polynomial Polynomial::from_roots(std::span<const Complex> roots, double leading) {
  std::vector<Complex> c{Complex(leading)};
  for (const Complex& r : roots) {
    std::vector<Complex> next(c.size() + 1, Complex(0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] -= r * c[i];
      next[i + 1] += c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](const Complex& z) { return z.real(); });
  return Polynomial(std::move(out));
}

Polynomial Polynomial::monomial(int degree, double coeff) {
  std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
  c.back() = coeff;
  return Polynomial(std::move(c));
}

double Polynomial::operator[](int i) const {
  if (i < 0 || i > degree()) return 0.0;
  return coeffs_[static_cast<std::size_t>(i)];
}

double Polynomial::operator()(double p) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * p + *it;
  return acc;
}

Complex Polynomial::operator()(Complex p) const {
  Complex acc(0.0);
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * p + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (degree() == 0) return Polynomial();
  std::vector<double> d(coeffs_.size() - 1);
  for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = static_cast<double>(i) * coeffs_[i];
  return Polynomial(std::move(d));
}

Polynomial Polynomial::anti_monic() const {
  if (coeffs_[0] == 0.0) throw std::invalid_argument("anti_monic: zero constant coefficient");
  return (1.0 / coeffs_[0]) * *this;
}

void Polynomial::trim() {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
  while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
  for (std::size_t i = 0; i < a.coeffs_.size(); ++i) c[i] += a.coeffs_[i];
  for (std::size_t i = 0; i < b.coeffs_.size(); ++i) c[i] += b.coeffs_[i];
  return Polynomial(std::move(c));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
    for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
  }
  return Polynomial(std::move(c));
}

Polynomial operator*(double s, const Polynomial& a) {
  std::vector<double> c = a.coeffs_;
  for (double& x : c) x *= s;
  return Polynomial(std::move(c));
}

}  // namespace ctid

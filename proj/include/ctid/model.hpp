#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctid/polynomial.hpp"
#include "json.hpp"

namespace ctid {

/// Structure of one additive submodel B(p) / (p^ell A(p)).
struct SubmodelSpec {
  int n = 1;            ///< denominator order (degree of A)
  int m = 0;            ///< numerator order (degree of B)
  int ell = 0;          ///< integrators at the origin
  double lambda = 1.0;  ///< forgetting factor in (0, 1]

  [[nodiscard]] int n_theta() const { return n + m + 1; }
  [[nodiscard]] bool biproper() const { return n == m && ell == 0; }
  void validate() const;
};

/// Parameters [a_1 .. a_n, b_0 .. b_m]; A(p) = a_n p^n + ... + a_1 p + 1.
struct ThetaVector {
  std::vector<double> a;
  std::vector<double> b;

  [[nodiscard]] std::size_t size() const { return a.size() + b.size(); }
  [[nodiscard]] Polynomial denominator() const;
  [[nodiscard]] Polynomial numerator() const;
  [[nodiscard]] Eigen::VectorXd to_vector() const;
  static ThetaVector from_vector(const SubmodelSpec& spec, const Eigen::VectorXd& v);
  /// Builds a theta vector from an anti-monic denominator and a numerator,
  /// padding with zeros up to the orders in `spec`.
  static ThetaVector from_polynomials(const SubmodelSpec& spec, const Polynomial& b,
                                      const Polynomial& a);

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;
};

struct Submodel {
  SubmodelSpec spec;
  ThetaVector theta;
};

/// Ordered sum of submodels: G(p) = sum_i B_i / (p^ell_i A_i).
struct AdditiveModel {
  std::vector<Submodel> submodels;

  [[nodiscard]] std::size_t size() const { return submodels.size(); }
  /// Total order: sum of n_i + ell_i.
  [[nodiscard]] int order() const;
  /// Concatenated parameter vector beta.
  [[nodiscard]] Eigen::VectorXd beta() const;
  void set_beta(const Eigen::VectorXd& beta);
  /// Throws std::invalid_argument on any broken structural invariant.
  void validate() const;
};

/// Discrete-time transfer function in the forward shift q. Coefficients are
/// in descending degree; the numerator may carry leading zeros.
struct DtTransferFunction {
  std::vector<double> num;
  std::vector<double> den;
  double sample_period = 1.0;

  [[nodiscard]] Complex operator()(Complex q) const;
  void validate() const;
};

DtTransferFunction operator+(const DtTransferFunction& a, const DtTransferFunction& b);

/// Roots of p^ell A(p) with multiplicity, computed as companion-matrix
/// eigenvalues. A constant A with ell == 0 gives an empty sequence.
std::vector<Complex> poles(const Polynomial& a, int ell);

/// Reflects roots with positive real part into the left half plane and
/// renormalizes to an anti-monic polynomial. |A(jw)| is unchanged.
Polynomial project_stable(const Polynomial& a);

/// True when every root of A has a strictly negative real part.
bool is_stable(const Polynomial& a);

/// Exact ZOH equivalent of B(p) / (p^ell A(p)) at the given sample period.
DtTransferFunction zoh_discretize(const Polynomial& b, const Polynomial& a, int ell,
                                  double sample_period);

/// ZOH equivalent of a whole additive model (sum of per-submodel equivalents).
DtTransferFunction zoh_discretize(const AdditiveModel& model, double sample_period);

/// (B, A) of the unfactored sum over the common denominator prod p^ell_i A_i.
std::pair<Polynomial, Polynomial> additive_sum(const AdditiveModel& model);

/// Real partial fraction expansion: first-order submodels for real poles and
/// second-order submodels for complex pairs. A direct term, if any, is folded
/// into the first submodel which then becomes biproper.
/// Throws UnsupportedStructure on repeated poles or poles at the origin.
AdditiveModel partial_fractions(const Polynomial& b, const Polynomial& a);

/// sum r_i - r - (K - 1), with r_i = n_i - m_i. `r` is the relative degree of
/// the unfactored model; it defaults to min r_i.
int parsimony_surplus(std::span<const std::pair<int, int>> degrees,
                      std::optional<int> unfactored_relative_degree = std::nullopt);

/// G(jw) for each frequency. A pole at the origin evaluated at w == 0 is
/// reported as an infinite real value.
std::vector<Complex> freq_response(const AdditiveModel& model, std::span<const double> omegas);

/// Serialized as a JSON array of {n, m, ell, lambda, a, b}.
nlohmann::json to_json(const AdditiveModel& model);
AdditiveModel model_from_json(const nlohmann::json& j);

}  // namespace ctid

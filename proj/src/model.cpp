#include "ctid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ctid/errors.hpp"
#include "ctid/state_space.hpp"

namespace ctid {

namespace {

constexpr double kAxisTolerance = 1e-12;

std::vector<double> pad_front(const std::vector<double>& v, std::size_t len) {
  std::vector<double> out(len - v.size(), 0.0);
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<double> poly_mul_desc(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  }
  return c;
}

std::vector<double> poly_add_desc(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t len = std::max(a.size(), b.size());
  std::vector<double> pa = pad_front(a, len);
  const std::vector<double> pb = pad_front(b, len);
  for (std::size_t i = 0; i < len; ++i) pa[i] += pb[i];
  return pa;
}

}  // namespace

void SubmodelSpec::validate() const {
  if (n < 0 || m < 0) throw std::invalid_argument("submodel orders must be non-negative");
  if (n < m) throw std::invalid_argument("submodel must be proper (n >= m)");
  if (ell < 0) throw std::invalid_argument("integrator count must be non-negative");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("forgetting factor must lie in (0, 1]");
}

Polynomial ThetaVector::denominator() const {
  std::vector<double> c{1.0};
  c.insert(c.end(), a.begin(), a.end());
  return Polynomial(std::move(c));
}

Polynomial ThetaVector::numerator() const { return Polynomial(b); }

Eigen::VectorXd ThetaVector::to_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  for (double x : a) v(k++) = x;
  for (double x : b) v(k++) = x;
  return v;
}

ThetaVector ThetaVector::from_vector(const SubmodelSpec& spec, const Eigen::VectorXd& v) {
  if (v.size() != spec.n_theta()) throw std::invalid_argument("theta length does not match submodel orders");
  ThetaVector t;
  t.a.assign(v.data(), v.data() + spec.n);
  t.b.assign(v.data() + spec.n, v.data() + v.size());
  return t;
}

ThetaVector ThetaVector::from_polynomials(const SubmodelSpec& spec, const Polynomial& b,
                                          const Polynomial& a) {
  if (!a.is_anti_monic()) throw std::invalid_argument("denominator must be anti-monic");
  if (a.degree() > spec.n || b.degree() > spec.m) {
    throw std::invalid_argument("polynomial degree exceeds submodel order");
  }
  ThetaVector t;
  t.a.resize(static_cast<std::size_t>(spec.n));
  t.b.resize(static_cast<std::size_t>(spec.m) + 1);
  for (int j = 1; j <= spec.n; ++j) t.a[static_cast<std::size_t>(j - 1)] = a[j];
  for (int j = 0; j <= spec.m; ++j) t.b[static_cast<std::size_t>(j)] = b[j];
  return t;
}

int AdditiveModel::order() const {
  int total = 0;
  for (const auto& s : submodels) total += s.spec.n + s.spec.ell;
  return total;
}

Eigen::VectorXd AdditiveModel::beta() const {
  std::size_t len = 0;
  for (const auto& s : submodels) len += s.theta.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(len));
  Eigen::Index k = 0;
  for (const auto& s : submodels) {
    const Eigen::VectorXd t = s.theta.to_vector();
    out.segment(k, t.size()) = t;
    k += t.size();
  }
  return out;
}

void AdditiveModel::set_beta(const Eigen::VectorXd& beta) {
  Eigen::Index k = 0;
  for (auto& s : submodels) {
    const Eigen::Index len = s.spec.n_theta();
    if (k + len > beta.size()) throw std::invalid_argument("beta too short for model structure");
    s.theta = ThetaVector::from_vector(s.spec, beta.segment(k, len));
    k += len;
  }
  if (k != beta.size()) throw std::invalid_argument("beta too long for model structure");
}

void AdditiveModel::validate() const {
  if (submodels.empty()) throw std::invalid_argument("additive model needs at least one submodel");
  int biproper = 0;
  for (std::size_t i = 0; i < submodels.size(); ++i) {
    const auto& s = submodels[i];
    s.spec.validate();
    if (s.spec.ell > 0 && i != 0) {
      throw std::invalid_argument("only the first submodel may carry integrators");
    }
    if (s.theta.a.size() != static_cast<std::size_t>(s.spec.n) ||
        s.theta.b.size() != static_cast<std::size_t>(s.spec.m) + 1) {
      throw std::invalid_argument("theta layout does not match submodel orders");
    }
    for (double x : s.theta.a) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite denominator coefficient");
    }
    for (double x : s.theta.b) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite numerator coefficient");
    }
    if (s.spec.n > 0 && s.theta.a.back() == 0.0) {
      throw std::invalid_argument("leading denominator coefficient must be nonzero");
    }
    if (s.spec.biproper()) ++biproper;
  }
  if (biproper > 1) throw std::invalid_argument("at most one submodel may be biproper");
}

Complex DtTransferFunction::operator()(Complex q) const {
  auto eval = [&](const std::vector<double>& c) {
    Complex acc(0.0);
    for (double x : c) acc = acc * q + x;
    return acc;
  };
  return eval(num) / eval(den);
}

void DtTransferFunction::validate() const {
  if (den.empty() || den.front() == 0.0) throw std::invalid_argument("DT denominator leading coefficient must be nonzero");
  if (num.size() > den.size()) throw std::invalid_argument("DT transfer function must be proper");
  if (!(sample_period > 0.0)) throw std::invalid_argument("sample period must be positive");
}

DtTransferFunction operator+(const DtTransferFunction& a, const DtTransferFunction& b) {
  if (a.sample_period != b.sample_period) throw std::invalid_argument("sample periods differ");
  DtTransferFunction out;
  out.sample_period = a.sample_period;
  out.den = poly_mul_desc(a.den, b.den);
  out.num = poly_add_desc(poly_mul_desc(a.num, b.den), poly_mul_desc(b.num, a.den));
  out.num = pad_front(out.num, std::max(out.num.size(), out.den.size()));
  return out;
}

std::vector<Complex> poles(const Polynomial& a, int ell) {
  if (ell < 0) throw std::invalid_argument("poles: negative integrator count");
  std::vector<Complex> out;
  if (a.degree() > 0) {
    const Eigen::MatrixXd c = companion_dynamics(a);
    Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  }
  out.insert(out.end(), static_cast<std::size_t>(ell), Complex(0.0));
  return out;
}

Polynomial project_stable(const Polynomial& a) {
  if (a.degree() == 0) return a;
  std::vector<Complex> roots = poles(a, 0);
  bool reflected = false;
  for (Complex& r : roots) {
    if (r.real() > kAxisTolerance * std::abs(r)) {
      r = Complex(-r.real(), r.imag());
      reflected = true;
    }
  }
  if (!reflected) return a;
  if (a[0] == 0.0) return Polynomial::from_roots(roots, a.leading());
  // prod (1 - p / r) keeps the constant term exact even when the roots are huge
  std::vector<Complex> c{Complex(1.0)};
  for (const Complex& r : roots) {
    const Complex inv = 1.0 / r;
    std::vector<Complex> next(c.size() + 1, Complex(0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= inv * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](const Complex& z) { return z.real(); });
  return Polynomial(std::move(out));
}

bool is_stable(const Polynomial& a) {
  for (const Complex& r : poles(a, 0)) {
    if (!(r.real() < 0.0)) return false;
  }
  return true;
}

DtTransferFunction zoh_discretize(const Polynomial& b, const Polynomial& a, int ell,
                                  double sample_period) {
  if (!(sample_period > 0.0)) throw std::invalid_argument("zoh_discretize: sample period must be positive");
  if (ell < 0) throw std::invalid_argument("zoh_discretize: negative integrator count");
  const Polynomial d = Polynomial::monomial(ell) * a;
  const int n = d.degree();
  if (b.degree() > n && !b.is_zero()) throw std::invalid_argument("zoh_discretize: improper transfer function");

  DtTransferFunction out;
  out.sample_period = sample_period;
  if (n == 0) {
    out.num = {b[0] / d[0]};
    out.den = {1.0};
    return out;
  }

  const double lead = d.leading();
  const double direct = b[n] / lead;
  Eigen::RowVectorXd c(n);
  for (int j = 0; j < n; ++j) c(j) = b[j] / lead - direct * d[j] / lead;

  const Eigen::MatrixXd ac = companion_dynamics(d);
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(n);
  bc(n - 1) = 1.0;
  const DiscreteMaps maps = zoh_maps(ac, bc, sample_period);

  const std::vector<double> den = characteristic_polynomial(maps.transition);
  const std::vector<double> shifted =
      characteristic_polynomial(maps.transition - maps.input * c);
  out.den = den;
  out.num.resize(den.size());
  for (std::size_t i = 0; i < den.size(); ++i) out.num[i] = shifted[i] - den[i] + direct * den[i];
  out.num[0] = direct;
  return out;
}

DtTransferFunction zoh_discretize(const AdditiveModel& model, double sample_period) {
  model.validate();
  DtTransferFunction acc;
  bool first = true;
  for (const auto& s : model.submodels) {
    DtTransferFunction g = zoh_discretize(s.theta.numerator(), s.theta.denominator(), s.spec.ell,
                                          sample_period);
    acc = first ? g : acc + g;
    first = false;
  }
  return acc;
}

std::pair<Polynomial, Polynomial> additive_sum(const AdditiveModel& model) {
  model.validate();
  std::vector<Polynomial> dens;
  dens.reserve(model.size());
  for (const auto& s : model.submodels) {
    dens.push_back(Polynomial::monomial(s.spec.ell) * s.theta.denominator());
  }
  Polynomial den{1.0};
  for (const auto& d : dens) den = den * d;
  Polynomial num;
  for (std::size_t i = 0; i < model.size(); ++i) {
    Polynomial term = model.submodels[i].theta.numerator();
    for (std::size_t j = 0; j < model.size(); ++j) {
      if (j != i) term = term * dens[j];
    }
    num = num + term;
  }
  return {num, den};
}

AdditiveModel partial_fractions(const Polynomial& b, const Polynomial& a) {
  if (a.degree() < 1) throw std::invalid_argument("partial_fractions: denominator must have degree >= 1");
  if (b.degree() > a.degree()) throw std::invalid_argument("partial_fractions: improper transfer function");
  if (a[0] == 0.0) throw UnsupportedStructure("partial_fractions: pole at the origin");

  const double direct = b.degree() == a.degree() ? b.leading() / a.leading() : 0.0;
  const Polynomial rem = b - direct * a;
  const Polynomial da = a.derivative();

  std::vector<Complex> roots = poles(a, 0);
  std::sort(roots.begin(), roots.end(), [](const Complex& x, const Complex& y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) < std::abs(y);
    return x.imag() > y.imag();
  });
  for (std::size_t i = 0; i < roots.size(); ++i) {
    for (std::size_t j = i + 1; j < roots.size(); ++j) {
      if (std::abs(roots[i] - roots[j]) < 1e-6 * std::max(1.0, std::abs(roots[i]))) {
        throw UnsupportedStructure("partial_fractions: repeated poles are not supported");
      }
    }
  }

  AdditiveModel out;
  const double imag_tol = 1e-9;
  for (const Complex& r : roots) {
    const double scale = std::max(1.0, std::abs(r));
    if (std::abs(r.imag()) <= imag_tol * scale) {
      const double rho = r.real();
      const double c = rem(rho) / da(rho);
      Submodel s;
      s.spec = {1, 0, 0, 1.0};
      s.theta.a = {-1.0 / rho};
      s.theta.b = {-c / rho};
      out.submodels.push_back(std::move(s));
    } else if (r.imag() > 0.0) {
      const Complex c = rem(r) / da(r);
      const double mag2 = std::norm(r);
      Submodel s;
      s.spec = {2, 1, 0, 1.0};
      s.theta.a = {-2.0 * r.real() / mag2, 1.0 / mag2};
      s.theta.b = {-2.0 * (c * std::conj(r)).real() / mag2, 2.0 * c.real() / mag2};
      out.submodels.push_back(std::move(s));
    }
  }

  if (direct != 0.0) {
    auto& first = out.submodels.front();
    const Polynomial num = first.theta.numerator() + direct * first.theta.denominator();
    first.spec.m = first.spec.n;
    first.theta = ThetaVector::from_polynomials(first.spec, num, first.theta.denominator());
  }
  return out;
}

int parsimony_surplus(std::span<const std::pair<int, int>> degrees,
                      std::optional<int> unfactored_relative_degree) {
  if (degrees.empty()) throw std::invalid_argument("parsimony_surplus: empty submodel list");
  int sum = 0;
  int min_r = std::numeric_limits<int>::max();
  for (const auto& [n, m] : degrees) {
    if (n < m || m < 0) throw std::invalid_argument("parsimony_surplus: submodel must satisfy n >= m >= 0");
    sum += n - m;
    min_r = std::min(min_r, n - m);
  }
  const int r = unfactored_relative_degree.value_or(min_r);
  const int k = static_cast<int>(degrees.size());
  return sum - r - (k - 1);
}

std::vector<Complex> freq_response(const AdditiveModel& model, std::span<const double> omegas) {
  model.validate();
  std::vector<Complex> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("freq_response: frequencies must be finite and nonnegative");
    Complex g(0.0);
    bool infinite = false;
    const Complex jw(0.0, w);
    for (const auto& s : model.submodels) {
      if (s.spec.ell > 0 && w == 0.0) {
        infinite = true;
        continue;
      }
      g += s.theta.numerator()(jw) / (std::pow(jw, s.spec.ell) * s.theta.denominator()(jw));
    }
    out.push_back(infinite ? Complex(std::numeric_limits<double>::infinity(), 0.0) : g);
  }
  return out;
}

nlohmann::json to_json(const AdditiveModel& model) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : model.submodels) {
    arr.push_back({{"n", s.spec.n},
                   {"m", s.spec.m},
                   {"ell", s.spec.ell},
                   {"lambda", s.spec.lambda},
                   {"a", s.theta.a},
                   {"b", s.theta.b}});
  }
  return arr;
}

AdditiveModel model_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("additive model JSON must be an array");
  AdditiveModel model;
  for (const auto& e : j) {
    Submodel s;
    s.spec.n = e.at("n").get<int>();
    s.spec.m = e.at("m").get<int>();
    s.spec.ell = e.value("ell", 0);
    s.spec.lambda = e.value("lambda", 1.0);
    s.theta.a = e.at("a").get<std::vector<double>>();
    s.theta.b = e.at("b").get<std::vector<double>>();
    model.submodels.push_back(std::move(s));
  }
  model.validate();
  return model;
}

}  // namespace ctid

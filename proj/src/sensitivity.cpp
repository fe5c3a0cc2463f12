#include "ctid/sensitivity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace ctid {

SensitivityFilter::SensitivityFilter(const AdditiveModel& model, const DtTransferFunction& controller,
                                     double sample_period)
    : model_(model), controller_tf_(controller), sample_period_(sample_period), controller_(controller) {
  model_.validate();
  parts_.reserve(model_.size());
  for (const Submodel& s : model_.submodels) parts_.emplace_back(s, sample_period);
}

void SensitivityFilter::set_model(const AdditiveModel& model) {
  if (model.size() != parts_.size()) throw std::invalid_argument("SensitivityFilter: submodel count changed");
  for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].retune(model.submodels[i].theta);
  model_ = model;
}

double SensitivityFilter::step(double r) {
  if (started_) {
    for (auto& p : parts_) p.advance(z_prev_);
  }
  started_ = true;
  double proper = 0.0, direct = 0.0;
  for (auto& p : parts_) {
    proper += p.proper_output();
    direct += p.feedthrough();
  }
  const double c0 = controller_.direct();
  const double z = (c0 * (r - proper) + controller_.pending()) / (1.0 + c0 * direct);
  controller_.commit(r - (proper + direct * z), z);
  z_prev_ = z;
  return z;
}

double SensitivityFilter::loop_spectral_radius() const {
  // Closed-loop characteristic polynomial den_C den_G + num_C num_G.
  const DtTransferFunction g = zoh_discretize(model_, sample_period_);
  auto mul = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    }
    return c;
  };
  std::vector<double> p1 = mul(controller_tf_.den, g.den);
  std::vector<double> p2 = mul(controller_tf_.num, g.num);
  const std::size_t len = std::max(p1.size(), p2.size());
  std::vector<double> c(len, 0.0);
  for (std::size_t i = 0; i < p1.size(); ++i) c[len - p1.size() + i] += p1[i];
  for (std::size_t i = 0; i < p2.size(); ++i) c[len - p2.size() + i] += p2[i];
  std::size_t lead = 0;
  while (lead < c.size() && c[lead] == 0.0) ++lead;
  const auto deg = static_cast<Eigen::Index>(c.size() - lead - 1);
  if (deg <= 0) return 0.0;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (Eigen::Index j = 0; j < deg; ++j) comp(0, j) = -c[lead + 1 + static_cast<std::size_t>(j)] / c[lead];
  for (Eigen::Index j = 1; j < deg; ++j) comp(j, j - 1) = 1.0;
  const Eigen::VectorXcd ev = comp.eigenvalues();
  return ev.cwiseAbs().maxCoeff();
}

}  // namespace ctid

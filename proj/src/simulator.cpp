#include "ctid/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctid/dt_filter.hpp"
#include "ctid/random.hpp"

namespace ctid {

ParameterSchedule::ParameterSchedule(AdditiveModel base, std::vector<Ramp> ramps)
    : base_(std::move(base)), ramps_(std::move(ramps)) {
  base_.validate();
  for (const Ramp& r : ramps_) {
    if (r.submodel >= base_.size()) throw std::invalid_argument("Ramp: submodel index out of range");
    if (r.parameter >= base_.submodels[r.submodel].theta.size()) {
      throw std::invalid_argument("Ramp: parameter index out of range");
    }
    if (!(r.t_end >= r.t_start)) throw std::invalid_argument("Ramp: t_end before t_start");
  }
  std::stable_sort(ramps_.begin(), ramps_.end(),
                   [](const Ramp& a, const Ramp& b) { return a.t_start < b.t_start; });
}

AdditiveModel ParameterSchedule::at(double t) const {
  AdditiveModel m = base_;
  for (const Ramp& r : ramps_) {
    if (t < r.t_start) continue;
    double v = r.to;
    if (t < r.t_end) v = r.from + (r.to - r.from) * (t - r.t_start) / (r.t_end - r.t_start);
    ThetaVector& th = m.submodels[r.submodel].theta;
    if (r.parameter < th.a.size()) {
      th.a[r.parameter] = v;
    } else {
      th.b[r.parameter - th.a.size()] = v;
    }
  }
  return m;
}

Plant::Plant(const AdditiveModel& model, double sample_period) {
  model.validate();
  parts_.reserve(model.size());
  for (const Submodel& s : model.submodels) parts_.emplace_back(s, sample_period);
}

void Plant::set_parameters(const AdditiveModel& model) {
  if (model.size() != parts_.size()) throw std::invalid_argument("Plant: submodel count changed");
  for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].retune(model.submodels[i].theta);
}

double Plant::proper_output() {
  double x = 0.0;
  for (auto& p : parts_) x += p.proper_output();
  return x;
}

double Plant::feedthrough() const {
  double d = 0.0;
  for (const auto& p : parts_) d += p.feedthrough();
  return d;
}

double Plant::output(double u) { return proper_output() + feedthrough() * u; }

void Plant::advance(double u) {
  for (auto& p : parts_) p.advance(u);
}

std::size_t Scenario::sample_count() const {
  if (duration <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(duration / sample_period));
}

void Scenario::validate() const {
  plant.base().validate();
  if (!(sample_period > 0.0)) throw std::invalid_argument("Scenario: sample period must be positive");
  if (!(duration >= 0.0)) throw std::invalid_argument("Scenario: negative duration");
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("Scenario: negative noise variance");
  if (!(excitation_stddev >= 0.0)) throw std::invalid_argument("Scenario: negative excitation level");
  if (!setpoint) throw std::invalid_argument("Scenario: missing setpoint");
  if (controller) {
    controller->validate();
    if (controller->num.size() > controller->den.size()) {
      throw std::invalid_argument("Scenario: controller must be proper");
    }
  }
}

void Record::reserve(std::size_t n) {
  for (auto* v : {&t, &r, &u, &y, &x}) v->reserve(n);
  beta.reserve(n);
}

namespace {

struct Signals {
  CounterRng noise;
  CounterRng dither;
  double sigma;
  double dither_sigma;

  explicit Signals(const Scenario& s)
      : noise(s.seed, streams::noise),
        dither(s.seed, streams::excitation),
        sigma(std::sqrt(s.noise_variance)),
        dither_sigma(s.excitation_stddev) {}

  [[nodiscard]] double v(std::size_t k) const { return sigma == 0.0 ? 0.0 : sigma * noise.normal(k); }
  [[nodiscard]] double excitation(const Scenario& s, std::size_t k, double t) const {
    const double base = s.setpoint(t);
    return dither_sigma == 0.0 ? base : base + dither_sigma * dither.normal(k);
  }
};

Record start_record(const Scenario& s) {
  Record rec;
  rec.sample_period = s.sample_period;
  for (const auto& sm : s.plant.base().submodels) rec.specs.push_back(sm.spec);
  rec.reserve(s.sample_count());
  return rec;
}

bool blown_up(double v) { return !std::isfinite(v) || std::abs(v) > 1e100; }

template <typename InputLaw>
Record run(const Scenario& scenario, InputLaw&& input_law) {
  scenario.validate();
  Record rec = start_record(scenario);
  const Signals sig(scenario);
  Plant plant(scenario.plant.base(), scenario.sample_period);
  const std::size_t n = scenario.sample_count();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * scenario.sample_period;
    const AdditiveModel params = scenario.plant.at(t);
    if (scenario.plant.time_varying()) plant.set_parameters(params);
    const double r = sig.excitation(scenario, k, t);
    const double v = sig.v(k);
    const double xp = plant.proper_output();
    const double d = plant.feedthrough();
    const double u = input_law(r, xp, d, v);
    const double x = xp + d * u;
    const double y = x + v;
    if (blown_up(u) || blown_up(y)) {
      rec.diverged = true;
      break;
    }
    rec.t.push_back(t);
    rec.r.push_back(r);
    rec.u.push_back(u);
    rec.x.push_back(x);
    rec.y.push_back(y);
    rec.beta.push_back(params.beta());
    plant.advance(u);
  }
  return rec;
}

}  // namespace

Record run_open_loop(const Scenario& scenario) {
  return run(scenario, [](double r, double, double, double) { return r; });
}

Record run_closed_loop(const Scenario& scenario) {
  if (!scenario.controller) throw std::invalid_argument("run_closed_loop: scenario has no controller");
  DtFilter controller(*scenario.controller);
  return run(scenario, [&controller](double r, double xp, double d, double v) {
    const double c0 = controller.direct();
    const double denom = 1.0 + c0 * d;
    if (denom == 0.0) throw std::runtime_error("run_closed_loop: ill-posed algebraic loop");
    const double u = (c0 * (r - xp - v) + controller.pending()) / denom;
    const double e = r - (xp + d * u + v);
    controller.commit(e, u);
    return u;
  });
}

Record simulate(const Scenario& scenario) {
  return scenario.closed_loop() ? run_closed_loop(scenario) : run_open_loop(scenario);
}

DtTransferFunction section5_controller(ControllerVariant variant) {
  const double middle = variant == ControllerVariant::printed ? -0.2058 : -0.02058;
  return {{0.02329, middle, 0.00454}, {1.0, -1.0, 0.0}, 0.05};
}

AdditiveModel section5_plant() {
  const double lambda = 0.999;
  AdditiveModel m;
  m.submodels.push_back({{2, 0, 0, lambda}, {{0.25, 0.25}, {3.0}}});
  m.submodels.push_back({{2, 0, 0, lambda}, {{0.01, 0.04}, {0.5}}});
  m.submodels.push_back({{2, 0, 0, lambda}, {{0.01, 0.0025}, {1.0}}});
  return m;
}

Scenario scenario_section5(const Section5Options& options) {
  const AdditiveModel plant = section5_plant();
  const double up = 1.0 + options.ramp_fraction;
  const double down = 1.0 - options.ramp_fraction;
  auto ramp = [&](std::size_t i, std::size_t j, double t0, double t1, double factor) {
    const double v0 = plant.submodels[i].theta.to_vector()(static_cast<Eigen::Index>(j));
    return Ramp{i, j, t0, t1, v0, v0 * factor};
  };
  std::vector<Ramp> ramps{
      ramp(0, 0, 100, 300, up),   ramp(0, 1, 100, 300, up),   ramp(1, 0, 100, 300, down),
      ramp(2, 1, 500, 800, up),   ramp(2, 0, 500, 800, down),
  };

  Scenario s;
  s.name = "section5";
  s.plant = ParameterSchedule(plant, std::move(ramps));
  s.controller = section5_controller(options.controller);
  s.setpoint = [](double t) {
    return 3 * std::sin(0.005 * t) + std::sin(2 * t) + std::sin(5 * t) + std::sin(17.5 * t);
  };
  s.noise_variance = 0.01;
  s.sample_period = 0.05;
  s.duration = options.duration;
  s.seed = options.seed;
  s.init_perturbation = 0.02;
  Eigen::VectorXd diag(3);
  diag << 1e-3, 1e-3, 1e-5;
  s.covariance_diagonal.assign(3, diag);
  return s;
}

}  // namespace ctid

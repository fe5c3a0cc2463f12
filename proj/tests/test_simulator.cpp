#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <numeric>

#include "ctid/random.hpp"
#include "ctid/sensitivity.hpp"
#include "ctid/simulator.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctid;
using ctid::testing::rel_err;

namespace {

AdditiveModel single(SubmodelSpec spec, ThetaVector theta) {
  AdditiveModel m;
  m.submodels.push_back({spec, std::move(theta)});
  return m;
}

Scenario open_loop_step(const AdditiveModel& model, double duration) {
  Scenario s;
  s.plant = ParameterSchedule(model);
  s.setpoint = [](double) { return 1.0; };
  s.duration = duration;
  return s;
}

// Second-order mode b / (a2 p^2 + a1 p + 1) in position/velocity coordinates,
// discretized through the exponential of the augmented matrix.
struct ModeZoh {
  Eigen::Matrix2d ad;
  Eigen::Vector2d bd;
  Eigen::Vector2d s = Eigen::Vector2d::Zero();

  ModeZoh(double a1, double a2, double b, double ts) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 1) = 1.0;
    m(1, 0) = -1.0 / a2;
    m(1, 1) = -a1 / a2;
    m(1, 2) = b / a2;
    const Eigen::Matrix3d e = (m * ts).exp();
    ad = e.topLeftCorner<2, 2>();
    bd = e.topRightCorner<2, 1>();
  }
};

}  // namespace

TEST_CASE("plant_step closed forms") {
  SUBCASE("static gain") {
    const auto rec = simulate(open_loop_step(single({0, 0, 0, 1.0}, {{}, {2.0}}), 1.0));
    for (double x : rec.x) CHECK(x == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("first-order step") {
    const auto rec = simulate(open_loop_step(single({1, 0, 0, 1.0}, {{0.25}, {1.0}}), 5.0));
    REQUIRE(rec.size() == 100);
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const double want = 1.0 - std::exp(-rec.t[k] / 0.25);
      CHECK(std::abs(rec.x[k] - want) < 1e-12);
    }
  }
  SUBCASE("gain doubling mid-run") {
    AdditiveModel base = single({1, 0, 0, 1.0}, {{0.5}, {1.0}});
    Scenario s = open_loop_step(base, 10.0);
    s.plant = ParameterSchedule(base, {Ramp{0, 1, 5.0, 5.0, 1.0, 2.0}});
    const auto rec = simulate(s);
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const double gain = rec.t[k] < 5.0 ? 1.0 : 2.0;
      CHECK(std::abs(rec.x[k] - gain * (1.0 - std::exp(-rec.t[k] / 0.5))) < 1e-12);
    }
    CHECK(rec.x.back() == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("parameter schedule interpolates linearly and holds the end value") {
  const Scenario s = scenario_section5();
  const AdditiveModel& base = s.plant.base();
  CHECK(s.plant.at(50.0).beta() == base.beta());
  const AdditiveModel mid = s.plant.at(200.0);
  CHECK(mid.submodels[0].theta.a[0] == doctest::Approx(0.25 * 1.15));
  CHECK(mid.submodels[0].theta.a[1] == doctest::Approx(0.25 * 1.15));
  CHECK(mid.submodels[1].theta.a[0] == doctest::Approx(0.01 * 0.85));
  const AdditiveModel end = s.plant.at(1000.0);
  CHECK(end.submodels[0].theta.a[0] == doctest::Approx(0.325));
  CHECK(end.submodels[1].theta.a[0] == doctest::Approx(0.007));
  CHECK(end.submodels[2].theta.a[0] == doctest::Approx(0.007));
  CHECK(end.submodels[2].theta.a[1] == doctest::Approx(0.00325));
  for (int i = 0; i < 3; ++i) CHECK(end.submodels[static_cast<std::size_t>(i)].theta.b == base.submodels[static_cast<std::size_t>(i)].theta.b);

  CHECK_THROWS_AS(ParameterSchedule(base, {Ramp{3, 0, 0, 1, 0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(ParameterSchedule(base, {Ramp{0, 3, 0, 1, 0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(ParameterSchedule(base, {Ramp{0, 0, 2, 1, 0, 1}}), std::invalid_argument);
}

TEST_CASE("section5 scenario constants") {
  const Scenario s = scenario_section5();
  const auto printed = section5_controller(ControllerVariant::printed);
  CHECK(printed.num == std::vector<double>{0.02329, -0.2058, 0.00454});
  CHECK(printed.den == std::vector<double>{1.0, -1.0, 0.0});
  REQUIRE(s.controller);
  CHECK(s.controller->num[1] == -0.02058);
  CHECK(s.noise_variance == 0.01);
  CHECK(s.sample_period == 0.05);
  CHECK(s.sample_count() == 20000);
  CHECK(s.init_perturbation == 0.02);
  const AdditiveModel& m = s.plant.base();
  REQUIRE(m.size() == 3);
  const double dc[] = {3, 0.5, 1}, a2[] = {0.25, 0.04, 0.0025}, a1[] = {0.25, 0.01, 0.01};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.submodels[i].spec.lambda == 0.999);
    CHECK(m.submodels[i].theta.b[0] == dc[i]);
    CHECK(m.submodels[i].theta.a[1] == a2[i]);
    CHECK(m.submodels[i].theta.a[0] == a1[i]);
    CHECK(s.covariance_diagonal[i](0) == 1e-3);
    CHECK(s.covariance_diagonal[i](1) == 1e-3);
    CHECK(s.covariance_diagonal[i](2) == 1e-5);
  }
  const double t = 12.3;
  CHECK(s.setpoint(t) == doctest::Approx(3 * std::sin(0.005 * t) + std::sin(2 * t) + std::sin(5 * t) +
                                         std::sin(17.5 * t)));
}

TEST_CASE("printed section5 controller destabilizes the plant") {
  Section5Options o;
  o.controller = ControllerVariant::printed;
  o.duration = 200.0;
  const Scenario s = scenario_section5(o);
  const SensitivityFilter loop(s.plant.base(), *s.controller, s.sample_period);
  CHECK(loop.loop_spectral_radius() == doctest::Approx(1.2496).epsilon(1e-3));
  const Record rec = simulate(s);
  CHECK(rec.diverged);
  CHECK(rec.size() < s.sample_count());

  const SensitivityFilter stable(s.plant.base(), section5_controller(ControllerVariant::stabilized), 0.05);
  CHECK(stable.loop_spectral_radius() < 1.0);
}

TEST_CASE("quiescent closed loop stays at zero") {
  Scenario s = scenario_section5();
  s.noise_variance = 0.0;
  s.setpoint = [](double) { return 0.0; };
  s.duration = 50.0;
  const Record rec = simulate(s);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    CHECK(rec.y[k] == 0.0);
    CHECK(rec.u[k] == 0.0);
  }
}

TEST_CASE("records are deterministic per seed") {
  Section5Options o;
  o.duration = 100.0;
  o.seed = 42;
  const Record a = simulate(scenario_section5(o));
  const Record b = simulate(scenario_section5(o));
  CHECK(a.y == b.y);
  CHECK(a.u == b.u);
  o.seed = 43;
  const Record c = simulate(scenario_section5(o));
  CHECK(a.y != c.y);
}

TEST_CASE("closed loop matches a difference-equation reference") {
  for (double variance : {0.0, 0.01}) {
    CAPTURE(variance);
    Section5Options o;
    o.duration = 200.0;
    Scenario s = scenario_section5(o);
    s.plant = ParameterSchedule(s.plant.base());
    s.noise_variance = variance;
    const Record rec = simulate(s);
    REQUIRE(!rec.diverged);

    std::vector<ModeZoh> modes;
    for (const Submodel& sm : s.plant.base().submodels) {
      modes.emplace_back(sm.theta.a[0], sm.theta.a[1], sm.theta.b[0], s.sample_period);
    }
    const CounterRng noise(s.seed, streams::noise);
    const auto& c = s.controller->num;
    double u_prev = 0.0, e1 = 0.0, e2 = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const double t = static_cast<double>(k) * s.sample_period;
      double x = 0.0;
      for (const ModeZoh& m : modes) x += m.s(0);
      const double y = x + std::sqrt(variance) * noise.normal(k);
      const double e = s.setpoint(t) - y;
      const double u = u_prev + c[0] * e + c[1] * e1 + c[2] * e2;
      worst = std::max(worst, std::abs(rec.y[k] - y) / std::max(1.0, std::abs(y)));
      worst = std::max(worst, std::abs(rec.u[k] - u) / std::max(1.0, std::abs(u)));
      for (ModeZoh& m : modes) m.s = m.ad * m.s + m.bd * u;
      e2 = e1;
      e1 = e;
      u_prev = u;
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("noise sequence has the requested moments") {
  Scenario s;
  s.plant = ParameterSchedule(single({1, 0, 0, 1.0}, {{0.1}, {1.0}}));
  s.noise_variance = 0.25;
  s.duration = 100000 * s.sample_period;
  const Record rec = simulate(s);
  REQUIRE(rec.size() == 100000);
  double mean = 0.0;
  for (double y : rec.y) mean += y;
  mean /= static_cast<double>(rec.size());
  double var = 0.0;
  for (double y : rec.y) var += (y - mean) * (y - mean);
  var /= static_cast<double>(rec.size() - 1);
  CHECK(std::abs(mean) < 5.0 * 0.5 / std::sqrt(1e5));
  CHECK(rel_err(var, 0.25) < 0.05);
}

TEST_CASE("outputs depend only on past and present excitation") {
  Section5Options o;
  o.duration = 60.0;
  Scenario a = scenario_section5(o);
  Scenario b = a;
  b.setpoint = [f = a.setpoint](double t) { return t < 30.0 ? f(t) : f(t) + 1.0; };
  const Record ra = simulate(a), rb = simulate(b);
  for (std::size_t k = 0; k < ra.size(); ++k) {
    if (ra.t[k] < 30.0) {
      CHECK(ra.y[k] == rb.y[k]);
    }
  }
  CHECK(ra.y.back() != rb.y.back());
}

TEST_CASE("record logs the true parameters in force") {
  Section5Options o;
  o.duration = 400.0;
  const Scenario s = scenario_section5(o);
  const Record rec = simulate(s);
  REQUIRE(rec.size() == 8000);
  for (std::size_t k : {0u, 2000u, 4000u, 7999u}) CHECK(rec.beta[k] == s.plant.at(rec.t[k]).beta());
  CHECK(rec.specs.size() == 3);
}

TEST_CASE("scenario validation") {
  Scenario s = open_loop_step(single({1, 0, 0, 1.0}, {{0.25}, {1.0}}), 1.0);
  s.noise_variance = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.noise_variance = 0.0;
  s.sample_period = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.sample_period = 0.05;
  s.controller = DtTransferFunction{{1.0, 0.0, 0.0}, {1.0, -1.0}, 0.05};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.controller.reset();
  s.duration = 0.0;
  CHECK(simulate(s).size() == 0);
}

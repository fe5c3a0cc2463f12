// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N] [--known-failure N]...
//
// The exit status is nonzero when a criterion fails that is not listed with
// --known-failure. Listed criteria still run and print their real verdict.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ctid/batch.hpp"
#include "ctid/csv.hpp"
#include "ctid/errors.hpp"
#include "ctid/estimator.hpp"
#include "ctid/experiment.hpp"
#include "ctid/filter_bank.hpp"
#include "ctid/model.hpp"
#include "ctid/monte_carlo.hpp"
#include "ctid/simulator.hpp"

using namespace ctid;

namespace tol {
constexpr double identity = 1e-8;          // 1: recursion vs batch
constexpr double exact_recovery = 1e-3;    // 2 and 9
constexpr double consistency_ratio = 0.5;  // 3: median(N=5000) / median(N=500)
constexpr double snr_db = 10.0;            // 3
constexpr double tracking = 0.05;          // 4
constexpr double magnitude = 1e-9;         // 7
constexpr double root_real = 1e-12;        // 7: Re(r) <= root_real * |r|
constexpr double filter_exact = 1e-12;     // 8
constexpr double derivative = 1e-3;        // 8
}  // namespace tol

namespace budget {
constexpr double c1 = 1.0, c2 = 5.0, c3 = 120.0, c4 = 60.0, c5 = 1.0, c6 = 180.0, c7 = 1.0, c8 = 1.0, c9 = 5.0;
}

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

AdditiveModel mode(double a1, double a2, double b, double lambda = 1.0) {
  AdditiveModel m;
  m.submodels.push_back({{2, 0, 0, lambda}, {{a1, a2}, {b}}});
  return m;
}

AdditiveModel two_mode() {
  AdditiveModel m = mode(0.25, 0.25, 3.0);
  m.submodels.push_back({{2, 0, 0, 1.0}, {{0.01, 0.04}, {0.5}}});
  return m;
}

Record white_record(const AdditiveModel& plant, std::size_t samples, double noise_variance, std::uint64_t seed) {
  Scenario s;
  s.plant = ParameterSchedule(plant);
  s.excitation_stddev = 1.0;
  s.duration = static_cast<double>(samples) * s.sample_period;
  s.noise_variance = noise_variance;
  s.seed = seed;
  return simulate(s);
}

Eigen::VectorXd relative_errors(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return ((got - want).array().abs() / want.array().abs()).matrix();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

EstimatorSetup open_loop_setup() {
  EstimatorSetup s;
  s.config.sample_period = 0.05;
  return s;
}

// ---------------------------------------------------------------------------

Verdict recursive_batch_identity() {
  const AdditiveModel plant = mode(0.1, 0.04, 0.5);
  const Record rec = white_record(plant, 100, 0.01, 3);
  double worst = 0.0;
  for (double lambda : {1.0, 0.99}) {
    AdditiveModel theta0 = perturbed_model(plant, 0.1, 4);
    theta0.submodels[0].spec.lambda = lambda;
    EstimatorConfig cfg;
    cfg.adaptive_prefilter = false;
    cfg.stability_projection = false;
    const std::vector<Eigen::MatrixXd> p0{Eigen::MatrixXd::Identity(3, 3) * 10.0};
    Estimator est(cfg, theta0, p0);
    std::vector<RegressionData> logged;
    for (std::size_t k = 0; k < 100; ++k) {
      const SampleReport r = est.process_sample({rec.t[k], rec.u[k], rec.y[k], rec.r[k]});
      if (r.skipped[0] != 0) return {false, "update skipped at sample " + std::to_string(k)};
      logged.push_back(est.last_regression(0));
    }
    const IvSolution b = weighted_iv_solve(logged, lambda, IvPrior{theta0.beta(), p0[0]});
    worst = std::max(worst, relative_errors(est.theta_bar(0), b.theta).maxCoeff());
    worst = std::max(worst, (est.P_bar(0) - b.P).norm() / b.P.norm());
  }
  return {worst <= tol::identity, "max relative difference in (theta, P) " + fmt(worst) + " <= " + fmt(tol::identity)};
}

Verdict noise_free_recovery() {
  const AdditiveModel plant = two_mode();
  const Record rec = white_record(plant, 2000, 0.0, 3);
  const Tracking tr = track(rec, open_loop_setup(), 7);
  if (tr.diverged) return {false, tr.error};
  const double e = relative_errors(tr.estimate.back(), plant.beta()).maxCoeff();
  return {e <= tol::exact_recovery, "max relative error after 2000 samples " + fmt(e) + " <= " + fmt(tol::exact_recovery)};
}

Verdict empirical_consistency() {
  const AdditiveModel plant = two_mode();
  const std::size_t n = 5000, n_short = 500;
  const Record clean = white_record(plant, n, 0.0, 1);
  double power = 0.0;
  for (double x : clean.x) power += x * x;
  power /= static_cast<double>(clean.size());
  const double variance = power / std::pow(10.0, tol::snr_db / 10.0);

  // each run writes only its own slot
  std::vector<double> short_err(20), long_err(20);
  const auto runs = run_monte_carlo(
      [&](std::uint64_t seed) {
        const Record rec = white_record(plant, n, variance, seed);
        const Tracking tr = track(rec, open_loop_setup(), seed);
        if (tr.diverged) throw EstimatorDiverged(tr.error);
        short_err[seed - 1] = relative_errors(tr.estimate[n_short - 1], plant.beta()).maxCoeff();
        long_err[seed - 1] = relative_errors(tr.estimate[n - 1], plant.beta()).maxCoeff();
        RunSummary s;
        s.seed = seed;
        s.estimate = tr.estimate[n - 1];
        s.truth = plant.beta();
        return s;
      },
      20, 1);
  for (const RunSummary& r : runs) {
    if (r.failed) return {false, "seed " + std::to_string(r.seed) + ": " + r.error};
  }
  const double m_short = median(short_err), m_long = median(long_err);
  return {m_long <= tol::consistency_ratio * m_short,
          "median max relative error " + fmt(m_short) + " at N=500, " + fmt(m_long) + " at N=5000 (ratio " +
              fmt(m_long / m_short) + " <= " + fmt(tol::consistency_ratio) + ", noise variance " + fmt(variance) +
              ")"};
}

Verdict section5_tracking() {
  const ExperimentConfig c = builtin_experiment("section5");
  const Record rec = simulate(c.scenario);
  if (rec.diverged) return {false, "closed loop diverged"};
  const Tracking tr = track(rec, c.estimator, c.scenario.seed);
  if (tr.diverged) return {false, tr.error};
  const auto names = csv::parameter_names(rec.specs);
  double worst = 0.0, worst_t = 0.0;
  std::size_t worst_i = 0;
  std::size_t k950 = 0;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    const double t = tr.t[k];
    if (std::abs(t - 950.0) < 1e-9) k950 = k;
    if (!((t >= 350.0 && t <= 480.0) || (t >= 850.0 && t <= 950.0))) continue;
    const Eigen::VectorXd e = relative_errors(tr.estimate[k], rec.beta[k]);
    Eigen::Index i = 0;
    if (e.maxCoeff(&i) > worst) {
      worst = e(i);
      worst_t = t;
      worst_i = static_cast<std::size_t>(i);
    }
  }
  Eigen::Index end_i = 0;
  const double end = relative_errors(tr.estimate[k950], rec.beta[k950]).maxCoeff(&end_i);
  return {worst <= tol::tracking && end <= tol::tracking,
          "(a) worst relative error outside ramps " + fmt(worst) + " (" + names[worst_i] + " at t=" + fmt(worst_t) +
              " s), (b) at t=950 s " + fmt(end) + " (" + names[static_cast<std::size_t>(end_i)] + "); both <= " +
              fmt(tol::tracking)};
}

Verdict parsimony() {
  const auto lines = run_parsimony_report(parsimony_examples());
  bool ok = lines.size() == 7;
  std::string detail;
  auto check = [&](const ParsimonyLine& l, int surplus, int reported, bool note) {
    const bool good = l.error.empty() && l.surplus == surplus && l.reported == reported && note == !l.note.empty();
    ok = ok && good;
    detail += (detail.empty() ? "" : ", ") + l.label + " -> " + std::to_string(l.surplus) +
              (l.surplus != l.reported ? " (reported " + std::to_string(l.reported) + ")" : "");
  };
  if (!ok) return {false, "unexpected number of rows"};
  check(lines[0], 1, 1, false);
  check(lines[1], -1, 0, true);
  for (int k = 1; k <= 5; ++k) {
    // unfactored: 2K + (2K - 1) = 4K - 1 coefficients; additive: 3K
    check(lines[static_cast<std::size_t>(k + 1)], (4 * k - 1) - 3 * k, (4 * k - 1) - 3 * k, false);
  }
  return {ok, detail};
}

Verdict closed_loop_bias() {
  Section5Options o;
  o.duration = 10000 * 0.05;
  Scenario s = scenario_section5(o);
  s.plant = ParameterSchedule(two_mode());
  double norms[2] = {0.0, 0.0};
  std::size_t failures[2] = {0, 0};
  const InstrumentKind kinds[2] = {InstrumentKind::auxiliary_model, InstrumentKind::regressor};
  for (int j = 0; j < 2; ++j) {
    EstimatorSetup setup;
    setup.config.mode = LoopMode::closed_loop;
    setup.config.controller = s.controller;
    setup.config.sample_period = s.sample_period;
    setup.config.instrument = kinds[j];
    const auto runs = run_monte_carlo(
        [&](std::uint64_t seed) {
          Scenario sc = s;
          sc.seed = seed;
          const Record rec = simulate(sc);
          const Tracking tr = track(rec, setup, seed);
          if (tr.diverged) throw EstimatorDiverged(tr.error);
          RunSummary r;
          r.seed = seed;
          r.estimate = tr.estimate.back();
          r.truth = rec.beta.back();
          return r;
        },
        20, 1);
    const MonteCarloSummary sum = summarize(runs);
    failures[j] = sum.failures;
    if (sum.failures < sum.runs) norms[j] = sum.mean_relative_bias.norm();
  }
  if (failures[0] > 0) return {false, std::to_string(failures[0]) + " IV runs failed"};
  const bool ls_failed = failures[1] == 20;
  return {ls_failed || norms[0] < norms[1],
          "norm of mean relative bias over 20 seeds: IV " + fmt(norms[0]) + " < LS " +
              (ls_failed ? std::string("(all runs diverged)") : fmt(norms[1])) +
              (failures[1] > 0 && !ls_failed ? " (" + std::to_string(failures[1]) + " LS runs diverged)" : "")};
}

// Roots of 1 + a1 p + a2 p^2 by the quadratic formula.
std::pair<std::complex<double>, std::complex<double>> quadratic_roots(double a1, double a2) {
  const std::complex<double> d = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2, 0.0));
  return {(-a1 + d) / (2.0 * a2), (-a1 - d) / (2.0 * a2)};
}

Verdict stability_projection() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -2.0 + 5.0 * i / 99.0);
  double worst_mag = 0.0, worst_real = -1.0;
  int tested = 0;
  while (tested < 1000) {
    const double a1 = coef(rng), a2 = coef(rng);
    if (std::abs(a2) < 1e-3 || (a1 > 0.0 && a2 > 0.0)) continue;  // keep only unstable quadratics
    ++tested;
    const Polynomial in{1.0, a1, a2};
    const Polynomial out = project_stable(in);
    if (out.degree() != 2 || out[0] != 1.0) return {false, "output is not an anti-monic quadratic"};
    const auto [r1, r2] = quadratic_roots(out[1], out[2]);
    for (const auto& r : {r1, r2}) worst_real = std::max(worst_real, r.real() / std::abs(r));
    for (double w : grid) {
      const std::complex<double> jw(0.0, w);
      const double want = std::abs(1.0 + a1 * jw + a2 * jw * jw);
      const double got = std::abs(1.0 + out[1] * jw + out[2] * jw * jw);
      worst_mag = std::max(worst_mag, std::abs(got - want) / want);
    }
  }
  return {worst_real <= tol::root_real && worst_mag <= tol::magnitude,
          "1000 quadratics: max Re(r)/|r| " + fmt(worst_real) + ", max relative |A(jw)| change " + fmt(worst_mag) +
              " <= " + fmt(tol::magnitude)};
}

Verdict filter_exactness() {
  double worst_exact = 0.0;
  {
    const double ts = 0.05, tau = 0.25;
    FilterBank bank(Polynomial{1.0, tau}, 0, 0, ts);
    for (int k = 1; k <= 400; ++k) {
      const double want = 1.0 - std::exp(-k * ts / tau);
      worst_exact = std::max(worst_exact, std::abs(bank.step(1.0)[0] - want));
    }
  }
  {
    const double ts = 0.05, wn = 2.0, zeta = 0.25, wd = wn * std::sqrt(1 - zeta * zeta);
    FilterBank bank(Polynomial{1.0, 2.0 * zeta / wn, 1.0 / (wn * wn)}, 0, 1, ts);
    for (int k = 1; k <= 2000; ++k) {
      const double t = k * ts;
      const auto taps = bank.step(1.0);
      const double x = 1 - std::exp(-zeta * wn * t) * (std::cos(wd * t) + zeta / std::sqrt(1 - zeta * zeta) * std::sin(wd * t));
      const double dx = wn / std::sqrt(1 - zeta * zeta) * std::exp(-zeta * wn * t) * std::sin(wd * t);
      worst_exact = std::max({worst_exact, std::abs(taps[0] - x), std::abs(taps[1] - dx)});
    }
  }
  // Central differences of each proper tap against the next one.
  double worst_fd = 0.0;
  const double ts = 0.01;
  for (const auto& [a, ell] : {std::pair{Polynomial{1.0, 0.25, 0.25}, 0}, std::pair{Polynomial{1.0, 0.02, 0.01}, 2}}) {
    FilterBank bank(a, ell, a.degree() + ell - 1, ts);
    std::vector<std::vector<double>> taps;
    for (int k = 0; k < 6000; ++k) {
      const auto out = bank.step(std::sin(k * ts));
      taps.emplace_back(out.begin(), out.end());
    }
    for (std::size_t j = 0; j + 1 < taps[0].size(); ++j) {
      double err = 0.0, scale = 0.0;
      for (std::size_t k = 3000; k + 1 < taps.size(); ++k) {
        err = std::max(err, std::abs((taps[k + 1][j] - taps[k - 1][j]) / (2 * ts) - taps[k][j + 1]));
        scale = std::max(scale, std::abs(taps[k][j + 1]));
      }
      worst_fd = std::max(worst_fd, err / scale);
    }
  }
  return {worst_exact <= tol::filter_exact && worst_fd <= tol::derivative,
          "step responses max abs error " + fmt(worst_exact) + " <= " + fmt(tol::filter_exact) +
              ", derivative taps vs central differences " + fmt(worst_fd) + " <= " + fmt(tol::derivative)};
}

Verdict marginally_stable() {
  AdditiveModel plant;
  plant.submodels.push_back({{0, 0, 2, 1.0}, {{}, {0.5}}});
  plant.submodels.push_back({{2, 0, 0, 1.0}, {{0.02, 0.01}, {0.2}}});
  Scenario s;
  s.plant = ParameterSchedule(plant);
  s.controller = DtTransferFunction{{6.2, -6.14}, {1.0, -0.7}, 0.05};
  s.setpoint = [](double t) { return std::sin(0.7 * t) + std::sin(3.1 * t) + std::sin(7.3 * t) + std::sin(11.9 * t); };
  s.duration = 2000 * s.sample_period;
  const Record rec = simulate(s);
  if (rec.diverged) return {false, "closed loop diverged"};
  EstimatorSetup setup;
  setup.config.mode = LoopMode::closed_loop;
  setup.config.controller = s.controller;
  const Tracking tr = track(rec, setup, 1);
  if (tr.diverged) return {false, tr.error};
  const double e = relative_errors(tr.estimate.back(), plant.beta()).maxCoeff();
  return {e <= tol::exact_recovery,
          "b/p^2 + mode, max relative error after 2000 samples " + fmt(e) + " <= " + fmt(tol::exact_recovery)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> known, only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--known-failure") == 0 && i + 1 < argc) {
      known.insert(std::atoi(argv[++i]));
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--only N] [--known-failure N]...\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "recursive-batch identity", budget::c1, recursive_batch_identity},
      {2, "noise-free exact recovery", budget::c2, noise_free_recovery},
      {3, "empirical consistency", budget::c3, empirical_consistency},
      {4, "section5 tracking", budget::c4, section5_tracking},
      {5, "parsimony surplus", budget::c5, parsimony},
      {6, "closed-loop bias, IV vs LS", budget::c6, closed_loop_bias},
      {7, "stability projection", budget::c7, stability_projection},
      {8, "filter exactness", budget::c8, filter_exactness},
      {9, "marginally stable closed loop", budget::c9, marginally_stable},
  };

  int unexpected = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    std::printf("%s [%d] %s: %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                secs, c.budget_s, pass || !known.count(c.id) ? "" : " [known failure]");
    std::fflush(stdout);
    if (!pass && !known.count(c.id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}

#include "ctid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ctid/csv.hpp"
#include "ctid/errors.hpp"
#include "ctid/random.hpp"

namespace ctid {

namespace fs = std::filesystem;
using nlohmann::json;

AdditiveModel perturbed_model(const AdditiveModel& truth, double fraction, std::uint64_t seed) {
  AdditiveModel m = truth;
  if (fraction == 0.0) return m;
  const CounterRng rng(seed, streams::initialization);
  std::uint64_t idx = 0;
  for (Submodel& s : m.submodels) {
    for (double& a : s.theta.a) a *= 1.0 + rng.uniform(idx++, -fraction, fraction);
    for (double& b : s.theta.b) b *= 1.0 + rng.uniform(idx++, -fraction, fraction);
  }
  return m;
}

std::vector<Eigen::MatrixXd> initial_covariance(const AdditiveModel& theta0, const InitSpec& init) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < theta0.size(); ++i) {
    const Eigen::VectorXd th = theta0.submodels[i].theta.to_vector();
    if (init.p0_diagonal.empty()) {
      Eigen::VectorXd d = init.p0_relative * th.array().square();
      for (Eigen::Index j = 0; j < d.size(); ++j) {
        if (d(j) == 0.0) d(j) = init.p0_relative;
      }
      out.emplace_back(d.asDiagonal());
      continue;
    }
    if (init.p0_diagonal.size() != theta0.size() || init.p0_diagonal[i].size() != th.size()) {
      throw std::invalid_argument("initial_covariance: P0 diagonal does not match the model layout");
    }
    out.emplace_back(init.p0_diagonal[i].asDiagonal());
  }
  return out;
}

AdditiveModel true_model(const Record& rec, std::size_t k) {
  AdditiveModel m;
  for (const SubmodelSpec& spec : rec.specs) {
    m.submodels.push_back({spec, ThetaVector::from_vector(spec, Eigen::VectorXd::Zero(spec.n_theta()))});
  }
  m.set_beta(rec.beta.at(k));
  return m;
}

Tracking track(const Record& rec, const EstimatorSetup& setup, std::uint64_t init_seed,
               std::span<const double> snapshot_times) {
  Tracking tr;
  if (rec.size() == 0) return tr;
  AdditiveModel truth0 = true_model(rec, 0);
  if (!setup.lambdas.empty()) {
    if (setup.lambdas.size() != truth0.size()) throw std::invalid_argument("track: one lambda per submodel required");
    for (std::size_t i = 0; i < truth0.size(); ++i) truth0.submodels[i].spec.lambda = setup.lambdas[i];
  }
  const AdditiveModel theta0 = perturbed_model(truth0, setup.init.perturbation, init_seed);
  const auto p0 = initial_covariance(theta0, setup.init);
  const std::size_t warm = std::min(setup.init.warm_start_samples, rec.size());

  InitOptions options;
  for (std::size_t k = 0; k < warm; ++k) options.warm_start.push_back({rec.t[k], rec.u[k], rec.y[k], rec.r[k]});
  options.batch_refine = setup.init.batch_refine;

  std::vector<double> pending(snapshot_times.begin(), snapshot_times.end());
  std::sort(pending.begin(), pending.end());
  std::size_t next_snap = 0;
  auto take_snapshots = [&](double t_now, double t_next, const AdditiveModel& m) {
    while (next_snap < pending.size() && pending[next_snap] >= t_now && pending[next_snap] < t_next) {
      tr.snapshots.emplace_back(pending[next_snap], m);
      ++next_snap;
    }
  };

  std::optional<Estimator> est;
  try {
    est.emplace(Estimator::initialize(setup.config, theta0, p0, options));
  } catch (const std::exception& e) {
    tr.diverged = true;
    tr.error = e.what();
    tr.initial_model = theta0;
    tr.final_model = theta0;
    return tr;
  }
  tr.initial_model = est->model();
  tr.t.reserve(rec.size());
  tr.estimate.reserve(rec.size());
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (k >= warm) {
      try {
        est->process_sample({rec.t[k], rec.u[k], rec.y[k], rec.r[k]});
      } catch (const std::exception& e) {
        tr.diverged = true;
        tr.error = e.what();
        break;
      }
    }
    tr.t.push_back(rec.t[k]);
    tr.estimate.push_back(est->model().beta());
    take_snapshots(rec.t[k], k + 1 < rec.size() ? rec.t[k + 1] : inf, est->model());
  }
  tr.final_model = est->model();
  tr.skips = est->skip_count();
  tr.projections = est->projection_count();
  tr.warnings = est->warnings();
  return tr;
}

// ---------------------------------------------------------------------------
// presets

Scenario scenario_beam() {
  const double w1 = 2.0 * std::numbers::pi * 3.0, z1 = 0.05;
  const double w2 = 2.0 * std::numbers::pi * 25.0, z2 = 0.02;
  AdditiveModel m;
  m.submodels.push_back({{2, 0, 0, 0.9999}, {{2.0 * z1 / w1, 1.0 / (w1 * w1)}, {1.0}}});
  m.submodels.push_back({{2, 0, 0, 0.999}, {{2.0 * z2 / w2, 1.0 / (w2 * w2)}, {0.4}}});
  const double a22 = m.submodels[1].theta.a[1];
  Scenario s;
  s.name = "beam";
  s.plant = ParameterSchedule(m, {Ramp{1, 1, 40.0, 100.0, a22, 1.3 * a22}});
  s.controller = DtTransferFunction{{0.501, -0.5}, {1.0, -1.0}, 1e-3};
  s.setpoint = [](double t) { return std::fmod(t, 0.5) < 0.25 ? 1.0 : -1.0; };
  s.noise_variance = 1e-6;
  s.sample_period = 1e-3;
  s.duration = 135.0;
  s.seed = 1;
  s.init_perturbation = 0.02;
  return s;
}

ExperimentConfig builtin_experiment(const std::string& name) {
  ExperimentConfig c;
  c.scenario_name = name;
  if (name == "section5") {
    c.scenario = scenario_section5();
    c.estimator.init.warm_start_samples = 400;
    c.estimator.init.p0_diagonal = c.scenario.covariance_diagonal;
    c.outputs.snapshot_times = {50.0, 950.0};
  } else if (name == "beam") {
    c.scenario = scenario_beam();
    c.estimator.init.warm_start_samples = 2000;
    c.outputs.snapshot_times = {0.0, 135.0};
    c.outputs.omega_min = 1.0;
    c.outputs.omega_max = 1000.0;
  } else {
    throw ConfigError("/scenario", "unknown builtin scenario '" + name + "'");
  }
  c.estimator.init.perturbation = c.scenario.init_perturbation;
  c.estimator.config.sample_period = c.scenario.sample_period;
  c.estimator.config.mode = LoopMode::closed_loop;
  c.estimator.config.controller = c.scenario.controller;
  c.base_seed = c.scenario.seed;
  return c;
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  scenario.seed = seed;
  base_seed = seed;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  estimator.config.validate();
  if (estimator.config.mode == LoopMode::closed_loop && !scenario.closed_loop()) {
    throw ConfigError("/estimator/mode", "closed-loop estimation needs a scenario controller");
  }
  if (std::abs(estimator.config.sample_period - scenario.sample_period) > 1e-12 * scenario.sample_period) {
    throw ConfigError("/estimator", "estimator and scenario sample periods differ");
  }
  const std::size_t k = scenario.plant.base().size();
  if (!estimator.lambdas.empty() && estimator.lambdas.size() != k) {
    throw ConfigError("/estimator/lambda", "one forgetting factor per submodel required");
  }
  for (double l : estimator.lambdas) {
    if (!(l > 0.0 && l <= 1.0)) throw ConfigError("/estimator/lambda", "forgetting factors must lie in (0, 1]");
  }
  if (!estimator.init.p0_diagonal.empty()) {
    if (estimator.init.p0_diagonal.size() != k) throw ConfigError("/init/p0_diagonal", "one diagonal per submodel");
    for (std::size_t i = 0; i < k; ++i) {
      const auto& d = estimator.init.p0_diagonal[i];
      if (d.size() != scenario.plant.base().submodels[i].spec.n_theta()) {
        throw ConfigError("/init/p0_diagonal/" + std::to_string(i), "length does not match the submodel");
      }
      if (!(d.array() > 0.0).all()) throw ConfigError("/init/p0_diagonal/" + std::to_string(i), "entries must be positive");
    }
  } else if (!(estimator.init.p0_relative > 0.0)) {
    throw ConfigError("/init/p0_relative", "must be positive");
  }
  if (!(estimator.init.perturbation >= 0.0 && estimator.init.perturbation < 1.0)) {
    throw ConfigError("/init/perturbation", "must lie in [0, 1)");
  }
  for (double t : outputs.snapshot_times) {
    if (!(t >= 0.0 && t <= scenario.duration)) {
      throw ConfigError("/outputs/snapshot_times", "snapshot time " + csv::format(t) + " outside [0, duration]");
    }
  }
  if (!(outputs.omega_min > 0.0 && outputs.omega_max > outputs.omega_min && outputs.omega_points >= 2)) {
    throw ConfigError("/outputs", "frequency grid needs 0 < omega_min < omega_max and at least two points");
  }
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace {

template <typename T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "/" + key, e.what());
  }
}

const json& object_at(const json& j, const char* key, const std::string& path) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(path + "/" + key, "expected an object");
  return j.at(key);
}

DtTransferFunction controller_from_json(const json& j, double ts, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "section5") return section5_controller(ControllerVariant::stabilized);
    if (name == "section5-printed") return section5_controller(ControllerVariant::printed);
    throw ConfigError(path, "unknown controller '" + name + "'");
  }
  DtTransferFunction c;
  c.num = get_or<std::vector<double>>(j, "num", path, {});
  c.den = get_or<std::vector<double>>(j, "den", path, {});
  c.sample_period = ts;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

struct Sine {
  double amplitude, omega, phase;
};

std::function<double(double)> setpoint_from_json(const json& j, const std::string& path) {
  const double offset = get_or<double>(j, "constant", path, 0.0);
  std::vector<Sine> sines;
  if (j.contains("sines")) {
    if (!j.at("sines").is_array()) throw ConfigError(path + "/sines", "expected an array");
    std::size_t i = 0;
    for (const json& s : j.at("sines")) {
      const std::string p = path + "/sines/" + std::to_string(i++);
      sines.push_back({get_or<double>(s, "amplitude", p, 1.0), get_or<double>(s, "omega", p, 1.0),
                       get_or<double>(s, "phase", p, 0.0)});
    }
  }
  const double square_amp = get_or<double>(j, "square_amplitude", path, 0.0);
  const double square_hz = get_or<double>(j, "square_frequency", path, 1.0);
  if (!(square_hz > 0.0)) throw ConfigError(path + "/square_frequency", "must be positive");
  return [offset, sines, square_amp, square_hz](double t) {
    double v = offset;
    for (const Sine& s : sines) v += s.amplitude * std::sin(s.omega * t + s.phase);
    if (square_amp != 0.0) v += std::fmod(t * square_hz, 1.0) < 0.5 ? square_amp : -square_amp;
    return v;
  };
}

Scenario custom_scenario(const json& j, const std::string& path) {
  Scenario s;
  s.name = get_or<std::string>(j, "name", path, "custom");
  if (!j.contains("model")) throw ConfigError(path + "/model", "missing plant model");
  AdditiveModel model;
  try {
    model = model_from_json(j.at("model"));
  } catch (const std::exception& e) {
    throw ConfigError(path + "/model", e.what());
  }
  s.sample_period = get_or<double>(j, "sample_period", path, 0.05);
  std::vector<Ramp> ramps;
  if (j.contains("ramps")) {
    std::size_t i = 0;
    for (const json& r : j.at("ramps")) {
      const std::string p = path + "/ramps/" + std::to_string(i++);
      Ramp ramp;
      ramp.submodel = get_or<std::size_t>(r, "submodel", p, 0);
      ramp.parameter = get_or<std::size_t>(r, "parameter", p, 0);
      ramp.t_start = get_or<double>(r, "t_start", p, 0.0);
      ramp.t_end = get_or<double>(r, "t_end", p, 0.0);
      if (ramp.submodel >= model.size() || ramp.parameter >= model.submodels[ramp.submodel].theta.size()) {
        throw ConfigError(p, "ramp target out of range");
      }
      const double base = model.submodels[ramp.submodel].theta.to_vector()(static_cast<Eigen::Index>(ramp.parameter));
      ramp.from = get_or<double>(r, "from", p, base);
      if (r.contains("factor")) {
        ramp.to = ramp.from * get_or<double>(r, "factor", p, 1.0);
      } else {
        ramp.to = get_or<double>(r, "to", p, base);
      }
      ramps.push_back(ramp);
    }
  }
  try {
    s.plant = ParameterSchedule(model, std::move(ramps));
  } catch (const std::exception& e) {
    throw ConfigError(path + "/ramps", e.what());
  }
  if (j.contains("controller")) s.controller = controller_from_json(j.at("controller"), s.sample_period, path + "/controller");
  s.setpoint = setpoint_from_json(object_at(j, "setpoint", path), path + "/setpoint");
  s.excitation_stddev = get_or<double>(j, "excitation_stddev", path, 0.0);
  s.noise_variance = get_or<double>(j, "noise_variance", path, 0.0);
  s.duration = get_or<double>(j, "duration", path, 0.0);
  s.seed = get_or<std::uint64_t>(j, "seed", path, 1);
  s.init_perturbation = 0.02;
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

LoopMode mode_from_string(const std::string& s, const std::string& path) {
  if (s == "open_loop") return LoopMode::open_loop;
  if (s == "closed_loop") return LoopMode::closed_loop;
  throw ConfigError(path, "mode must be open_loop, closed_loop or auto");
}

InstrumentKind instrument_from_string(const std::string& s, const std::string& path) {
  if (s == "auxiliary_model") return InstrumentKind::auxiliary_model;
  if (s == "regressor") return InstrumentKind::regressor;
  throw ConfigError(path, "instrument must be auxiliary_model or regressor");
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  ExperimentConfig c;
  const json scenario = j.contains("scenario") ? j.at("scenario") : json("section5");
  if (scenario.is_string()) {
    c = builtin_experiment(scenario.get<std::string>());
    if (c.scenario_name == "section5" && j.contains("section5")) {
      const json& o = j.at("section5");
      Section5Options opt;
      const auto variant = get_or<std::string>(o, "controller", "/section5", "stabilized");
      if (variant == "printed") {
        opt.controller = ControllerVariant::printed;
      } else if (variant != "stabilized") {
        throw ConfigError("/section5/controller", "must be stabilized or printed");
      }
      opt.ramp_fraction = get_or<double>(o, "ramp_fraction", "/section5", opt.ramp_fraction);
      opt.duration = get_or<double>(o, "duration", "/section5", opt.duration);
      c.scenario = scenario_section5(opt);
      c.estimator.config.controller = c.scenario.controller;
    }
  } else if (scenario.is_object()) {
    c.scenario_name = "custom";
    c.scenario = custom_scenario(scenario, "/scenario");
    c.estimator.config.mode = c.scenario.closed_loop() ? LoopMode::closed_loop : LoopMode::open_loop;
    c.estimator.config.controller = c.scenario.controller;
    c.estimator.config.sample_period = c.scenario.sample_period;
  } else {
    throw ConfigError("/scenario", "expected a builtin name or an object");
  }
  if (j.contains("seed")) c.set_seed(get_or<std::uint64_t>(j, "seed", "", 1));

  const json& e = object_at(j, "estimator", "");
  EstimatorConfig& cfg = c.estimator.config;
  cfg.a_iterations = get_or<int>(e, "a_iterations", "/estimator", cfg.a_iterations);
  cfg.srivc_refinements = get_or<int>(e, "srivc_refinements", "/estimator", cfg.srivc_refinements);
  cfg.decimation = get_or<int>(e, "decimation", "/estimator", cfg.decimation);
  cfg.stability_projection = get_or<bool>(e, "projection", "/estimator", cfg.stability_projection);
  cfg.adaptive_prefilter = !get_or<bool>(e, "constant_prefilter", "/estimator", !cfg.adaptive_prefilter);
  const auto mode = get_or<std::string>(e, "mode", "/estimator", "auto");
  if (mode != "auto") cfg.mode = mode_from_string(mode, "/estimator/mode");
  cfg.instrument = instrument_from_string(get_or<std::string>(e, "instrument", "/estimator", "auxiliary_model"),
                                          "/estimator/instrument");
  c.estimator.lambdas = get_or<std::vector<double>>(e, "lambda", "/estimator", {});

  const json& in = object_at(j, "init", "");
  InitSpec& init = c.estimator.init;
  init.perturbation = get_or<double>(in, "perturbation", "/init", init.perturbation);
  if (in.contains("p0_diagonal")) {
    init.p0_diagonal.clear();
    for (const auto& d : get_or<std::vector<std::vector<double>>>(in, "p0_diagonal", "/init", {})) {
      init.p0_diagonal.push_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
    }
  }
  if (in.contains("p0_relative")) {
    init.p0_diagonal.clear();
    init.p0_relative = get_or<double>(in, "p0_relative", "/init", init.p0_relative);
  }
  init.warm_start_samples = get_or<std::size_t>(in, "warm_start_samples", "/init", init.warm_start_samples);
  init.batch_refine = get_or<bool>(in, "batch_refine", "/init", init.batch_refine);

  const json& o = object_at(j, "outputs", "");
  OutputSpec& out = c.outputs;
  out.record = get_or<std::string>(o, "record", "/outputs", out.record);
  out.trajectory = get_or<std::string>(o, "trajectory", "/outputs", out.trajectory);
  out.errors = get_or<std::string>(o, "errors", "/outputs", out.errors);
  out.frequency = get_or<std::string>(o, "frequency", "/outputs", out.frequency);
  out.metrics = get_or<std::string>(o, "metrics", "/outputs", out.metrics);
  out.snapshot_times = get_or<std::vector<double>>(o, "snapshot_times", "/outputs", out.snapshot_times);
  out.omega_min = get_or<double>(o, "omega_min", "/outputs", out.omega_min);
  out.omega_max = get_or<double>(o, "omega_max", "/outputs", out.omega_max);
  out.omega_points = get_or<int>(o, "omega_points", "/outputs", out.omega_points);

  const json& mc = object_at(j, "monte_carlo", "");
  c.monte_carlo_runs = get_or<std::size_t>(mc, "runs", "/monte_carlo", c.monte_carlo_runs);
  c.base_seed = get_or<std::uint64_t>(mc, "base_seed", "/monte_carlo", c.base_seed);

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError("", ex.what());
  }
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open configuration file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

// ---------------------------------------------------------------------------
// artifacts

std::vector<double> log_spaced(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo && points >= 2)) throw std::invalid_argument("log_spaced: bad grid");
  std::vector<double> w(static_cast<std::size_t>(points));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i) w[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  return w;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

void write_record_csv(const fs::path& path, const Record& rec) {
  std::ofstream out = open_out(path);
  csv::Writer w(out, concat({"t", "r", "u", "y"}, csv::parameter_names(rec.specs, "true_")));
  std::vector<double> row;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    row = {rec.t[k], rec.r[k], rec.u[k], rec.y[k]};
    row.insert(row.end(), rec.beta[k].data(), rec.beta[k].data() + rec.beta[k].size());
    w.row(row);
  }
}

void write_trajectory_csv(const fs::path& path, const Record& rec, const Tracking& tr) {
  std::ofstream out = open_out(path);
  csv::Writer w(out, concat(concat({"t"}, csv::parameter_names(rec.specs, "hat_")),
                            csv::parameter_names(rec.specs, "true_")));
  std::vector<double> row;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    row = {tr.t[k]};
    row.insert(row.end(), tr.estimate[k].data(), tr.estimate[k].data() + tr.estimate[k].size());
    row.insert(row.end(), rec.beta[k].data(), rec.beta[k].data() + rec.beta[k].size());
    w.row(row);
  }
}

void write_error_csv(const fs::path& path, const Record& rec, const Tracking& tr) {
  std::ofstream out = open_out(path);
  csv::Writer w(out, concat({"t"}, csv::parameter_names(rec.specs, "relerr_")));
  std::vector<double> row;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    const Eigen::VectorXd e = ((tr.estimate[k] - rec.beta[k]).array().abs() / rec.beta[k].array().abs()).matrix();
    row = {tr.t[k]};
    row.insert(row.end(), e.data(), e.data() + e.size());
    w.row(row);
  }
}

void write_frequency_csv(const fs::path& path, const Scenario& scenario, const Tracking& tr,
                         std::span<const double> omegas) {
  std::ofstream out = open_out(path);
  csv::Writer w(out, {"snapshot_t", "omega", "mag_hat", "phase_hat", "mag_true", "phase_true"});
  for (const auto& [t, model] : tr.snapshots) {
    const auto hat = freq_response(model, omegas);
    const auto truth = freq_response(scenario.plant.at(t), omegas);
    for (std::size_t i = 0; i < omegas.size(); ++i) {
      const double row[] = {t, omegas[i], std::abs(hat[i]), std::arg(hat[i]), std::abs(truth[i]), std::arg(truth[i])};
      w.row(row);
    }
  }
}

namespace {

json metrics_json(const ExperimentConfig& config, const Record& rec, const Tracking& tr) {
  json m;
  m["scenario"] = config.scenario_name;
  m["seed"] = config.scenario.seed;
  m["samples"] = rec.size();
  m["estimated_samples"] = tr.t.size();
  m["simulation_diverged"] = rec.diverged;
  m["estimator_diverged"] = tr.diverged;
  if (!tr.error.empty()) m["error"] = tr.error;
  m["skip_count"] = tr.skips;
  m["projection_count"] = tr.projections;
  m["warnings"] = tr.warnings;
  const auto names = csv::parameter_names(rec.specs);
  if (!tr.t.empty()) {
    const std::size_t k = tr.t.size() - 1;
    const Eigen::VectorXd e = ((tr.estimate[k] - rec.beta[k]).array().abs() / rec.beta[k].array().abs()).matrix();
    json terminal = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) terminal[names[i]] = e(static_cast<Eigen::Index>(i));
    m["terminal_time"] = tr.t[k];
    m["terminal_relative_error"] = terminal;
    m["max_terminal_relative_error"] = e.maxCoeff();
    json est = json::object(), truth = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
      est[names[i]] = tr.estimate[k](static_cast<Eigen::Index>(i));
      truth[names[i]] = rec.beta[k](static_cast<Eigen::Index>(i));
    }
    m["terminal_estimate"] = est;
    m["terminal_truth"] = truth;
  }
  json snaps = json::array();
  for (const auto& s : tr.snapshots) snaps.push_back({{"t", s.first}, {"model", to_json(s.second)}});
  m["snapshots"] = snaps;
  return m;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  ExperimentResult res;
  res.record = simulate(config.scenario);
  res.tracking = track(res.record, config.estimator, config.scenario.seed, config.outputs.snapshot_times);
  res.metrics = metrics_json(config, res.record, res.tracking);
  const OutputSpec& o = config.outputs;
  if (!o.record.empty()) write_record_csv(out_dir / o.record, res.record);
  if (!o.trajectory.empty()) write_trajectory_csv(out_dir / o.trajectory, res.record, res.tracking);
  if (!o.errors.empty()) write_error_csv(out_dir / o.errors, res.record, res.tracking);
  if (!o.frequency.empty()) {
    write_frequency_csv(out_dir / o.frequency, config.scenario, res.tracking,
                        log_spaced(o.omega_min, o.omega_max, o.omega_points));
  }
  if (!o.metrics.empty()) {
    std::ofstream out = open_out(out_dir / o.metrics);
    out << res.metrics.dump(2) << '\n';
  }
  return res;
}

RunSummary experiment_run(const ExperimentConfig& config, std::uint64_t seed) {
  Scenario scenario = config.scenario;
  scenario.seed = seed;
  const Record rec = simulate(scenario);
  if (rec.diverged || rec.size() == 0) throw std::runtime_error("simulation diverged or produced no samples");
  const Tracking tr = track(rec, config.estimator, seed);
  if (tr.diverged) throw EstimatorDiverged(tr.error);
  RunSummary s;
  s.seed = seed;
  s.estimate = tr.estimate.back();
  s.truth = rec.beta.back();
  s.skips = tr.skips;
  return s;
}

MonteCarloSummary run_experiment_monte_carlo(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  if (config.monte_carlo_runs == 0) throw ConfigError("/monte_carlo/runs", "must be at least 1");
  const auto runs = run_monte_carlo([&config](std::uint64_t seed) { return experiment_run(config, seed); },
                                    config.monte_carlo_runs, config.base_seed);
  const MonteCarloSummary summary = summarize(runs);

  std::vector<SubmodelSpec> specs;
  for (const Submodel& s : config.scenario.plant.base().submodels) specs.push_back(s.spec);
  const auto names = csv::parameter_names(specs);
  {
    std::ofstream out = open_out(out_dir / "monte_carlo_runs.csv");
    csv::Writer w(out, concat(concat(concat({"seed", "failed", "skips", "max_relative_error"},
                                            csv::parameter_names(specs, "hat_")),
                                     csv::parameter_names(specs, "true_")),
                              {}));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const RunSummary& r : runs) {
      std::vector<double> row{static_cast<double>(r.seed), r.failed ? 1.0 : 0.0, static_cast<double>(r.skips),
                              r.failed ? nan : r.max_relative_error()};
      for (std::size_t i = 0; i < names.size(); ++i) row.push_back(r.failed ? nan : r.estimate(static_cast<Eigen::Index>(i)));
      for (std::size_t i = 0; i < names.size(); ++i) row.push_back(r.failed ? nan : r.truth(static_cast<Eigen::Index>(i)));
      w.row(row);
    }
  }
  json j;
  j["scenario"] = config.scenario_name;
  j["runs"] = summary.runs;
  j["failures"] = summary.failures;
  j["base_seed"] = config.base_seed;
  if (summary.failures < summary.runs) {
    j["median_max_relative_error"] = summary.median_max_error;
    json per = json::object(), bias = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
      per[names[i]] = summary.median_relative_error(static_cast<Eigen::Index>(i));
      bias[names[i]] = summary.mean_relative_bias(static_cast<Eigen::Index>(i));
    }
    j["median_relative_error"] = per;
    j["mean_relative_bias"] = bias;
  }
  json errors = json::array();
  for (const RunSummary& r : runs) {
    if (r.failed) errors.push_back({{"seed", r.seed}, {"error", r.error}});
  }
  j["failed_runs"] = errors;
  std::ofstream out = open_out(out_dir / "monte_carlo_summary.json");
  out << j.dump(2) << '\n';
  return summary;
}

// ---------------------------------------------------------------------------
// parsimony

ParsimonyRow parse_parsimony_row(const std::string& text) {
  ParsimonyRow row;
  std::string body = text;
  if (const auto colon = body.find(':'); colon != std::string::npos) {
    row.label = body.substr(0, colon);
    body = body.substr(colon + 1);
  }
  std::istringstream in(body);
  std::string tok;
  while (in >> tok) {
    if (tok.rfind("r=", 0) == 0) {
      try {
        std::size_t used = 0;
        row.relative_degree = std::stoi(tok.substr(2), &used);
        if (used != tok.size() - 2) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigError(text, "bad relative degree '" + tok + "'");
      }
      continue;
    }
    const auto comma = tok.find(',');
    if (comma == std::string::npos) throw ConfigError(text, "expected n,m but got '" + tok + "'");
    try {
      std::size_t un = 0, um = 0;
      const int n = std::stoi(tok.substr(0, comma), &un);
      const int m = std::stoi(tok.substr(comma + 1), &um);
      if (un != comma || um != tok.size() - comma - 1) throw std::invalid_argument("trailing characters");
      row.degrees.emplace_back(n, m);
    } catch (const std::exception&) {
      throw ConfigError(text, "expected n,m but got '" + tok + "'");
    }
  }
  if (row.degrees.empty()) throw ConfigError(text, "no submodel degrees");
  return row;
}

std::vector<ParsimonyRow> parsimony_examples() {
  std::vector<ParsimonyRow> rows;
  rows.push_back({"Example 1", {{1, 0}, {2, 0}}, std::nullopt});
  rows.push_back({"Example 2", {{1, 0}, {1, 0}}, 2});
  for (int k = 1; k <= 5; ++k) {
    rows.push_back({"Example 3 K=" + std::to_string(k), std::vector<std::pair<int, int>>(static_cast<std::size_t>(k), {2, 0}),
                    std::nullopt});
  }
  return rows;
}

std::vector<ParsimonyLine> run_parsimony_report(const std::vector<ParsimonyRow>& rows) {
  std::vector<ParsimonyLine> out;
  for (const ParsimonyRow& row : rows) {
    ParsimonyLine line;
    line.label = row.label;
    line.submodels = static_cast<int>(row.degrees.size());
    try {
      line.surplus = parsimony_surplus(row.degrees, row.relative_degree);
      int sum = 0, min_r = std::numeric_limits<int>::max();
      for (const auto& [n, m] : row.degrees) {
        sum += n - m;
        min_r = std::min(min_r, n - m);
      }
      line.sum_relative_degrees = sum;
      line.relative_degree = row.relative_degree.value_or(min_r);
      line.reported = std::max(line.surplus, 0);
      if (line.surplus < 0) {
        line.note = "negative surplus " + std::to_string(line.surplus) +
                    ": the unfactored form needs fewer parameters than the additive one";
      }
    } catch (const std::exception& e) {
      line.error = e.what();
    }
    out.push_back(line);
  }
  return out;
}

}  // namespace ctid

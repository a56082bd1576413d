#include "swingid/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "swingid/error.hpp"
#include "swingid/json_io.hpp"

namespace swingid {

namespace {

using json = nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> labels_of(const ParameterEstimate& e) {
  std::vector<std::string> out;
  for (const auto& b : e.buses) {
    if (b.kind == BusKind::generator) out.push_back("M_" + std::to_string(b.bus.label()));
  }
  for (const auto& b : e.buses) out.push_back("D_" + std::to_string(b.bus.label()));
  return out;
}

// Labels across every run, in first-seen order (runs that failed outright
// carry no buses).
std::vector<std::string> labels_of(const ScenarioResult& r) {
  for (const auto& run : r.runs) {
    if (!run.estimate.buses.empty()) return labels_of(run.estimate);
  }
  return {};
}

const BusEstimate* find_bus(const ParameterEstimate& e, std::string_view label, bool& is_inertia) {
  if (label.size() < 3 || label[1] != '_' || (label[0] != 'M' && label[0] != 'D')) return nullptr;
  is_inertia = label[0] == 'M';
  std::size_t bus_label = 0;
  try {
    bus_label = std::stoul(std::string(label.substr(2)));
  } catch (const std::exception&) {
    return nullptr;
  }
  for (const auto& b : e.buses) {
    if (b.bus.label() == bus_label) return &b;
  }
  return nullptr;
}

double steady_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

ParameterEstimate run_estimator(const Scenario& scn, const Case& c, const SampledTrajectory& traj,
                                std::uint64_t seed, const std::optional<EstimatorBackend>& pinn) {
  switch (scn.estimator) {
    case EstimatorKind::sindy: {
      auto cfg = scn.config;
      cfg.mode = EstimatorMode::physics;
      return estimate_all(c.model, traj, cfg);
    }
    case EstimatorKind::sindy_library: {
      auto cfg = scn.config;
      cfg.mode = EstimatorMode::library;
      return estimate_all(c.model, traj, cfg);
    }
    case EstimatorKind::pinn:
      return (*pinn)(c, traj, seed);
  }
  throw Error(ErrorCode::precondition, "unknown estimator");
}

SampledTrajectory clean_trajectory(const Scenario& scn, const Case& c, double horizon) {
  const auto init = scn.init ? *scn.init : SystemState::zero(c.model);
  const auto sol = simulate(c.model, c.params, init, horizon, scn.solver);
  const auto samples = static_cast<std::size_t>(std::floor(horizon / scn.t_s + 1e-9));
  return resample_uniform(sol, scn.t_s, samples);
}

ScenarioResult run_batch(const Scenario& scn, const Case& c, const SampledTrajectory& clean,
                         const NoiseSpec& noise, const HarnessOptions& opts) {
  std::optional<EstimatorBackend> pinn;
  if (scn.estimator == EstimatorKind::pinn) {
    pinn = opts.pinn ? opts.pinn : external_pinn_backend();
    if (!pinn) {
      throw Error(ErrorCode::backend_unavailable,
                  "pinn estimator unavailable: set SWING_SINDY_PINN_CMD to the comparator command");
    }
  }
  const auto clock = opts.clock_ms ? opts.clock_ms : std::function<double()>(steady_ms);

  ScenarioResult result;
  result.scenario = scn.name;
  result.estimator = std::string(to_string(scn.estimator));
  result.runs.resize(scn.runs);

  auto do_run = [&](std::size_t r) {
    RunResult& out = result.runs[r];
    out.run = r;
    out.seed = scn.base_seed + r;
    try {
      const auto noisy = add_noise(clean, noise, out.seed);
      const double t0 = clock();
      auto est = run_estimator(scn, c, noisy, out.seed, pinn);
      const double t1 = clock();
      est.attach_truth(c.params);
      out.elapsed_ms = t1 - t0;
      out.estimate = std::move(est);
    } catch (const Error& e) {
      out.error = std::string(to_string(e.code())) + ": " + e.what();
    }
  };

  const auto threads = std::min(resolve_threads(opts.threads), std::max<std::size_t>(1, scn.runs));
  if (threads <= 1) {
    for (std::size_t r = 0; r < scn.runs; ++r) do_run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < scn.runs; r = next++) do_run(r);
      });
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

std::string quote(const std::filesystem::path& p) {
  std::string out = "'";
  for (const char ch : p.string()) {
    if (ch == '\'') out += "'\\''";
    else out += ch;
  }
  return out + "'";
}

void check_written(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_num(std::ostream& out, double v) {
  if (std::isnan(v)) out << "nan";
  else out << v;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::sindy: return "sindy";
    case EstimatorKind::sindy_library: return "sindy-library";
    case EstimatorKind::pinn: return "pinn";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view text) {
  if (text == "sindy") return EstimatorKind::sindy;
  if (text == "sindy-library") return EstimatorKind::sindy_library;
  if (text == "pinn") return EstimatorKind::pinn;
  throw Error(ErrorCode::parse, "unknown estimator '" + std::string(text) + "'");
}

void Scenario::validate() const {
  if (runs < 1) throw Error(ErrorCode::precondition, "scenario needs at least one run");
  if (!(t_s > 0.0)) throw Error(ErrorCode::precondition, "sampling interval must be positive");
  if (samples < 2) throw Error(ErrorCode::precondition, "scenario needs at least 2 samples");
  const auto& d = config.derivative;
  if (d.kind == DerivativeMethod::Kind::savgol) {
    if (d.window < 3 || d.window % 2 == 0) {
      throw Error(ErrorCode::precondition, "savgol window must be odd and at least 3, got " + std::to_string(d.window));
    }
    if (d.order < 1 || d.order >= d.window) {
      throw Error(ErrorCode::precondition, "savgol order must satisfy 1 <= order < window");
    }
    if (static_cast<std::size_t>(d.window) > samples) {
      throw Error(ErrorCode::precondition, "savgol window is longer than the scenario's samples");
    }
  } else if (samples < 3) {
    throw Error(ErrorCode::precondition, "finite differences need at least 3 samples");
  }
  if (horizon > 0.0 && window() > horizon * (1.0 + 1e-12)) {
    throw Error(ErrorCode::window_overrun, "observation window exceeds the simulation horizon");
  }
}

std::vector<std::string> parameter_labels(const GridModel& model) {
  std::vector<std::string> out;
  for (const auto g : model.generator_buses()) out.push_back("M_" + std::to_string(g.label()));
  for (std::size_t i = 0; i < model.n_buses(); ++i) out.push_back("D_" + std::to_string(i + 1));
  return out;
}

std::optional<double> parameter_error_pct(const ParameterEstimate& estimate, std::string_view label) {
  bool inertia = false;
  const auto* b = find_bus(estimate, label, inertia);
  if (!b) return std::nullopt;
  const auto& err = inertia ? b->rel_err_inertia : b->rel_err_damping;
  if (!err) return std::nullopt;
  return 100.0 * *err;
}

std::optional<double> parameter_value(const ParameterEstimate& estimate, std::string_view label) {
  bool inertia = false;
  const auto* b = find_bus(estimate, label, inertia);
  if (!b) return std::nullopt;
  return inertia ? b->inertia : b->damping;
}

const ParameterStats& ErrorStats::at(std::string_view parameter) const {
  for (const auto& p : parameters) {
    if (p.parameter == parameter) return p;
  }
  throw Error(ErrorCode::precondition, "no statistics for parameter " + std::string(parameter));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ErrorStats compute_stats(const ScenarioResult& result) {
  ErrorStats stats;
  for (const auto& label : labels_of(result)) {
    std::vector<double> errs;
    for (const auto& run : result.runs) {
      if (const auto e = parameter_error_pct(run.estimate, label)) errs.push_back(*e);
    }
    ParameterStats p;
    p.parameter = label;
    p.count = errs.size();
    p.failures = result.runs.size() - errs.size();
    p.median = quantile(errs, 0.5);
    p.q1 = quantile(errs, 0.25);
    p.q3 = quantile(errs, 0.75);
    p.min = errs.empty() ? kNaN : *std::min_element(errs.begin(), errs.end());
    p.max = errs.empty() ? kNaN : *std::max_element(errs.begin(), errs.end());
    double sum = 0.0;
    for (const double e : errs) sum += e;
    p.mean = errs.empty() ? kNaN : sum / static_cast<double>(errs.size());
    stats.parameters.push_back(std::move(p));
  }
  for (const auto& run : result.runs) {
    if (run.error.empty()) stats.timings_ms.push_back(run.elapsed_ms);
  }
  return stats;
}

std::optional<EstimatorBackend> external_pinn_backend() {
  const char* cmd = std::getenv("SWING_SINDY_PINN_CMD");
  if (!cmd || !*cmd) return std::nullopt;
  const std::string command(cmd);
  return EstimatorBackend([command](const Case& c, const SampledTrajectory& traj, std::uint64_t seed) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("swingid-pinn-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    const auto case_path = dir / "case.json";
    const auto traj_path = dir / "trajectory.csv";
    const auto out_path = dir / "estimate.json";
    save_case(c, case_path);
    save_trajectory_csv(traj_path, traj);
    const std::string line = command + " --case " + quote(case_path) + " --trajectory " +
                             quote(traj_path) + " --seed " + std::to_string(seed) + " --out " +
                             quote(out_path);
    const int rc = std::system(line.c_str());
    std::ifstream in(out_path);
    if (rc != 0 || !in) {
      std::filesystem::remove_all(dir);
      throw Error(ErrorCode::backend_unavailable,
                  "pinn command failed with status " + std::to_string(rc));
    }
    ParameterEstimate est;
    try {
      est = json::parse(in).get<ParameterEstimate>();
    } catch (const json::exception& e) {
      std::filesystem::remove_all(dir);
      throw Error(ErrorCode::parse, std::string("pinn estimate JSON: ") + e.what());
    }
    std::filesystem::remove_all(dir);
    return est;
  });
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SWING_SINDY_THREADS"); env && *env) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ScenarioResult run_scenario(const Scenario& scn, const Case& c, const HarnessOptions& opts) {
  scn.validate();
  const double horizon = scn.simulated_horizon();
  const auto init = scn.init ? *scn.init : SystemState::zero(c.model);
  const auto sol = simulate(c.model, c.params, init, horizon, scn.solver);
  const auto clean = resample_uniform(sol, scn.t_s, scn.samples);
  return run_batch(scn, c, clean, scn.noise, opts);
}

ScenarioResult run_scenario(const Scenario& scn, const HarnessOptions& opts) {
  return run_scenario(scn, load_case(scn.case_path), opts);
}

WindowSweep sweep_window(const Scenario& scn, const Case& c, const std::vector<double>& windows,
                         const std::vector<double>& sigmas, const std::string& parameter,
                         const HarnessOptions& opts) {
  if (windows.empty() || sigmas.empty()) {
    throw Error(ErrorCode::precondition, "sweep needs at least one window and one noise level");
  }
  const double longest = *std::max_element(windows.begin(), windows.end());
  const double horizon = scn.horizon > 0.0 ? scn.horizon : longest;
  if (longest > horizon * (1.0 + 1e-12)) {
    throw Error(ErrorCode::window_overrun, "sweep window exceeds the simulation horizon");
  }
  const auto full = clean_trajectory(scn, c, horizon);

  WindowSweep sweep;
  sweep.parameter = parameter;
  sweep.windows = windows;
  sweep.sigmas = sigmas;
  sweep.mean_error_pct.resize(static_cast<Eigen::Index>(windows.size()),
                              static_cast<Eigen::Index>(sigmas.size()));
  sweep.failures.resize(sweep.mean_error_pct.rows(), sweep.mean_error_pct.cols());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (!(windows[w] > 0.0)) throw Error(ErrorCode::precondition, "sweep windows must be positive");
    const auto samples = static_cast<std::size_t>(std::llround(windows[w] / scn.t_s));
    const auto clean = full.head(samples);
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      const NoiseSpec noise = sigmas[s] > 0.0 ? NoiseSpec{NoiseKind::gaussian_relative, sigmas[s]} : NoiseSpec{};
      auto cell = scn;
      cell.samples = samples;
      const auto result = run_batch(cell, c, clean, noise, opts);
      double sum = 0.0;
      int count = 0;
      for (const auto& run : result.runs) {
        if (const auto e = parameter_error_pct(run.estimate, parameter)) {
          sum += *e;
          ++count;
        }
      }
      const auto wi = static_cast<Eigen::Index>(w);
      const auto si = static_cast<Eigen::Index>(s);
      sweep.mean_error_pct(wi, si) = count > 0 ? sum / count : kNaN;
      sweep.failures(wi, si) = static_cast<int>(result.runs.size()) - count;
    }
  }
  return sweep;
}

void write_sweep_csv(std::ostream& out, const WindowSweep& sweep) {
  out << "window_s";
  for (const double s : sweep.sigmas) out << ",sigma_" << s;
  out << "\n" << std::setprecision(17);
  for (std::size_t w = 0; w < sweep.windows.size(); ++w) {
    out << sweep.windows[w];
    for (std::size_t s = 0; s < sweep.sigmas.size(); ++s) {
      out << ',';
      write_num(out, sweep.mean_error_pct(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(s)));
    }
    out << "\n";
  }
}

ComparisonReport compare_estimators(const std::vector<Scenario>& scenarios, const HarnessOptions& opts) {
  ComparisonReport report;
  for (const auto& scn : scenarios) {
    const auto c = load_case(scn.case_path);
    ComparisonRow row;
    row.scenario = scn.name;
    auto sindy = scn;
    if (sindy.estimator == EstimatorKind::pinn) sindy.estimator = EstimatorKind::sindy;
    row.sindy = compute_stats(run_scenario(sindy, c, opts));

    auto pinn = scn;
    pinn.estimator = EstimatorKind::pinn;
    try {
      row.pinn = compute_stats(run_scenario(pinn, c, opts));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::backend_unavailable) throw;
      row.notice = "pinn unavailable";
    }

    if (row.pinn) {
      auto worst = [](const ErrorStats& s) {
        double m = 0.0;
        for (const auto& p : s.parameters) m = std::max(m, std::isnan(p.median) ? 0.0 : p.median);
        return m;
      };
      const double a = worst(row.sindy);
      const double b = worst(*row.pinn);
      std::ostringstream os;
      os << std::setprecision(4) << scn.name << ": worst SINDy median error " << a
         << "% <= worst PINN median error " << b << "%";
      report.claims.push_back({os.str(), a <= b});
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_comparison(std::ostream& out, const ComparisonReport& report) {
  out << std::fixed << std::setprecision(3);
  for (const auto& row : report.rows) {
    out << "scenario " << row.scenario << "\n";
    out << "  parameter     sindy_median  sindy_q1  sindy_q3  pinn_median\n";
    for (const auto& p : row.sindy.parameters) {
      out << "  " << std::left << std::setw(12) << p.parameter << std::right << std::setw(14)
          << p.median << std::setw(10) << p.q1 << std::setw(10) << p.q3;
      if (row.pinn) {
        out << std::setw(13) << row.pinn->at(p.parameter).median;
      } else {
        out << std::setw(13) << "n/a";
      }
      out << "\n";
    }
    double total = 0.0;
    for (const double t : row.sindy.timings_ms) total += t;
    if (!row.sindy.timings_ms.empty()) {
      out << "  sindy mean time per run: " << total / static_cast<double>(row.sindy.timings_ms.size())
          << " ms\n";
    }
    if (row.pinn && !row.pinn->timings_ms.empty()) {
      double pt = 0.0;
      for (const double t : row.pinn->timings_ms) pt += t;
      out << "  pinn mean time per run: " << pt / static_cast<double>(row.pinn->timings_ms.size())
          << " ms\n";
    }
    if (!row.notice.empty()) out << "  note: " << row.notice << "\n";
  }
  for (const auto& claim : report.claims) {
    out << (claim.holds ? "HOLDS  " : "FAILS  ") << claim.description << "\n";
  }
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  throw Error(ErrorCode::parse, "unknown report format '" + std::string(text) + "'");
}

void write_errors_csv(std::ostream& out, const std::vector<ScenarioResult>& results) {
  out << "scenario,parameter,run,rel_err_pct\n" << std::setprecision(17);
  for (const auto& r : results) {
    const auto labels = labels_of(r);
    for (const auto& run : r.runs) {
      for (const auto& label : labels) {
        out << r.scenario << ',' << label << ',' << run.run << ',';
        if (const auto e = parameter_error_pct(run.estimate, label)) out << *e;
        out << "\n";
      }
    }
  }
}

void write_stats_csv(std::ostream& out, const std::vector<ScenarioResult>& results) {
  out << "scenario,parameter,count,failures,median,q1,q3,min,max,mean\n" << std::setprecision(17);
  for (const auto& r : results) {
    for (const auto& p : compute_stats(r).parameters) {
      out << r.scenario << ',' << p.parameter << ',' << p.count << ',' << p.failures;
      for (const double v : {p.median, p.q1, p.q3, p.min, p.max, p.mean}) {
        out << ',';
        write_num(out, v);
      }
      out << "\n";
    }
  }
}

std::vector<std::filesystem::path> emit_report(const std::vector<ScenarioResult>& results,
                                               const std::filesystem::path& dir, ReportFormat format) {
  if (results.empty()) throw Error(ErrorCode::precondition, "no results to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::io, "cannot create output directory " + dir.string());
  }
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::csv) {
    const auto errors = dir / "errors.csv";
    auto e = open_out(errors);
    write_errors_csv(e, results);
    check_written(e, errors);
    written.push_back(errors);

    const auto stats = dir / "stats.csv";
    auto s = open_out(stats);
    write_stats_csv(s, results);
    check_written(s, stats);
    written.push_back(stats);
  } else {
    const auto path = dir / "results.json";
    auto out = open_out(path);
    out << json{{"results", results}}.dump(2) << "\n";
    check_written(out, path);
    written.push_back(path);
  }
  const auto timing = dir / "timing.csv";
  auto t = open_out(timing);
  t << "scenario,run,elapsed_ms\n";
  for (const auto& r : results) {
    for (const auto& run : r.runs) t << r.scenario << ',' << run.run << ',' << run.elapsed_ms << "\n";
  }
  check_written(t, timing);
  written.push_back(timing);
  return written;
}

std::vector<ScenarioResult> read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "results.json");
  if (!in) throw Error(ErrorCode::io, "cannot open " + (dir / "results.json").string());
  std::vector<ScenarioResult> results;
  try {
    results = json::parse(in).at("results").get<std::vector<ScenarioResult>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("results.json: ") + e.what());
  }
  std::ifstream timing(dir / "timing.csv");
  std::string line;
  if (timing && std::getline(timing, line)) {
    while (std::getline(timing, line)) {
      const auto a = line.rfind(',');
      const auto b = line.rfind(',', a - 1);
      if (a == std::string::npos || b == std::string::npos) continue;
      const auto scenario = line.substr(0, b);
      const auto run = std::stoul(line.substr(b + 1, a - b - 1));
      const double ms = std::stod(line.substr(a + 1));
      for (auto& r : results) {
        if (r.scenario == scenario && run < r.runs.size()) r.runs[run].elapsed_ms = ms;
      }
    }
  }
  return results;
}

}  // namespace swingid

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "swingid/dynamics.hpp"
#include "swingid/grid_model.hpp"
#include "swingid/sindy.hpp"

namespace swingid {

enum class EstimatorKind { sindy, sindy_library, pinn };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view text);

struct Scenario {
  std::string name;
  std::filesystem::path case_path;
  NoiseSpec noise{NoiseKind::gaussian_relative, 0.05};
  double t_s = 0.01;
  std::size_t samples = 200;
  double horizon = 0.0;  // 0 simulates exactly samples * t_s
  EstimatorKind estimator = EstimatorKind::sindy;
  EstimatorConfig config;
  std::size_t runs = 20;
  std::uint64_t base_seed = 7;
  SolverConfig solver;
  std::optional<SystemState> init;  // all-zero when unset

  double window() const { return static_cast<double>(samples) * t_s; }
  double simulated_horizon() const { return horizon > 0.0 ? horizon : window(); }
  void validate() const;
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double elapsed_ms = 0.0;
  ParameterEstimate estimate;
  std::string error;  // nonempty when the estimator threw for this run

  bool operator==(const RunResult&) const = default;
};

struct ScenarioResult {
  std::string scenario;
  std::string estimator;
  std::vector<RunResult> runs;

  bool operator==(const ScenarioResult&) const = default;
};

// "M_<label>" and "D_<label>" with 1-based bus labels, generators' M first.
std::vector<std::string> parameter_labels(const GridModel& model);

// Relative error in percent for one parameter label, if it was estimated.
std::optional<double> parameter_error_pct(const ParameterEstimate& estimate, std::string_view label);
std::optional<double> parameter_value(const ParameterEstimate& estimate, std::string_view label);

struct ParameterStats {
  std::string parameter;
  std::size_t count = 0;
  std::size_t failures = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct ErrorStats {
  std::vector<ParameterStats> parameters;
  std::vector<double> timings_ms;

  const ParameterStats& at(std::string_view parameter) const;
};

// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

ErrorStats compute_stats(const ScenarioResult& result);

// Estimators that are not built in. The PINN comparator is reached through
// this hook; see external_pinn_backend().
using EstimatorBackend =
    std::function<ParameterEstimate(const Case&, const SampledTrajectory&, std::uint64_t seed)>;

// Runs the command named by SWING_SINDY_PINN_CMD as
//   <cmd> --case <case.json> --trajectory <traj.csv> --seed <n> --out <estimate.json>
// and parses the estimate JSON it writes. Empty when the variable is unset.
std::optional<EstimatorBackend> external_pinn_backend();

struct HarnessOptions {
  std::size_t threads = 0;            // 0 reads SWING_SINDY_THREADS, else hardware concurrency
  std::function<double()> clock_ms;   // wall clock in ms; steady_clock when empty
  std::optional<EstimatorBackend> pinn;  // overrides external_pinn_backend()
};

std::size_t resolve_threads(std::size_t requested);

// One noiseless trajectory, re-noised with seed base_seed + r for run r.
// Only the estimator call is timed.
ScenarioResult run_scenario(const Scenario& scenario, const Case& c, const HarnessOptions& opts = {});
ScenarioResult run_scenario(const Scenario& scenario, const HarnessOptions& opts = {});

struct WindowSweep {
  std::string parameter;
  std::vector<double> windows;
  std::vector<double> sigmas;
  Eigen::MatrixXd mean_error_pct;  // windows x sigmas
  Eigen::MatrixXi failures;
};

// Mean relative error of one parameter per (window, relative Gaussian sigma).
// A sigma of 0 means noiseless data.
WindowSweep sweep_window(const Scenario& scenario, const Case& c, const std::vector<double>& windows,
                         const std::vector<double>& sigmas, const std::string& parameter = "D_1",
                         const HarnessOptions& opts = {});

void write_sweep_csv(std::ostream& out, const WindowSweep& sweep);

struct ComparisonRow {
  std::string scenario;
  ErrorStats sindy;
  std::optional<ErrorStats> pinn;
  std::string notice;
};

struct OrderingClaim {
  std::string description;
  bool holds = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::vector<OrderingClaim> claims;
};

ComparisonReport compare_estimators(const std::vector<Scenario>& scenarios,
                                    const HarnessOptions& opts = {});

void write_comparison(std::ostream& out, const ComparisonReport& report);

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view text);

// csv: errors.csv (long format), stats.csv. json: results.json.
// Both formats also write timing.csv; every other file is a pure function of
// the estimates, so repeated seeded runs produce identical bytes.
std::vector<std::filesystem::path> emit_report(const std::vector<ScenarioResult>& results,
                                               const std::filesystem::path& dir, ReportFormat format);

// Reads results.json (and timing.csv when present) written by emit_report.
std::vector<ScenarioResult> read_report(const std::filesystem::path& dir);

void write_errors_csv(std::ostream& out, const std::vector<ScenarioResult>& results);
void write_stats_csv(std::ostream& out, const std::vector<ScenarioResult>& results);

}  // namespace swingid

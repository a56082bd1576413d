#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swingid/dynamics.hpp"
#include "swingid/error.hpp"
#include "swingid/grid_model.hpp"
#include "swingid/harness.hpp"
#include "swingid/json_io.hpp"

namespace fs = std::filesystem;
using namespace swingid;

namespace {

struct ScenarioArgs {
  std::string case_path;
  std::string noise = "gaussian:0.05";
  double t_s = 0.01;
  std::size_t samples = 200;
  double horizon = 0.0;
  std::size_t runs = 20;
  std::uint64_t seed = 7;
  std::string estimator = "sindy";
  std::string deriv = "savgol:31:3";
  double threshold = 0.025;
  int max_iter = 20;
  std::size_t threads = 0;
  std::string library;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--case", a.case_path, "case JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--noise", a.noise, "none | gaussian:<rel> | gaussian-abs:<sigma> | logistic:<level>")
      ->capture_default_str();
  cmd->add_option("--ts", a.t_s, "sampling period [s]")->capture_default_str();
  cmd->add_option("--samples", a.samples, "samples per trajectory")->capture_default_str();
  cmd->add_option("--horizon", a.horizon, "simulated horizon [s], 0 = samples*ts");
  cmd->add_option("--runs", a.runs, "Monte-Carlo runs")->capture_default_str();
  cmd->add_option("--seed", a.seed, "base seed; run r uses seed+r")->capture_default_str();
  cmd->add_option("--estimator", a.estimator, "sindy | sindy-library | pinn")->capture_default_str();
  cmd->add_option("--deriv", a.deriv, "fd | savgol:<window>:<order>")->capture_default_str();
  cmd->add_option("--threshold", a.threshold, "STLSQ threshold (sindy-library)")->capture_default_str();
  cmd->add_option("--max-iter", a.max_iter, "STLSQ iteration cap")->capture_default_str();
  cmd->add_option("--library", a.library, "comma-separated candidate terms (sindy-library)");
  cmd->add_option("--threads", a.threads, "worker threads, 0 = SWING_SINDY_THREADS or all cores");
}

Scenario make_scenario(const ScenarioArgs& a) {
  Scenario s;
  s.case_path = a.case_path;
  s.name = fs::path(a.case_path).stem().string();
  s.noise = NoiseSpec::parse(a.noise);
  s.t_s = a.t_s;
  s.samples = a.samples;
  s.horizon = a.horizon;
  s.runs = a.runs;
  s.base_seed = a.seed;
  s.estimator = parse_estimator(a.estimator);
  s.config.derivative = DerivativeMethod::parse(a.deriv);
  s.config.mode = s.estimator == EstimatorKind::sindy_library ? EstimatorMode::library
                                                              : EstimatorMode::physics;
  s.config.threshold = a.threshold;
  s.config.max_iter = a.max_iter;
  std::stringstream terms(a.library);
  for (std::string t; std::getline(terms, t, ',');)
    if (!t.empty()) s.config.library.push_back(t);
  s.validate();
  return s;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::parse, "empty list");
  return out;
}

void print_summary(const ScenarioResult& r) {
  const auto stats = compute_stats(r);
  std::printf("%s  estimator=%s  runs=%zu\n", r.scenario.c_str(), r.estimator.c_str(), r.runs.size());
  std::printf("  %-8s %9s %9s %9s %9s\n", "param", "median%", "q1%", "q3%", "fail");
  for (const auto& p : stats.parameters)
    std::printf("  %-8s %9.3f %9.3f %9.3f %9zu\n", p.parameter.c_str(), p.median, p.q1, p.q3,
                p.failures);
  if (!stats.timings_ms.empty())
    std::printf("  median time %.3f ms\n", quantile(stats.timings_ms, 0.5));
}

int fail(const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swing equation inertia/damping identification benchmark"};
  app.require_subcommand(1);

  ScenarioArgs est;
  std::string est_out = "out";
  std::string est_format = "csv";
  auto* estimate = app.add_subcommand("estimate", "run a seeded Monte-Carlo scenario");
  add_scenario_options(estimate, est);
  estimate->add_option("--out", est_out, "output directory")->capture_default_str();
  estimate->add_option("--format", est_format, "csv | json")->capture_default_str();

  std::string sim_case, sim_out, sim_noise = "none";
  double sim_ts = 0.01;
  std::size_t sim_samples = 200;
  std::uint64_t sim_seed = 7;
  auto* simulate_cmd = app.add_subcommand("simulate", "write one sampled trajectory as CSV");
  simulate_cmd->add_option("--case", sim_case)->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--ts", sim_ts)->capture_default_str();
  simulate_cmd->add_option("--samples", sim_samples)->capture_default_str();
  simulate_cmd->add_option("--noise", sim_noise)->capture_default_str();
  simulate_cmd->add_option("--seed", sim_seed)->capture_default_str();
  simulate_cmd->add_option("--out", sim_out, "trajectory CSV path")->required();

  ScenarioArgs sw;
  std::string sw_windows = "0.5,1,2,5", sw_sigmas = "0.05,0.1", sw_param = "D_1", sw_out;
  auto* sweep = app.add_subcommand("sweep", "mean error of one parameter per window and noise level");
  add_scenario_options(sweep, sw);
  sweep->add_option("--windows", sw_windows, "comma-separated seconds")->capture_default_str();
  sweep->add_option("--sigmas", sw_sigmas, "comma-separated relative noise levels")
      ->capture_default_str();
  sweep->add_option("--parameter", sw_param)->capture_default_str();
  sweep->add_option("--out", sw_out, "CSV path, stdout when omitted");

  std::vector<std::string> cmp_cases;
  ScenarioArgs cmp;
  cmp.case_path = "unused";
  auto* compare = app.add_subcommand("compare", "sindy against the pinn backend on several cases");
  compare->add_option("--cases", cmp_cases)->required()->check(CLI::ExistingFile);
  compare->add_option("--noise", cmp.noise)->capture_default_str();
  compare->add_option("--ts", cmp.t_s)->capture_default_str();
  compare->add_option("--samples", cmp.samples)->capture_default_str();
  compare->add_option("--runs", cmp.runs)->capture_default_str();
  compare->add_option("--seed", cmp.seed)->capture_default_str();
  compare->add_option("--deriv", cmp.deriv)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*estimate) {
      const auto scenario = make_scenario(est);
      const auto format = parse_report_format(est_format);
      HarnessOptions opts;
      opts.threads = est.threads;
      const auto result = run_scenario(scenario, opts);
      const auto files = emit_report({result}, est_out, format);
      print_summary(result);
      for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
    } else if (*simulate_cmd) {
      const auto c = load_case(sim_case);
      const double horizon = static_cast<double>(sim_samples) * sim_ts;
      const auto sol = simulate(c.model, c.params, SystemState::zero(c.model), horizon);
      auto traj = resample_uniform(sol, sim_ts, sim_samples);
      const auto noise = NoiseSpec::parse(sim_noise);
      if (noise.kind != NoiseKind::none) traj = add_noise(traj, noise, sim_seed);
      save_trajectory_csv(sim_out, traj);
      std::printf("wrote %s (%zu samples)\n", sim_out.c_str(), traj.size());
    } else if (*sweep) {
      const auto windows = parse_list(sw_windows);
      const auto sigmas = parse_list(sw_sigmas);
      auto scenario = make_scenario(sw);
      double max_window = 0.0;
      for (double w : windows) max_window = std::max(max_window, w);
      if (scenario.horizon <= 0.0) scenario.horizon = max_window;
      const auto c = load_case(scenario.case_path);
      HarnessOptions opts;
      opts.threads = sw.threads;
      const auto table = sweep_window(scenario, c, windows, sigmas, sw_param, opts);
      if (sw_out.empty()) {
        write_sweep_csv(std::cout, table);
      } else {
        std::ofstream out(sw_out);
        if (!out) throw Error(ErrorCode::io, "cannot write " + sw_out);
        write_sweep_csv(out, table);
      }
    } else if (*compare) {
      std::vector<Scenario> scenarios;
      for (const auto& path : cmp_cases) {
        auto a = cmp;
        a.case_path = path;
        scenarios.push_back(make_scenario(a));
      }
      write_comparison(std::cout, compare_estimators(scenarios));
    }
  } catch (const Error& e) {
    return fail(std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "swingid/differentiation.hpp"
#include "swingid/dynamics.hpp"
#include "swingid/error.hpp"
#include "swingid/grid_model.hpp"
#include "swingid/harness.hpp"
#include "swingid/json_io.hpp"
#include "swingid/sindy.hpp"

namespace py = pybind11;
using namespace swingid;

namespace {

std::map<std::size_t, double> by_label(const std::map<BusId, double>& m) {
  std::map<std::size_t, double> out;
  for (const auto& [bus, v] : m) out[bus.label()] = v;
  return out;
}

std::vector<std::size_t> labels(const std::vector<BusId>& buses) {
  std::vector<std::size_t> out;
  for (const auto b : buses) out.push_back(b.label());
  return out;
}

BusId bus_from_label(const Case& c, std::size_t label) {
  if (label < 1 || label > c.model.n_buses()) {
    throw Error(ErrorCode::precondition, "bus label " + std::to_string(label) + " out of range");
  }
  return BusId::from_label(label);
}

EstimatorMode parse_mode(const std::string& s) {
  if (s == "physics") return EstimatorMode::physics;
  if (s == "library") return EstimatorMode::library;
  throw Error(ErrorCode::parse, "unknown estimator mode '" + s + "'");
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Swing-equation simulation, PMU noise and SINDy parameter estimation";

  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<Case>(m, "Case")
      .def_property_readonly("name", [](const Case& c) { return c.model.name(); })
      .def_property_readonly("n_buses", [](const Case& c) { return c.model.n_buses(); })
      .def_property_readonly("generators", [](const Case& c) { return labels(c.model.generator_buses()); })
      .def_property_readonly("loads", [](const Case& c) { return labels(c.model.load_buses()); })
      .def_property_readonly("susceptance", [](const Case& c) { return c.model.susceptance(); })
      .def_property_readonly("injection",
                             [](const Case& c) {
                               std::map<std::size_t, double> out;
                               for (std::size_t i = 0; i < c.model.n_buses(); ++i)
                                 out[i + 1] = c.model.injection(BusId{i});
                               return out;
                             })
      .def_property_readonly("M", [](const Case& c) { return by_label(c.params.inertia); })
      .def_property_readonly("D", [](const Case& c) { return by_label(c.params.damping); })
      .def_readonly("note", &Case::note)
      .def("to_json", [](const Case& c) { return emit_case(c); })
      .def("__eq__", [](const Case& a, const Case& b) { return a == b; });

  m.def("load_case", &load_case, py::arg("path"));
  m.def("parse_case", [](const std::string& text) { return parse_case(text); }, py::arg("text"));

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def_static("parse", &NoiseSpec::parse)
      .def_property_readonly("level", [](const NoiseSpec& s) { return s.level; })
      .def("__str__", &NoiseSpec::to_string);

  py::class_<DerivativeMethod>(m, "DerivativeMethod")
      .def_static("parse", &DerivativeMethod::parse)
      .def_readonly("window", &DerivativeMethod::window)
      .def_readonly("order", &DerivativeMethod::order)
      .def("__str__", &DerivativeMethod::to_string);

  py::class_<SampledTrajectory>(m, "SampledTrajectory")
      .def_readonly("t_s", &SampledTrajectory::t_s)
      .def_readonly("delta", &SampledTrajectory::delta)
      .def_readonly("omega", &SampledTrajectory::omega)
      .def_property_readonly("noise",
                             [](const SampledTrajectory& t) -> std::optional<std::string> {
                               if (!t.noise) return std::nullopt;
                               return t.noise->spec.to_string();
                             })
      .def_property_readonly("times",
                             [](const SampledTrajectory& t) {
                               Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
                               for (std::size_t r = 0; r < t.size(); ++r) v(static_cast<Eigen::Index>(r)) = t.time(r);
                               return v;
                             })
      .def("head", &SampledTrajectory::head)
      .def("__len__", &SampledTrajectory::size);

  m.def(
      "simulate",
      [](const Case& c, double t_s, std::size_t samples, double horizon, double rtol, double atol) {
        SolverConfig solver;
        solver.rtol = rtol;
        solver.atol = atol;
        const double h = horizon > 0.0 ? horizon : t_s * static_cast<double>(samples);
        const auto sol = simulate(c.model, c.params, SystemState::zero(c.model), h, solver);
        return resample_uniform(sol, t_s, samples);
      },
      py::arg("case"), py::arg("t_s") = 0.01, py::arg("samples") = 200, py::arg("horizon") = 0.0,
      py::arg("rtol") = 1e-6, py::arg("atol") = 1e-8,
      "Simulate from the all-zero state and sample at t_s, 2 t_s, ...");

  m.def(
      "add_noise",
      [](const SampledTrajectory& t, const std::string& spec, std::uint64_t seed) {
        return add_noise(t, NoiseSpec::parse(spec), seed);
      },
      py::arg("trajectory"), py::arg("spec"), py::arg("seed"));

  m.def(
      "analytic_derivatives",
      [](const Case& c, const SampledTrajectory& t) {
        const auto d = analytic_derivatives(c.model, c.params, t);
        return py::make_tuple(d.delta_dot, d.omega_dot);
      },
      py::arg("case"), py::arg("trajectory"), "Returns (delta_dot, omega_dot).");

  m.def("save_trajectory_csv", &save_trajectory_csv, py::arg("path"), py::arg("trajectory"));
  m.def("load_trajectory_csv", &load_trajectory_csv, py::arg("path"));

  m.def(
      "finite_difference",
      [](const Eigen::VectorXd& x, double t_s) { return finite_difference(x, t_s).values; },
      py::arg("series"), py::arg("t_s"));
  m.def(
      "savgol_derivative",
      [](const Eigen::VectorXd& x, double t_s, int window, int order) {
        return savgol_derivative(x, t_s, window, order).values;
      },
      py::arg("series"), py::arg("t_s"), py::arg("window") = 31, py::arg("order") = 3);

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init([](const std::string& derivative, const std::string& mode,
                       std::vector<std::string> library, double threshold, int max_iter) {
             EstimatorConfig c;
             c.derivative = DerivativeMethod::parse(derivative);
             c.mode = parse_mode(mode);
             c.library = std::move(library);
             c.threshold = threshold;
             c.max_iter = max_iter;
             return c;
           }),
           py::arg("derivative") = "savgol:31:3", py::arg("mode") = "physics",
           py::arg("library") = std::vector<std::string>{}, py::arg("threshold") = 0.025,
           py::arg("max_iter") = 20)
      .def_property_readonly("derivative", [](const EstimatorConfig& c) { return c.derivative.to_string(); })
      .def_property_readonly("mode",
                             [](const EstimatorConfig& c) {
                               return c.mode == EstimatorMode::physics ? "physics" : "library";
                             })
      .def_readonly("library", &EstimatorConfig::library)
      .def_readonly("threshold", &EstimatorConfig::threshold)
      .def_readonly("max_iter", &EstimatorConfig::max_iter);

  py::class_<BusEstimate>(m, "BusEstimate")
      .def_property_readonly("bus", [](const BusEstimate& b) { return b.bus.label(); })
      .def_property_readonly("kind", [](const BusEstimate& b) { return std::string(to_string(b.kind)); })
      .def_readonly("M_hat", &BusEstimate::inertia)
      .def_readonly("D_hat", &BusEstimate::damping)
      .def_readonly("residual", &BusEstimate::residual)
      .def_readonly("rel_err_M", &BusEstimate::rel_err_inertia)
      .def_readonly("rel_err_D", &BusEstimate::rel_err_damping)
      .def_property_readonly("status", [](const BusEstimate& b) { return std::string(to_string(b.status)); })
      .def_readonly("message", &BusEstimate::message)
      .def_readonly("active_terms", &BusEstimate::active_terms)
      .def("__eq__", [](const BusEstimate& a, const BusEstimate& b) { return a == b; })
      .def("__repr__", [](const BusEstimate& b) { return nlohmann::json(b).dump(); });

  m.def(
      "estimate_all",
      [](const Case& c, const SampledTrajectory& t, std::optional<EstimatorConfig> config,
         bool exact_derivatives, bool with_truth) {
        const auto cfg = config ? *config : EstimatorConfig{};
        const TrueParameters* truth = with_truth ? &c.params : nullptr;
        ParameterEstimate e;
        if (exact_derivatives) {
          e = estimate_all(c.model, t, analytic_derivatives(c.model, c.params, t), cfg, truth);
        } else {
          e = estimate_all(c.model, t, cfg, truth);
        }
        return e.buses;
      },
      py::arg("case"), py::arg("trajectory"), py::arg("config") = py::none(),
      py::arg("exact_derivatives") = false, py::arg("with_truth") = true);

  m.def(
      "estimate_node",
      [](const Case& c, const SampledTrajectory& t, std::size_t bus, std::optional<EstimatorConfig> config) {
        const auto id = bus_from_label(c, bus);
        return estimate_node_decentralized(node_slice(c.model, id), local_measurements(c.model, t, id),
                                           config ? *config : EstimatorConfig{});
      },
      py::arg("case"), py::arg("trajectory"), py::arg("bus"), py::arg("config") = py::none(),
      "Estimate one bus from its own row of B and its neighbours' angle series.");

  m.def(
      "estimate_to_json",
      [](const std::vector<BusEstimate>& buses) { return nlohmann::json(ParameterEstimate{buses}).dump(); },
      py::arg("estimates"), "Serialize to the per-bus estimate JSON schema.");

  m.def("default_library", &default_library);
  m.def(
      "build_library",
      [](const Case& c, const SampledTrajectory& t, std::size_t bus, const std::vector<std::string>& names) {
        const auto lib = build_library(c.model, t, bus_from_label(c, bus), names);
        return py::make_tuple(lib.labels, lib.matrix);
      },
      py::arg("case"), py::arg("trajectory"), py::arg("bus"), py::arg("names"),
      "Returns (labels, matrix).");
  m.def(
      "stlsq",
      [](const Eigen::MatrixXd& matrix, const std::vector<std::string>& labels, const Eigen::VectorXd& target,
         double threshold, int max_iter) {
        const auto fit = stlsq(CandidateLibrary{labels, matrix}, target, threshold, max_iter);
        py::dict out;
        out["coefficients"] = fit.coefficients;
        out["active"] = fit.active_labels;
        out["residual_norm"] = fit.residual_norm;
        out["iterations"] = fit.iterations;
        out["converged"] = fit.converged;
        return out;
      },
      py::arg("matrix"), py::arg("labels"), py::arg("target"), py::arg("threshold") = 0.025,
      py::arg("max_iter") = 20);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init([](std::filesystem::path case_path, const std::string& noise, double t_s,
                       std::size_t samples, std::size_t runs, std::uint64_t seed, const std::string& estimator,
                       const std::string& derivative, double horizon, std::string name) {
             Scenario s;
             s.case_path = std::move(case_path);
             s.name = name.empty() ? s.case_path.stem().string() : std::move(name);
             s.noise = NoiseSpec::parse(noise);
             s.t_s = t_s;
             s.samples = samples;
             s.runs = runs;
             s.base_seed = seed;
             s.estimator = parse_estimator(estimator);
             s.config.derivative = DerivativeMethod::parse(derivative);
             s.horizon = horizon;
             s.validate();
             return s;
           }),
           py::arg("case_path"), py::arg("noise") = "gaussian:0.05", py::arg("t_s") = 0.01,
           py::arg("samples") = 200, py::arg("runs") = 20, py::arg("seed") = 7, py::arg("estimator") = "sindy",
           py::arg("derivative") = "savgol:31:3", py::arg("horizon") = 0.0, py::arg("name") = "")
      .def_readonly("name", &Scenario::name)
      .def_readonly("runs", &Scenario::runs)
      .def_readonly("samples", &Scenario::samples);

  m.def(
      "run_scenario",
      [](const Scenario& s, std::size_t threads) {
        HarnessOptions opts;
        opts.threads = threads;
        ScenarioResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(s, opts);
        }
        auto out = nlohmann::json(r);
        for (std::size_t i = 0; i < r.runs.size(); ++i) out["runs"][i]["elapsed_ms"] = r.runs[i].elapsed_ms;
        nlohmann::json stats = nlohmann::json::object();
        for (const auto& p : compute_stats(r).parameters) {
          stats[p.parameter] = {{"count", p.count}, {"failures", p.failures}, {"median", p.median},
                                {"q1", p.q1},       {"q3", p.q3},             {"min", p.min},
                                {"max", p.max},     {"mean", p.mean}};
        }
        out["stats"] = stats;
        return to_python(out);
      },
      py::arg("scenario"), py::arg("threads") = 0,
      "Run a seeded Monte-Carlo scenario; returns per-run estimates and error statistics.");
}

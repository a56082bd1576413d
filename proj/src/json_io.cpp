#include "swingid/json_io.hpp"

#include "swingid/error.hpp"

namespace swingid {

namespace {

using json = nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

EstimateStatus parse_status(const std::string& s) {
  if (s == "ok") return EstimateStatus::ok;
  if (s == "rank_deficient") return EstimateStatus::rank_deficient;
  if (s == "unphysical") return EstimateStatus::unphysical;
  throw Error(ErrorCode::parse, "unknown estimate status '" + s + "'");
}

}  // namespace

void to_json(json& j, const BusEstimate& e) {
  j = json{{"bus", e.bus.label()},
           {"kind", std::string(to_string(e.kind))},
           {"M_hat", opt(e.inertia)},
           {"D_hat", opt(e.damping)},
           {"residual", e.residual},
           {"rel_err_M", opt(e.rel_err_inertia)},
           {"rel_err_D", opt(e.rel_err_damping)},
           {"status", std::string(to_string(e.status))}};
  if (!e.message.empty()) j["message"] = e.message;
  if (!e.active_terms.empty()) j["active_terms"] = e.active_terms;
}

void from_json(const json& j, BusEstimate& e) {
  const auto label = j.at("bus").get<std::size_t>();
  if (label == 0) throw Error(ErrorCode::parse, "estimate bus labels are 1-based");
  e.bus = BusId::from_label(label);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gen") e.kind = BusKind::generator;
  else if (kind == "load") e.kind = BusKind::load;
  else throw Error(ErrorCode::parse, "unknown bus kind '" + kind + "'");
  e.inertia = get_opt(j, "M_hat");
  e.damping = get_opt(j, "D_hat");
  e.residual = j.value("residual", 0.0);
  e.rel_err_inertia = get_opt(j, "rel_err_M");
  e.rel_err_damping = get_opt(j, "rel_err_D");
  e.status = parse_status(j.value("status", std::string("ok")));
  e.message = j.value("message", std::string{});
  e.active_terms = j.value("active_terms", std::vector<std::string>{});
}

void to_json(json& j, const ParameterEstimate& e) {
  j = json::array();
  for (const auto& b : e.buses) j.push_back(b);
}

void from_json(const json& j, ParameterEstimate& e) {
  if (!j.is_array()) throw Error(ErrorCode::parse, "estimate JSON must be an array of buses");
  e.buses.clear();
  for (const auto& b : j) e.buses.push_back(b.get<BusEstimate>());
}

void to_json(json& j, const RunResult& r) {
  j = json{{"run", r.run}, {"seed", r.seed}, {"estimates", r.estimate}};
  if (!r.error.empty()) j["error"] = r.error;
}

void from_json(const json& j, RunResult& r) {
  r.run = j.at("run").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.estimate = j.at("estimates").get<ParameterEstimate>();
  r.error = j.value("error", std::string{});
  r.elapsed_ms = 0.0;
}

void to_json(json& j, const ScenarioResult& r) {
  j = json{{"scenario", r.scenario}, {"estimator", r.estimator}, {"runs", r.runs}};
}

void from_json(const json& j, ScenarioResult& r) {
  r.scenario = j.at("scenario").get<std::string>();
  r.estimator = j.at("estimator").get<std::string>();
  r.runs = j.at("runs").get<std::vector<RunResult>>();
}

}  // namespace swingid

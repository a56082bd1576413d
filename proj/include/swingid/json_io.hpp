#pragma once

#include <nlohmann/json.hpp>

#include "swingid/harness.hpp"
#include "swingid/sindy.hpp"

namespace swingid {

// Per-bus estimate schema:
// { "bus", "kind": "gen"|"load", "M_hat", "D_hat", "residual", "rel_err_M",
//   "rel_err_D", "status": "ok"|"rank_deficient"|"unphysical" }
// plus "message" / "active_terms" when they are nonempty.
void to_json(nlohmann::json& j, const BusEstimate& e);
void from_json(const nlohmann::json& j, BusEstimate& e);

// Array of per-bus estimates.
void to_json(nlohmann::json& j, const ParameterEstimate& e);
void from_json(const nlohmann::json& j, ParameterEstimate& e);

// elapsed_ms is omitted: it is written to timing.csv instead.
void to_json(nlohmann::json& j, const RunResult& r);
void from_json(const nlohmann::json& j, RunResult& r);

void to_json(nlohmann::json& j, const ScenarioResult& r);
void from_json(const nlohmann::json& j, ScenarioResult& r);

}  // namespace swingid

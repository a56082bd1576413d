#pragma once

#include <filesystem>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "swingid/dynamics.hpp"
#include "swingid/error.hpp"
#include "swingid/grid_model.hpp"

namespace swingid::test {

inline std::filesystem::path case_path(const std::string& name) {
  return std::filesystem::path(SWINGID_DATA_DIR) / "cases" / (name + ".json");
}

inline Case load_fixture(const std::string& name) { return load_case(case_path(name)); }

// Noiseless 2 s trajectory at 100 Hz from the all-zero state.
inline SampledTrajectory clean_trajectory(const Case& c, double t_s = 0.01, std::size_t samples = 200) {
  const auto sol = simulate(c.model, c.params, SystemState::zero(c.model), t_s * samples);
  return resample_uniform(sol, t_s, samples);
}

template <class F>
ErrorCode thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected swingid::Error");
  return ErrorCode::io;
}

}  // namespace swingid::test

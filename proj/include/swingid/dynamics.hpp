#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "swingid/grid_model.hpp"

namespace swingid {

// delta has one entry per bus; omega one per generator, in generator_buses() order.
struct SystemState {
  Eigen::VectorXd delta;
  Eigen::VectorXd omega;

  static SystemState zero(const GridModel& model);
  bool operator==(const SystemState&) const = default;
};

// Sum over neighbours of B(bus, j) * sin(delta_bus - delta_j), for one state.
double coupling_flow(const GridModel& model, const Eigen::VectorXd& delta, BusId bus);

SystemState swing_rhs(const GridModel& model, const TrueParameters& params,
                      const SystemState& state);

struct SolverConfig {
  double rtol = 1e-6;
  double atol = 1e-8;
  double initial_step = 0.0;  // 0 selects a starting step automatically
  double max_step = 0.0;      // 0 means unbounded
  std::size_t max_steps = 5'000'000;
};

// Dense Dormand-Prince 5(4) solution. Evaluation between accepted steps uses
// the method's fourth-order continuous extension.
class Solution {
 public:
  double horizon() const { return t_.empty() ? 0.0 : t_.back() + h_.back(); }
  std::size_t steps() const { return t_.size(); }
  std::size_t rhs_evaluations() const { return rhs_evals_; }
  SystemState at(double t) const;

 private:
  friend Solution simulate(const GridModel&, const TrueParameters&, const SystemState&, double,
                           const SolverConfig&);

  std::size_t n_delta_ = 0;
  std::size_t n_omega_ = 0;
  std::size_t rhs_evals_ = 0;
  std::vector<double> t_;
  std::vector<double> h_;
  // Five interpolation coefficient vectors per step, stored contiguously.
  std::vector<Eigen::VectorXd> coeffs_;
};

Solution simulate(const GridModel& model, const TrueParameters& params, const SystemState& init,
                  double horizon, const SolverConfig& solver = {});

enum class NoiseKind { none, gaussian_relative, gaussian_absolute, logistic_absolute };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double level = 0.0;

  // "none", "gaussian:0.05" (relative), "gaussian-abs:0.01", "logistic:0.01"
  static NoiseSpec parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const NoiseSpec&) const = default;
};

struct NoiseRecord {
  NoiseSpec spec;
  std::uint64_t seed = 0;
  bool operator==(const NoiseRecord&) const = default;
};

// Row r holds the sample at time (r + 1) * t_s.
struct SampledTrajectory {
  double t_s = 0.0;
  Eigen::MatrixXd delta;  // T x N
  Eigen::MatrixXd omega;  // T x N_G
  std::optional<NoiseRecord> noise;

  std::size_t size() const { return static_cast<std::size_t>(delta.rows()); }
  double time(std::size_t row) const { return static_cast<double>(row + 1) * t_s; }
  SystemState state(std::size_t row) const;
  // First `count` samples.
  SampledTrajectory head(std::size_t count) const;
  bool operator==(const SampledTrajectory&) const = default;
};

SampledTrajectory resample_uniform(const Solution& solution, double t_s, std::size_t samples);

SampledTrajectory add_noise(const SampledTrajectory& traj, const NoiseSpec& spec,
                            std::uint64_t seed);

// Exact time derivatives of every channel, evaluated from the sampled states.
struct ChannelDerivatives {
  Eigen::MatrixXd delta_dot;  // T x N
  Eigen::MatrixXd omega_dot;  // T x N_G
};

ChannelDerivatives analytic_derivatives(const GridModel& model, const TrueParameters& params,
                                        const SampledTrajectory& traj);

// Header: t,delta_1..delta_N,omega_g1..omega_gK. 17 significant digits.
void write_trajectory_csv(std::ostream& out, const SampledTrajectory& traj);
void save_trajectory_csv(const std::filesystem::path& path, const SampledTrajectory& traj);
SampledTrajectory read_trajectory_csv(std::istream& in);
SampledTrajectory load_trajectory_csv(const std::filesystem::path& path);

}  // namespace swingid

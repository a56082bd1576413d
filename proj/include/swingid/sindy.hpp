#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "swingid/differentiation.hpp"
#include "swingid/dynamics.hpp"
#include "swingid/grid_model.hpp"

namespace swingid {

// target ~= regressors * coefficients, one row per sample.
struct RegressionProblem {
  Eigen::VectorXd target;
  Eigen::MatrixXd regressors;
  std::vector<std::string> labels;

  void validate() const;
};

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;
  double residual_norm = 0.0;
  double condition = 1.0;  // ratio of extreme singular values
};

// Smallest singular value below this fraction of the largest is rank deficient.
inline constexpr double kRankTolerance = 1e-10;

// Householder QR solve. Throws rank_deficient / zero_regressor when the
// columns are not linearly independent.
LeastSquaresFit solve_least_squares(const RegressionProblem& problem);

// Per sample: sum_j B(bus, j) * sin(delta_bus - delta_j).
Eigen::VectorXd compute_coupling_terms(const GridModel& model, const SampledTrajectory& traj,
                                       BusId bus);

// Columns [-omega, P^M - coupling]; unknowns [D/M, 1/M].
RegressionProblem build_generator_regression(const GridModel& model, const SampledTrajectory& traj,
                                             const DerivativeEstimate& omega_dot, BusId bus);

// Single column -(P^L + coupling); unknown [1/D].
RegressionProblem build_load_regression(const GridModel& model, const SampledTrajectory& traj,
                                        const DerivativeEstimate& delta_dot, BusId bus);

struct RecoveredParams {
  std::optional<double> inertia;  // generators only
  double damping = 0.0;
};

// Generator: c = [D/M, 1/M]. Load: c = [1/D]. Nonpositive 1/M or 1/D throw unphysical.
RecoveredParams recover_params(const Eigen::VectorXd& coefficients, BusKind kind);

enum class EstimateStatus { ok, rank_deficient, unphysical };

std::string_view to_string(EstimateStatus status);

struct BusEstimate {
  BusId bus;
  BusKind kind = BusKind::generator;
  std::optional<double> inertia;
  std::optional<double> damping;
  double residual = 0.0;
  std::optional<double> rel_err_inertia;  // |est - true| / true
  std::optional<double> rel_err_damping;
  EstimateStatus status = EstimateStatus::ok;
  std::string message;
  std::vector<std::string> active_terms;  // set in library mode

  bool operator==(const BusEstimate&) const = default;
};

struct ParameterEstimate {
  std::vector<BusEstimate> buses;  // ascending bus index

  const BusEstimate& at(BusId bus) const;
  bool all_ok() const;
  void attach_truth(const TrueParameters& truth);

  bool operator==(const ParameterEstimate&) const = default;
};

enum class EstimatorMode { physics, library };

struct EstimatorConfig {
  DerivativeMethod derivative = DerivativeMethod::savgol(31, 3);
  EstimatorMode mode = EstimatorMode::physics;
  std::vector<std::string> library;  // empty selects default_library()
  double threshold = 0.025;
  int max_iter = 20;
};

// Central estimation over every bus. Per-bus regression failures are recorded
// in that bus's status; the remaining buses are still estimated.
ParameterEstimate estimate_all(const GridModel& model, const SampledTrajectory& traj,
                               const EstimatorConfig& config, const TrueParameters* truth = nullptr);

// Same, but regression targets come from precomputed channel derivatives.
ParameterEstimate estimate_all(const GridModel& model, const SampledTrajectory& traj,
                               const ChannelDerivatives& derivatives, const EstimatorConfig& config,
                               const TrueParameters* truth = nullptr);

// What a single node knows about the network: its own injection and its row
// of the susceptance matrix (nonzero entries, ascending neighbour order).
struct NodeSlice {
  BusId bus;
  BusKind kind = BusKind::generator;
  double injection = 0.0;
  std::vector<std::pair<BusId, double>> couplings;
};

NodeSlice node_slice(const GridModel& model, BusId bus);

// What a single node measures locally plus what its neighbours send it.
struct LocalMeasurements {
  double t_s = 0.0;
  Eigen::VectorXd delta;
  std::optional<Eigen::VectorXd> omega;
  std::map<BusId, Eigen::VectorXd> neighbor_delta;
};

LocalMeasurements local_measurements(const GridModel& model, const SampledTrajectory& traj,
                                     BusId bus);

BusEstimate estimate_node_decentralized(const NodeSlice& slice, const LocalMeasurements& local,
                                        const EstimatorConfig& config);

// Candidate functions of (omega, a), where a is the electrical drive signal:
// P^M - coupling at generators, -(P^L + coupling) at loads.
// Canonical names: "omega", "omega^2", "sin(a)", "cos(a)", "a", "1".
// Aliases identity(omega), square(omega), identity(a), constant are accepted.
struct CandidateLibrary {
  std::vector<std::string> labels;
  Eigen::MatrixXd matrix;
};

std::vector<std::string> default_library();

// omega may be empty (load buses); omega terms are then rejected.
CandidateLibrary build_library(const Eigen::VectorXd& omega, const Eigen::VectorXd& drive,
                               std::span<const std::string> names);

CandidateLibrary build_library(const GridModel& model, const SampledTrajectory& traj, BusId bus,
                               std::span<const std::string> names);

struct SparseFit {
  Eigen::VectorXd coefficients;  // original column scaling; zeros off the active set
  std::vector<bool> active;
  std::vector<std::string> active_labels;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Sequentially thresholded least squares. The threshold applies to the
// coefficients of unit-norm columns.
SparseFit stlsq(const CandidateLibrary& library, const Eigen::VectorXd& target, double threshold,
                int max_iter);

}  // namespace swingid

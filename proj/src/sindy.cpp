#include "swingid/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "swingid/error.hpp"

namespace swingid {

namespace {

std::string bus_str(BusId b) { return "bus " + std::to_string(b.label()); }

// Coupling sum evaluated in ascending neighbour order, matching coupling_flow().
Eigen::VectorXd node_coupling(const NodeSlice& slice, const LocalMeasurements& local) {
  const auto t = local.delta.size();
  std::vector<const Eigen::VectorXd*> series;
  series.reserve(slice.couplings.size());
  for (const auto& [nbr, b] : slice.couplings) {
    const auto it = local.neighbor_delta.find(nbr);
    if (it == local.neighbor_delta.end()) {
      throw Error(ErrorCode::alignment,
                  bus_str(slice.bus) + ": missing delta series from neighbour " + bus_str(nbr));
    }
    if (it->second.size() != t) {
      throw Error(ErrorCode::alignment, bus_str(slice.bus) + ": neighbour " + bus_str(nbr) +
                                            " series has " + std::to_string(it->second.size()) +
                                            " samples, own series has " + std::to_string(t));
    }
    series.push_back(&it->second);
  }
  Eigen::VectorXd flow(t);
  for (Eigen::Index r = 0; r < t; ++r) {
    const double di = local.delta(r);
    double sum = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      sum += slice.couplings[k].second * std::sin(di - (*series[k])(r));
    }
    flow(r) = sum;
  }
  return flow;
}

// Generator: P^M - coupling. Load: -(P^L + coupling).
Eigen::VectorXd drive_signal(const NodeSlice& slice, const Eigen::VectorXd& flow) {
  if (slice.kind == BusKind::generator) return (slice.injection - flow.array()).matrix();
  return (-slice.injection - flow.array()).matrix();
}

void check_target(const NodeSlice& slice, const LocalMeasurements& local,
                  const Eigen::VectorXd& target) {
  if (target.size() != local.delta.size()) {
    throw Error(ErrorCode::alignment, bus_str(slice.bus) + ": derivative series length " +
                                          std::to_string(target.size()) + " does not match " +
                                          std::to_string(local.delta.size()) + " samples");
  }
  if (slice.kind == BusKind::generator) {
    if (!local.omega) throw Error(ErrorCode::alignment, bus_str(slice.bus) + ": generator without omega series");
    if (local.omega->size() != local.delta.size()) {
      throw Error(ErrorCode::alignment, bus_str(slice.bus) + ": omega and delta lengths differ");
    }
  }
}

RegressionProblem physics_problem(const NodeSlice& slice, const LocalMeasurements& local,
                                  const Eigen::VectorXd& target) {
  check_target(slice, local, target);
  const Eigen::VectorXd drive = drive_signal(slice, node_coupling(slice, local));
  RegressionProblem p;
  p.target = target;
  if (slice.kind == BusKind::generator) {
    p.regressors.resize(target.size(), 2);
    p.regressors.col(0) = -*local.omega;
    p.regressors.col(1) = drive;
    p.labels = {"-omega", "P_M - coupling"};
  } else {
    p.regressors = drive;
    p.labels = {"-(P_L + coupling)"};
  }
  return p;
}

bool uses_omega(const std::string& canonical) {
  return canonical == "omega" || canonical == "omega^2";
}

std::string canonical_name(const std::string& name) {
  if (name == "omega" || name == "identity(omega)" || name == "identity(w)") return "omega";
  if (name == "omega^2" || name == "square(omega)" || name == "square(w)") return "omega^2";
  if (name == "sin(a)") return "sin(a)";
  if (name == "cos(a)") return "cos(a)";
  if (name == "a" || name == "identity(a)") return "a";
  if (name == "1" || name == "constant") return "1";
  throw Error(ErrorCode::unknown_candidate, "unknown candidate function '" + name + "'");
}

BusEstimate solve_node(const NodeSlice& slice, const LocalMeasurements& local,
                       const Eigen::VectorXd& target, const EstimatorConfig& config) {
  BusEstimate est;
  est.bus = slice.bus;
  est.kind = slice.kind;
  try {
    Eigen::VectorXd coeffs;
    if (config.mode == EstimatorMode::physics) {
      const auto fit = solve_least_squares(physics_problem(slice, local, target));
      coeffs = fit.coefficients;
      est.residual = fit.residual_norm;
    } else {
      check_target(slice, local, target);
      const Eigen::VectorXd drive = drive_signal(slice, node_coupling(slice, local));
      std::vector<std::string> names;
      for (const auto& n : config.library.empty() ? default_library() : config.library) {
        const auto c = canonical_name(n);
        if (slice.kind == BusKind::load && uses_omega(c)) continue;
        names.push_back(c);
      }
      const Eigen::VectorXd omega = local.omega ? *local.omega : Eigen::VectorXd{};
      const auto lib = build_library(omega, drive, names);
      const auto fit = stlsq(lib, target, config.threshold, config.max_iter);
      est.residual = fit.residual_norm;
      est.active_terms = fit.active_labels;
      auto coef_of = [&](const std::string& label) -> std::optional<double> {
        for (std::size_t k = 0; k < lib.labels.size(); ++k) {
          if (lib.labels[k] == label && fit.active[k]) return fit.coefficients(static_cast<Eigen::Index>(k));
        }
        return std::nullopt;
      };
      const auto ca = coef_of("a");
      if (!ca) throw Error(ErrorCode::unphysical, "drive term 'a' was not selected");
      if (slice.kind == BusKind::generator) {
        const auto cw = coef_of("omega");
        if (!cw) throw Error(ErrorCode::unphysical, "damping term 'omega' was not selected");
        coeffs = Eigen::Vector2d(-*cw, *ca);
      } else {
        coeffs = Eigen::VectorXd::Constant(1, *ca);
      }
    }
    const auto rec = recover_params(coeffs, slice.kind);
    est.inertia = rec.inertia;
    est.damping = rec.damping;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::rank_deficient:
      case ErrorCode::zero_regressor:
      case ErrorCode::all_zeroed:
        est.status = EstimateStatus::rank_deficient;
        break;
      case ErrorCode::unphysical:
        est.status = EstimateStatus::unphysical;
        break;
      default:
        throw;
    }
    est.inertia.reset();
    est.damping.reset();
    est.message = e.what();
  }
  return est;
}

}  // namespace

void RegressionProblem::validate() const {
  if (regressors.cols() < 1) throw Error(ErrorCode::precondition, "regression needs at least one column");
  if (regressors.rows() != target.size()) {
    throw Error(ErrorCode::precondition, "regressor rows do not match target length");
  }
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != regressors.cols()) {
    throw Error(ErrorCode::precondition, "one label per regressor column is required");
  }
  if (!target.allFinite() || !regressors.allFinite()) {
    throw Error(ErrorCode::precondition, "regression contains NaN or Inf");
  }
}

LeastSquaresFit solve_least_squares(const RegressionProblem& problem) {
  problem.validate();
  const auto& a = problem.regressors;
  if (a.rows() < a.cols()) {
    throw Error(ErrorCode::rank_deficient, "underdetermined regression: " + std::to_string(a.rows()) +
                                               " rows for " + std::to_string(a.cols()) + " unknowns");
  }
  const Eigen::VectorXd sv = a.jacobiSvd().singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax == 0.0) throw Error(ErrorCode::zero_regressor, "all regressors are zero");
  if (smin <= kRankTolerance * smax) {
    std::ostringstream os;
    os << "rank-deficient regression, condition estimate "
       << (smin == 0.0 ? std::numeric_limits<double>::infinity() : smax / smin);
    throw Error(ErrorCode::rank_deficient, os.str());
  }
  LeastSquaresFit fit;
  fit.coefficients = a.householderQr().solve(problem.target);
  fit.residual_norm = (problem.target - a * fit.coefficients).norm();
  fit.condition = smax / smin;
  return fit;
}

Eigen::VectorXd compute_coupling_terms(const GridModel& model, const SampledTrajectory& traj,
                                       BusId bus) {
  return node_coupling(node_slice(model, bus), local_measurements(model, traj, bus));
}

RegressionProblem build_generator_regression(const GridModel& model, const SampledTrajectory& traj,
                                             const DerivativeEstimate& omega_dot, BusId bus) {
  if (model.kind(bus) != BusKind::generator) {
    throw Error(ErrorCode::precondition, bus_str(bus) + " is not a generator bus");
  }
  return physics_problem(node_slice(model, bus), local_measurements(model, traj, bus), omega_dot.values);
}

RegressionProblem build_load_regression(const GridModel& model, const SampledTrajectory& traj,
                                        const DerivativeEstimate& delta_dot, BusId bus) {
  if (model.kind(bus) != BusKind::load) {
    throw Error(ErrorCode::precondition, bus_str(bus) + " is not a load bus");
  }
  return physics_problem(node_slice(model, bus), local_measurements(model, traj, bus), delta_dot.values);
}

RecoveredParams recover_params(const Eigen::VectorXd& c, BusKind kind) {
  std::ostringstream os;
  os.precision(17);
  if (kind == BusKind::generator) {
    if (c.size() != 2) throw Error(ErrorCode::precondition, "generator fit needs 2 coefficients");
    if (!(c(1) > 0.0) || !std::isfinite(c(0)) || !std::isfinite(c(1))) {
      os << "unphysical generator estimate: 1/M = " << c(1);
      throw Error(ErrorCode::unphysical, os.str());
    }
    const double m = 1.0 / c(1);
    const double d = c(0) / c(1);
    if (!(d > 0.0)) {
      os << "unphysical generator estimate: D = " << d;
      throw Error(ErrorCode::unphysical, os.str());
    }
    return {m, d};
  }
  if (c.size() != 1) throw Error(ErrorCode::precondition, "load fit needs 1 coefficient");
  if (!(c(0) > 0.0) || !std::isfinite(c(0))) {
    os << "unphysical load estimate: 1/D = " << c(0);
    throw Error(ErrorCode::unphysical, os.str());
  }
  return {std::nullopt, 1.0 / c(0)};
}

std::string_view to_string(EstimateStatus status) {
  switch (status) {
    case EstimateStatus::ok: return "ok";
    case EstimateStatus::rank_deficient: return "rank_deficient";
    case EstimateStatus::unphysical: return "unphysical";
  }
  return "unknown";
}

const BusEstimate& ParameterEstimate::at(BusId bus) const {
  for (const auto& b : buses) {
    if (b.bus == bus) return b;
  }
  throw Error(ErrorCode::precondition, "no estimate for " + bus_str(bus));
}

bool ParameterEstimate::all_ok() const {
  return std::all_of(buses.begin(), buses.end(),
                     [](const BusEstimate& b) { return b.status == EstimateStatus::ok; });
}

void ParameterEstimate::attach_truth(const TrueParameters& truth) {
  for (auto& b : buses) {
    if (b.inertia && truth.inertia.contains(b.bus)) {
      const double m = truth.inertia.at(b.bus);
      b.rel_err_inertia = std::abs(*b.inertia - m) / m;
    }
    if (b.damping && truth.damping.contains(b.bus)) {
      const double d = truth.damping.at(b.bus);
      b.rel_err_damping = std::abs(*b.damping - d) / d;
    }
  }
}

NodeSlice node_slice(const GridModel& model, BusId bus) {
  NodeSlice s;
  s.bus = bus;
  s.kind = model.kind(bus);
  s.injection = model.injection(bus);
  for (const auto j : neighbors(model, bus)) {
    s.couplings.emplace_back(j, model.susceptance()(static_cast<Eigen::Index>(bus.index),
                                                    static_cast<Eigen::Index>(j.index)));
  }
  return s;
}

LocalMeasurements local_measurements(const GridModel& model, const SampledTrajectory& traj,
                                     BusId bus) {
  if (static_cast<std::size_t>(traj.delta.cols()) != model.n_buses() ||
      static_cast<std::size_t>(traj.omega.cols()) != model.generator_buses().size()) {
    throw Error(ErrorCode::precondition, "trajectory dimensions do not match the grid model");
  }
  LocalMeasurements m;
  m.t_s = traj.t_s;
  m.delta = traj.delta.col(static_cast<Eigen::Index>(bus.index));
  if (model.is_generator(bus)) {
    m.omega = Eigen::VectorXd(traj.omega.col(static_cast<Eigen::Index>(model.generator_slot(bus))));
  }
  for (const auto j : neighbors(model, bus)) {
    m.neighbor_delta.emplace(j, traj.delta.col(static_cast<Eigen::Index>(j.index)));
  }
  return m;
}

BusEstimate estimate_node_decentralized(const NodeSlice& slice, const LocalMeasurements& local,
                                        const EstimatorConfig& config) {
  const Eigen::VectorXd* channel = &local.delta;
  if (slice.kind == BusKind::generator) {
    if (!local.omega) throw Error(ErrorCode::alignment, bus_str(slice.bus) + ": generator without omega series");
    channel = &*local.omega;
  }
  const auto deriv = differentiate(*channel, local.t_s, config.derivative);
  return solve_node(slice, local, deriv.values, config);
}

ParameterEstimate estimate_all(const GridModel& model, const SampledTrajectory& traj,
                               const EstimatorConfig& config, const TrueParameters* truth) {
  if (traj.size() < 2) throw Error(ErrorCode::precondition, "estimation needs at least 2 samples");
  ParameterEstimate out;
  for (std::size_t i = 0; i < model.n_buses(); ++i) {
    const BusId bus{i};
    out.buses.push_back(estimate_node_decentralized(node_slice(model, bus),
                                                    local_measurements(model, traj, bus), config));
  }
  if (truth) out.attach_truth(*truth);
  return out;
}

ParameterEstimate estimate_all(const GridModel& model, const SampledTrajectory& traj,
                               const ChannelDerivatives& derivatives, const EstimatorConfig& config,
                               const TrueParameters* truth) {
  if (traj.size() < 2) throw Error(ErrorCode::precondition, "estimation needs at least 2 samples");
  if (derivatives.delta_dot.rows() != traj.delta.rows() ||
      derivatives.omega_dot.rows() != traj.omega.rows() ||
      derivatives.delta_dot.cols() != traj.delta.cols() ||
      derivatives.omega_dot.cols() != traj.omega.cols()) {
    throw Error(ErrorCode::alignment, "derivative channels do not match the trajectory");
  }
  ParameterEstimate out;
  for (std::size_t i = 0; i < model.n_buses(); ++i) {
    const BusId bus{i};
    const Eigen::VectorXd target =
        model.is_generator(bus)
            ? Eigen::VectorXd(derivatives.omega_dot.col(static_cast<Eigen::Index>(model.generator_slot(bus))))
            : Eigen::VectorXd(derivatives.delta_dot.col(static_cast<Eigen::Index>(i)));
    out.buses.push_back(
        solve_node(node_slice(model, bus), local_measurements(model, traj, bus), target, config));
  }
  if (truth) out.attach_truth(*truth);
  return out;
}

std::vector<std::string> default_library() {
  return {"omega", "omega^2", "sin(a)", "cos(a)", "a", "1"};
}

CandidateLibrary build_library(const Eigen::VectorXd& omega, const Eigen::VectorXd& drive,
                               std::span<const std::string> names) {
  if (names.empty()) throw Error(ErrorCode::precondition, "candidate library spec is empty");
  const auto t = drive.size();
  if (omega.size() != 0 && omega.size() != t) {
    throw Error(ErrorCode::alignment, "omega and drive series lengths differ");
  }
  CandidateLibrary lib;
  lib.matrix.resize(t, static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto name = canonical_name(names[k]);
    if (std::find(lib.labels.begin(), lib.labels.end(), name) != lib.labels.end()) {
      throw Error(ErrorCode::precondition, "duplicate candidate '" + name + "'");
    }
    if (uses_omega(name) && omega.size() == 0) {
      throw Error(ErrorCode::precondition, "candidate '" + name + "' needs an omega series");
    }
    auto col = lib.matrix.col(static_cast<Eigen::Index>(k));
    if (name == "omega") col = omega;
    else if (name == "omega^2") col = omega.array().square().matrix();
    else if (name == "sin(a)") col = drive.array().sin().matrix();
    else if (name == "cos(a)") col = drive.array().cos().matrix();
    else if (name == "a") col = drive;
    else col.setOnes();
    lib.labels.push_back(name);
  }
  if (!lib.matrix.allFinite()) throw Error(ErrorCode::precondition, "candidate library has non-finite entries");
  return lib;
}

CandidateLibrary build_library(const GridModel& model, const SampledTrajectory& traj, BusId bus,
                               std::span<const std::string> names) {
  const auto slice = node_slice(model, bus);
  const auto local = local_measurements(model, traj, bus);
  const Eigen::VectorXd drive = drive_signal(slice, node_coupling(slice, local));
  return build_library(local.omega ? *local.omega : Eigen::VectorXd{}, drive, names);
}

SparseFit stlsq(const CandidateLibrary& library, const Eigen::VectorXd& target, double threshold,
                int max_iter) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::precondition, "threshold must be nonnegative");
  if (max_iter < 1) throw Error(ErrorCode::precondition, "max_iter must be at least 1");
  const auto& u = library.matrix;
  const auto k = u.cols();
  if (k < 1 || static_cast<Eigen::Index>(library.labels.size()) != k) {
    throw Error(ErrorCode::precondition, "library must have one label per column");
  }
  if (u.rows() != target.size()) throw Error(ErrorCode::alignment, "library rows do not match target");

  const Eigen::VectorXd norms = u.colwise().norm().transpose();
  std::vector<bool> active(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) active[static_cast<std::size_t>(j)] = norms(j) > 0.0;

  SparseFit out;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(k);
  auto fit_active = [&] {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (active[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    if (cols.empty()) {
      throw Error(ErrorCode::all_zeroed, "every candidate coefficient fell below the threshold");
    }
    RegressionProblem sub;
    sub.target = target;
    sub.regressors.resize(u.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      sub.regressors.col(static_cast<Eigen::Index>(c)) = u.col(cols[c]) / norms(cols[c]);
    }
    const auto fit = solve_least_squares(sub);
    scaled.setZero();
    for (std::size_t c = 0; c < cols.size(); ++c) scaled(cols[c]) = fit.coefficients(static_cast<Eigen::Index>(c));
    out.residual_norm = fit.residual_norm;
    return cols;
  };

  for (int iter = 1; iter <= max_iter; ++iter) {
    const auto cols = fit_active();
    out.iterations = iter;
    bool changed = false;
    for (const auto j : cols) {
      if (std::abs(scaled(j)) < threshold) {
        active[static_cast<std::size_t>(j)] = false;
        changed = true;
      }
    }
    if (!changed) {
      out.converged = true;
      break;
    }
  }
  // Out of iterations: refit on the surviving set so coefficients and active
  // set agree, without a further thresholding pass.
  if (!out.converged) fit_active();

  out.coefficients = (scaled.array() / norms.array()).matrix();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!active[static_cast<std::size_t>(j)]) out.coefficients(j) = 0.0;
  }
  out.active = active;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (active[static_cast<std::size_t>(j)]) out.active_labels.push_back(library.labels[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace swingid

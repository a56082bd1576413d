#include "swingid/dynamics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "swingid/error.hpp"

namespace swingid {

namespace {

// Dormand-Prince 5(4) tableau, with Hairer's coefficients for the dense output.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dp

void check_dims(const GridModel& model, const SystemState& s) {
  if (static_cast<std::size_t>(s.delta.size()) != model.n_buses() ||
      static_cast<std::size_t>(s.omega.size()) != model.generator_buses().size()) {
    throw Error(ErrorCode::precondition, "state dimensions do not match the grid model");
  }
}

// Packed layout: [delta (N) ; omega (N_G)].
class PackedRhs {
 public:
  PackedRhs(const GridModel& model, const TrueParameters& params) : model_(model) {
    const auto n = model.n_buses();
    inv_m_.assign(n, 0.0);
    damping_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const BusId b{i};
      damping_[i] = params.D(b);
      if (model.is_generator(b)) inv_m_[i] = 1.0 / params.M(b);
    }
  }

  void operator()(const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    const auto n = model_.n_buses();
    const auto delta = y.head(static_cast<Eigen::Index>(n));
    const auto& gens = model_.generator_buses();
    const auto& loads = model_.load_buses();
    for (std::size_t g = 0; g < gens.size(); ++g) {
      const auto i = gens[g].index;
      const double w = y(static_cast<Eigen::Index>(n + g));
      const double flow = coupling_flow(model_, delta, gens[g]);
      dy(static_cast<Eigen::Index>(i)) = w;
      dy(static_cast<Eigen::Index>(n + g)) =
          inv_m_[i] * (-damping_[i] * w + model_.injection(gens[g]) - flow);
    }
    for (const auto l : loads) {
      const double flow = coupling_flow(model_, delta, l);
      dy(static_cast<Eigen::Index>(l.index)) = (-model_.injection(l) - flow) / damping_[l.index];
    }
  }

 private:
  const GridModel& model_;
  std::vector<double> inv_m_;
  std::vector<double> damping_;
};

Eigen::VectorXd pack(const SystemState& s) {
  Eigen::VectorXd y(s.delta.size() + s.omega.size());
  y << s.delta, s.omega;
  return y;
}

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, const SolverConfig& cfg) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double r = err(i) / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double scaled_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& y0, const SolverConfig& cfg) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double r = v(i) / (cfg.atol + cfg.rtol * std::abs(y0(i)));
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::string fmt_time(double t) {
  std::ostringstream os;
  os << std::setprecision(10) << t;
  return os.str();
}

}  // namespace

SystemState SystemState::zero(const GridModel& model) {
  return SystemState{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_buses())),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.generator_buses().size()))};
}

double coupling_flow(const GridModel& model, const Eigen::VectorXd& delta, BusId bus) {
  const auto& b = model.susceptance();
  const auto i = static_cast<Eigen::Index>(bus.index);
  const double di = delta(i);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const double bij = b(i, j);
    if (j != i && bij != 0.0) sum += bij * std::sin(di - delta(j));
  }
  return sum;
}

SystemState swing_rhs(const GridModel& model, const TrueParameters& params,
                      const SystemState& state) {
  check_dims(model, state);
  const PackedRhs rhs(model, params);
  const Eigen::VectorXd y = pack(state);
  Eigen::VectorXd dy(y.size());
  rhs(y, dy);
  const auto n = static_cast<Eigen::Index>(model.n_buses());
  return SystemState{dy.head(n), dy.tail(dy.size() - n)};
}

SystemState Solution::at(double t) const {
  const double end = horizon();
  if (t_.empty() || t < 0.0 || t > end * (1.0 + 1e-12)) {
    throw Error(ErrorCode::window_overrun,
                "evaluation time " + fmt_time(t) + " outside solution span [0, " + fmt_time(end) + "]");
  }
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const auto step = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - t_.begin()) - 1));
  const double theta = std::min(1.0, (t - t_[step]) / h_[step]);
  const double theta1 = 1.0 - theta;
  const Eigen::VectorXd* r = &coeffs_[5 * step];
  const Eigen::VectorXd y = r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
  const auto n = static_cast<Eigen::Index>(n_delta_);
  return SystemState{y.head(n), y.tail(static_cast<Eigen::Index>(n_omega_))};
}

Solution simulate(const GridModel& model, const TrueParameters& params, const SystemState& init,
                  double horizon, const SolverConfig& cfg) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorCode::precondition, "simulation horizon must be positive");
  }
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) {
    throw Error(ErrorCode::precondition, "solver tolerances must be positive");
  }
  check_dims(model, init);
  params.validate(model);

  const PackedRhs rhs(model, params);
  Solution sol;
  sol.n_delta_ = model.n_buses();
  sol.n_omega_ = model.generator_buses().size();

  Eigen::VectorXd y = pack(init);
  if (!y.allFinite()) throw Error(ErrorCode::precondition, "initial state is not finite");
  const auto dim = y.size();
  Eigen::VectorXd k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim),
      y1(dim), err(dim);
  rhs(y, k1);
  std::size_t evals = 1;

  double h = cfg.initial_step;
  if (!(h > 0.0)) {
    const double d0 = scaled_norm(y, y, cfg);
    const double d1 = scaled_norm(k1, y, cfg);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, horizon);
    ytmp = y + h0 * k1;
    rhs(ytmp, k2);
    ++evals;
    const double d2 = scaled_norm(k2 - k1, y, cfg) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  const double hmax = cfg.max_step > 0.0 ? cfg.max_step : horizon;

  double t = 0.0;
  bool last_rejected = false;
  while (t < horizon) {
    if (sol.t_.size() >= cfg.max_steps) {
      throw Error(ErrorCode::step_underflow, "step budget exhausted at t=" + fmt_time(t));
    }
    h = std::min({h, hmax, horizon - t});
    if (horizon - t - h < 1e-12 * horizon) h = horizon - t;
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      throw Error(ErrorCode::step_underflow, "step size underflow at t=" + fmt_time(t));
    }

    using namespace dp;
    ytmp = y + h * (a21 * k1);
    rhs(ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(ytmp, k6);
    y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(y1, k7);
    evals += 6;
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = error_norm(err, y, y1, cfg);
    if (!std::isfinite(en) || !y1.allFinite()) en = std::numeric_limits<double>::infinity();

    if (en <= 1.0) {
      Eigen::VectorXd r1 = y;
      Eigen::VectorXd r2 = y1 - y;
      Eigen::VectorXd r3 = h * k1 - r2;
      Eigen::VectorXd r4 = r2 - h * k7 - r3;
      Eigen::VectorXd r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      sol.t_.push_back(t);
      sol.h_.push_back(h);
      sol.coeffs_.push_back(std::move(r1));
      sol.coeffs_.push_back(std::move(r2));
      sol.coeffs_.push_back(std::move(r3));
      sol.coeffs_.push_back(std::move(r4));
      sol.coeffs_.push_back(std::move(r5));

      t = (h == horizon - t) ? horizon : t + h;
      y = y1;
      k1 = k7;
      double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      last_rejected = false;
    } else {
      const double fac = std::isfinite(en) ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0) : 0.2;
      h *= fac;
      last_rejected = true;
    }
  }
  sol.rhs_evals_ = evals;
  return sol;
}

SystemState SampledTrajectory::state(std::size_t row) const {
  const auto r = static_cast<Eigen::Index>(row);
  return SystemState{delta.row(r).transpose(), omega.row(r).transpose()};
}

SampledTrajectory SampledTrajectory::head(std::size_t count) const {
  if (count > size()) {
    throw Error(ErrorCode::window_overrun, "requested " + std::to_string(count) +
                                               " samples from a trajectory of " +
                                               std::to_string(size()));
  }
  const auto c = static_cast<Eigen::Index>(count);
  return SampledTrajectory{t_s, delta.topRows(c), omega.topRows(c), noise};
}

SampledTrajectory resample_uniform(const Solution& solution, double t_s, std::size_t samples) {
  if (!(t_s > 0.0)) throw Error(ErrorCode::precondition, "sampling interval must be positive");
  if (samples < 2) throw Error(ErrorCode::precondition, "at least 2 samples are required");
  const double window = static_cast<double>(samples) * t_s;
  if (window > solution.horizon() * (1.0 + 1e-12)) {
    throw Error(ErrorCode::window_overrun, "sampling window " + fmt_time(window) +
                                               " s exceeds simulated horizon " +
                                               fmt_time(solution.horizon()) + " s");
  }
  const auto first = solution.at(t_s);
  SampledTrajectory traj;
  traj.t_s = t_s;
  traj.delta.resize(static_cast<Eigen::Index>(samples), first.delta.size());
  traj.omega.resize(static_cast<Eigen::Index>(samples), first.omega.size());
  for (std::size_t r = 0; r < samples; ++r) {
    const double t = std::min(static_cast<double>(r + 1) * t_s, solution.horizon());
    const auto s = solution.at(t);
    traj.delta.row(static_cast<Eigen::Index>(r)) = s.delta.transpose();
    traj.omega.row(static_cast<Eigen::Index>(r)) = s.omega.transpose();
  }
  return traj;
}

NoiseSpec NoiseSpec::parse(std::string_view text) {
  if (text == "none") return {};
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::parse, "noise spec '" + std::string(text) + "' must be none or kind:level");
  }
  const auto kind = text.substr(0, colon);
  const std::string level_text(text.substr(colon + 1));
  double level = 0.0;
  try {
    std::size_t pos = 0;
    level = std::stod(level_text, &pos);
    if (pos != level_text.size()) throw std::invalid_argument(level_text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::parse, "bad noise level '" + level_text + "'");
  }
  if (!(level >= 0.0) || !std::isfinite(level)) {
    throw Error(ErrorCode::precondition, "noise level must be nonnegative");
  }
  if (kind == "gaussian") return {NoiseKind::gaussian_relative, level};
  if (kind == "gaussian-abs") return {NoiseKind::gaussian_absolute, level};
  if (kind == "logistic") return {NoiseKind::logistic_absolute, level};
  throw Error(ErrorCode::parse, "unknown noise kind '" + std::string(kind) + "'");
}

std::string NoiseSpec::to_string() const {
  std::ostringstream os;
  os << std::setprecision(17);
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian_relative: os << "gaussian:" << level; break;
    case NoiseKind::gaussian_absolute: os << "gaussian-abs:" << level; break;
    case NoiseKind::logistic_absolute: os << "logistic:" << level; break;
  }
  return os.str();
}

SampledTrajectory add_noise(const SampledTrajectory& traj, const NoiseSpec& spec,
                            std::uint64_t seed) {
  if (traj.noise) throw Error(ErrorCode::double_noise, "trajectory already carries noise");
  if (!(spec.level >= 0.0)) throw Error(ErrorCode::precondition, "noise level must be nonnegative");
  SampledTrajectory out = traj;
  out.noise = NoiseRecord{spec, seed};
  if (spec.kind == NoiseKind::none || spec.level == 0.0) return out;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  // Logistic with scale s has standard deviation s * pi / sqrt(3).
  const double logistic_scale = spec.level * std::sqrt(3.0) / M_PI;

  auto perturb = [&](double x) {
    switch (spec.kind) {
      case NoiseKind::gaussian_relative: return x + spec.level * std::abs(x) * normal(rng);
      case NoiseKind::gaussian_absolute: return x + spec.level * normal(rng);
      case NoiseKind::logistic_absolute: {
        double u = 0.0;
        do u = uniform(rng);
        while (u <= 0.0);
        return x + logistic_scale * std::log(u / (1.0 - u));
      }
      case NoiseKind::none: break;
    }
    return x;
  };

  for (Eigen::Index r = 0; r < out.delta.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.delta.cols(); ++c) out.delta(r, c) = perturb(out.delta(r, c));
    for (Eigen::Index c = 0; c < out.omega.cols(); ++c) out.omega(r, c) = perturb(out.omega(r, c));
  }
  return out;
}

ChannelDerivatives analytic_derivatives(const GridModel& model, const TrueParameters& params,
                                        const SampledTrajectory& traj) {
  const PackedRhs rhs(model, params);
  const auto n = traj.delta.cols();
  const auto k = traj.omega.cols();
  if (static_cast<std::size_t>(n) != model.n_buses() ||
      static_cast<std::size_t>(k) != model.generator_buses().size()) {
    throw Error(ErrorCode::precondition, "trajectory dimensions do not match the grid model");
  }
  ChannelDerivatives out{Eigen::MatrixXd(traj.delta.rows(), n), Eigen::MatrixXd(traj.omega.rows(), k)};
  Eigen::VectorXd y(n + k), dy(n + k);
  for (Eigen::Index r = 0; r < traj.delta.rows(); ++r) {
    y << traj.delta.row(r).transpose(), traj.omega.row(r).transpose();
    rhs(y, dy);
    out.delta_dot.row(r) = dy.head(n).transpose();
    out.omega_dot.row(r) = dy.tail(k).transpose();
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const SampledTrajectory& traj) {
  out << "t";
  for (Eigen::Index i = 0; i < traj.delta.cols(); ++i) out << ",delta_" << i + 1;
  for (Eigen::Index g = 0; g < traj.omega.cols(); ++g) out << ",omega_g" << g + 1;
  out << "\n" << std::setprecision(17);
  for (std::size_t r = 0; r < traj.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out << traj.time(r);
    for (Eigen::Index i = 0; i < traj.delta.cols(); ++i) out << ',' << traj.delta(row, i);
    for (Eigen::Index g = 0; g < traj.omega.cols(); ++g) out << ',' << traj.omega(row, g);
    out << "\n";
  }
}

void save_trajectory_csv(const std::filesystem::path& path, const SampledTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write trajectory " + path.string());
  write_trajectory_csv(out, traj);
}

SampledTrajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "trajectory CSV is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "t") throw Error(ErrorCode::parse, "trajectory CSV must start with column t");
  std::size_t n_delta = 0, n_omega = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "delta_" + std::to_string(n_delta + 1) && n_omega == 0) {
      ++n_delta;
    } else if (header[c] == "omega_g" + std::to_string(n_omega + 1)) {
      ++n_omega;
    } else {
      throw Error(ErrorCode::parse, "unexpected trajectory column '" + header[c] + "'");
    }
  }
  if (n_delta == 0) throw Error(ErrorCode::parse, "trajectory CSV has no delta columns");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      values.push_back(v);
    }
    if (values.size() != header.size()) {
      throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " columns");
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw Error(ErrorCode::parse, "trajectory CSV needs at least 2 samples");

  SampledTrajectory traj;
  traj.t_s = rows[0][0];
  if (!(traj.t_s > 0.0)) throw Error(ErrorCode::parse, "first sample time must be positive");
  const auto t_rows = static_cast<Eigen::Index>(rows.size());
  traj.delta.resize(t_rows, static_cast<Eigen::Index>(n_delta));
  traj.omega.resize(t_rows, static_cast<Eigen::Index>(n_omega));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double expect = traj.time(r);
    if (std::abs(rows[r][0] - expect) > 1e-9 * std::max(1.0, expect)) {
      throw Error(ErrorCode::parse, "sample times are not uniform at row " + std::to_string(r + 1));
    }
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t i = 0; i < n_delta; ++i) traj.delta(row, static_cast<Eigen::Index>(i)) = rows[r][1 + i];
    for (std::size_t g = 0; g < n_omega; ++g) {
      traj.omega(row, static_cast<Eigen::Index>(g)) = rows[r][1 + n_delta + g];
    }
  }
  return traj;
}

SampledTrajectory load_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open trajectory " + path.string());
  return read_trajectory_csv(in);
}

}  // namespace swingid

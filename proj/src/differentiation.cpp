#include "swingid/differentiation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "swingid/error.hpp"

namespace swingid {

namespace {

void check_step(double t_s) {
  if (!(t_s > 0.0) || !std::isfinite(t_s)) {
    throw Error(ErrorCode::precondition, "sampling interval must be positive");
  }
}

void check_finite(const Eigen::Ref<const Eigen::VectorXd>& series) {
  if (!series.allFinite()) throw Error(ErrorCode::precondition, "series contains NaN or Inf");
}

int parse_int(std::string_view text, std::string_view what) {
  const std::string s(text);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::parse, "bad " + std::string(what) + " '" + s + "'");
}

// Weights w such that sum_k w[k] * x[start + k] is the fitted polynomial's
// slope (per sample) at position `offset` inside the window.
Eigen::MatrixXd savgol_weights(int window, int order) {
  const int half = window / 2;
  Eigen::MatrixXd out(window, window);
  for (int offset = 0; offset < window; ++offset) {
    Eigen::MatrixXd v(window, order + 1);
    for (int k = 0; k < window; ++k) {
      // Abscissae scaled to [-2, 2] keep the Vandermonde matrix well conditioned.
      const double x = static_cast<double>(k - offset) / half;
      double p = 1.0;
      for (int m = 0; m <= order; ++m) {
        v(k, m) = p;
        p *= x;
      }
    }
    const Eigen::MatrixXd pinv =
        v.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
    out.row(offset) = pinv.row(1) / half;
  }
  return out;
}

}  // namespace

DerivativeMethod DerivativeMethod::parse(std::string_view text) {
  if (text == "fd") return finite_difference();
  constexpr std::string_view prefix = "savgol:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto rest = text.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::parse, "savgol spec needs window and order, e.g. savgol:31:3");
    }
    return savgol(parse_int(rest.substr(0, colon), "window"),
                  parse_int(rest.substr(colon + 1), "order"));
  }
  throw Error(ErrorCode::parse, "unknown derivative method '" + std::string(text) + "'");
}

std::string DerivativeMethod::to_string() const {
  if (kind == Kind::finite_difference) return "fd";
  return "savgol:" + std::to_string(window) + ":" + std::to_string(order);
}

DerivativeEstimate finite_difference(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s) {
  check_step(t_s);
  check_finite(series);
  const auto n = series.size();
  if (n < 3) throw Error(ErrorCode::precondition, "finite differences need at least 3 samples");
  Eigen::VectorXd d(n);
  const double inv2h = 1.0 / (2.0 * t_s);
  d(0) = (-3.0 * series(0) + 4.0 * series(1) - series(2)) * inv2h;
  for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (series(i + 1) - series(i - 1)) * inv2h;
  d(n - 1) = (3.0 * series(n - 1) - 4.0 * series(n - 2) + series(n - 3)) * inv2h;
  return {std::move(d), DerivativeMethod::finite_difference()};
}

DerivativeEstimate savgol_derivative(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s,
                                     int window, int order) {
  check_step(t_s);
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::precondition, "savgol window must be odd and at least 3, got " +
                                             std::to_string(window));
  }
  if (order < 1 || order >= window) {
    throw Error(ErrorCode::precondition, "savgol order must satisfy 1 <= order < window");
  }
  if (series.size() < window) {
    throw Error(ErrorCode::precondition, "series of " + std::to_string(series.size()) +
                                             " samples is shorter than the savgol window");
  }
  check_finite(series);

  const Eigen::MatrixXd weights = savgol_weights(window, order);
  const auto n = series.size();
  const int half = window / 2;
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index start = std::clamp<Eigen::Index>(i - half, 0, n - window);
    const auto offset = static_cast<Eigen::Index>(i - start);
    double acc = 0.0;
    for (int k = 0; k < window; ++k) acc += weights(offset, k) * series(start + k);
    d(i) = acc / t_s;
  }
  return {std::move(d), DerivativeMethod::savgol(window, order)};
}

DerivativeEstimate differentiate(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s,
                                 const DerivativeMethod& method) {
  if (method.kind == DerivativeMethod::Kind::finite_difference) return finite_difference(series, t_s);
  return savgol_derivative(series, t_s, method.window, method.order);
}

}  // namespace swingid

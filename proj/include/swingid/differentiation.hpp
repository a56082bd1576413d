#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace swingid {

struct DerivativeMethod {
  enum class Kind { finite_difference, savgol };

  Kind kind = Kind::savgol;
  int window = 31;
  int order = 3;

  static DerivativeMethod finite_difference() { return {Kind::finite_difference, 0, 0}; }
  static DerivativeMethod savgol(int window, int order) { return {Kind::savgol, window, order}; }
  // "fd" or "savgol:<window>:<order>"
  static DerivativeMethod parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const DerivativeMethod&) const = default;
};

struct DerivativeEstimate {
  Eigen::VectorXd values;
  DerivativeMethod method;
};

// Second-order central differences inside, second-order one-sided at the ends.
DerivativeEstimate finite_difference(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s);

// Local least-squares polynomial fit over a sliding window, differentiated at
// each sample. Near the ends the window is shifted rather than truncated.
DerivativeEstimate savgol_derivative(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s,
                                     int window, int order);

DerivativeEstimate differentiate(const Eigen::Ref<const Eigen::VectorXd>& series, double t_s,
                                 const DerivativeMethod& method);

}  // namespace swingid

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "swingid/differentiation.hpp"

using namespace swingid;
using namespace swingid::test;
using Catch::Approx;

namespace {

Eigen::VectorXd sampled(std::size_t n, double t_s, double (*f)(double)) {
  Eigen::VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) v(i) = f(static_cast<double>(i + 1) * t_s);
  return v;
}

double rms(const Eigen::VectorXd& v) { return std::sqrt(v.squaredNorm() / v.size()); }

}  // namespace

TEST_CASE("finite differences on simple signals", "[differentiation]") {
  const double t_s = 0.037;
  Eigen::VectorXd line(50);
  for (int i = 0; i < 50; ++i) line(i) = (i + 1) * t_s;
  CHECK((finite_difference(line, t_s).values.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(finite_difference(Eigen::VectorXd::Constant(20, 3.5), t_s).values.cwiseAbs().maxCoeff() == 0.0);
  // Second-order stencils are exact on quadratics, including the ends.
  Eigen::VectorXd quad(30);
  for (int i = 0; i < 30; ++i) quad(i) = std::pow((i + 1) * t_s, 2);
  const auto d = finite_difference(quad, t_s).values;
  for (int i = 0; i < 30; ++i) CHECK(d(i) == Approx(2 * (i + 1) * t_s).margin(1e-12));
}

TEST_CASE("finite differences of sin match cos", "[differentiation]") {
  const auto s = sampled(200, 0.01, [](double t) { return std::sin(t); });
  const auto c = sampled(200, 0.01, [](double t) { return std::cos(t); });
  CHECK((finite_difference(s, 0.01).values - c).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("finite difference preconditions", "[differentiation]") {
  CHECK(thrown_code([] { finite_difference(Eigen::VectorXd::Zero(2), 0.01); }) == ErrorCode::precondition);
  CHECK(thrown_code([] { finite_difference(Eigen::VectorXd::Zero(5), 0.0); }) == ErrorCode::precondition);
  Eigen::VectorXd nan = Eigen::VectorXd::Zero(5);
  nan(2) = std::nan("");
  CHECK(thrown_code([&] { finite_difference(nan, 0.01); }) == ErrorCode::precondition);
}

TEST_CASE("savgol reproduces polynomials up to its order", "[differentiation]") {
  const double t_s = 0.01;
  for (int order : {1, 2, 3, 4}) {
    Eigen::VectorXd x(120), dx(120);
    for (int i = 0; i < 120; ++i) {
      const double t = (i + 1) * t_s;
      x(i) = 0.0;
      dx(i) = 0.0;
      for (int p = 0; p <= order; ++p) {
        const double a = 0.3 + 0.7 * p;
        x(i) += a * std::pow(t, p);
        if (p > 0) dx(i) += a * p * std::pow(t, p - 1);
      }
    }
    const auto d = savgol_derivative(x, t_s, 31, order).values;
    INFO("order " << order);
    CHECK((d - dx).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("savgol beats finite differences on noisy data", "[differentiation]") {
  const auto s = sampled(200, 0.01, [](double t) { return std::sin(t); });
  const auto c = sampled(200, 0.01, [](double t) { return std::cos(t); });
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 0.05);
  Eigen::VectorXd noisy = s;
  for (auto& v : noisy) v += n(rng);
  const double sg = rms(savgol_derivative(noisy, 0.01, 31, 3).values - c);
  const double fd = rms(finite_difference(noisy, 0.01).values - c);
  CHECK(sg < fd);
}

TEST_CASE("savgol preconditions", "[differentiation]") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(100, 0, 1);
  CHECK(thrown_code([&] { savgol_derivative(x, 0.01, 4, 2); }) == ErrorCode::precondition);
  CHECK(thrown_code([&] { savgol_derivative(x, 0.01, 5, 5); }) == ErrorCode::precondition);
  CHECK(thrown_code([&] { savgol_derivative(x, 0.01, 5, 0); }) == ErrorCode::precondition);
  CHECK(thrown_code([&] { savgol_derivative(x.head(20), 0.01, 31, 3); }) == ErrorCode::precondition);
}

TEST_CASE("derivative method parsing", "[differentiation]") {
  CHECK(DerivativeMethod::parse("fd") == DerivativeMethod::finite_difference());
  CHECK(DerivativeMethod::parse("savgol:31:3") == DerivativeMethod::savgol(31, 3));
  CHECK(DerivativeMethod::parse(DerivativeMethod::savgol(21, 2).to_string()) == DerivativeMethod::savgol(21, 2));
  CHECK(thrown_code([] { DerivativeMethod::parse("savgol:31"); }) == ErrorCode::parse);
  CHECK(thrown_code([] { DerivativeMethod::parse("spline"); }) == ErrorCode::parse);
  const auto s = sampled(60, 0.01, [](double t) { return t * t; });
  CHECK(differentiate(s, 0.01, DerivativeMethod::finite_difference()).values ==
        finite_difference(s, 0.01).values);
  CHECK(differentiate(s, 0.01, DerivativeMethod::savgol(11, 2)).method == DerivativeMethod::savgol(11, 2));
}

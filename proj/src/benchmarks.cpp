#include <cmath>
#include <numbers>
#include <sstream>

#include "koopeig/benchmarks.hpp"
#include "koopeig/errors.hpp"

namespace koopeig {

VectorField lin1d(double a) {
  return VectorField(
      "lin1d", 1, [a](StateView x, std::span<double> dx) { dx[0] = a * x[0]; },
      [a](StateView x, double t) { return State{x[0] * std::exp(a * t)}; });
}

VectorField lin2d(double a1, double a2) {
  return VectorField(
      "lin2d", 2,
      [a1, a2](StateView x, std::span<double> dx) {
        dx[0] = a1 * x[0];
        dx[1] = a2 * x[1];
      },
      [a1, a2](StateView x, double t) {
        return State{x[0] * std::exp(a1 * t), x[1] * std::exp(a2 * t)};
      });
}

VectorField hopf(double mu) {
  auto rhs = [mu](StateView x, std::span<double> dx) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    dx[0] = -x[1] + x[0] * (mu - r2);
    dx[1] = x[0] + x[1] * (mu - r2);
  };
  // Radial part solves 1/r^2 = e^{-2 mu t}/r0^2 + (1 - e^{-2 mu t})/mu.
  auto exact = [mu](StateView x, double t) {
    const double r0 = std::hypot(x[0], x[1]);
    if (r0 == 0.0) return State{0.0, 0.0};
    const double decay = std::exp(-2.0 * mu * t);
    const double drift = mu == 0.0 ? 2.0 * t : -std::expm1(-2.0 * mu * t) / mu;
    const double inv_r2 = decay / (r0 * r0) + drift;
    if (!(inv_r2 > 0.0)) {
      std::ostringstream msg;
      msg << "Hopf orbit from radius " << r0 << " escapes to infinity before t = " << t;
      throw Error(ErrorCode::blow_up, msg.str());
    }
    const double r = 1.0 / std::sqrt(inv_r2);
    const double theta = std::atan2(x[1], x[0]) + t;
    return State{r * std::cos(theta), r * std::sin(theta)};
  };
  return VectorField("hopf", 2, rhs, exact);
}

VectorField van_der_pol(double mu) {
  return VectorField("vdp", 2, [mu](StateView x, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = mu * x[1] * (1.0 - x[0] * x[0]) - x[0];
  });
}

VectorField blowup() {
  return VectorField(
      "blowup", 1, [](StateView x, std::span<double> dx) { dx[0] = x[0] * x[0]; },
      [](StateView x, double t) {
        const double denom = 1.0 - t * x[0];
        if (!(denom > 0.0)) {
          std::ostringstream msg;
          msg << "x' = x^2 from " << x[0] << " blows up before t = " << t;
          throw Error(ErrorCode::blow_up, msg.str());
        }
        return State{x[0] / denom};
      });
}

VectorField action_angle() {
  return VectorField(
      "action_angle", 2,
      [](StateView x, std::span<double> dx) {
        dx[0] = 0.0;
        dx[1] = x[0];
      },
      [](StateView x, double t) { return State{x[0], x[1] + x[0] * t}; });
}

namespace {

double param(const std::vector<double>& p, std::size_t i, double fallback) {
  return i < p.size() ? p[i] : fallback;
}

void check_arity(const std::string& name, const std::vector<double>& p, std::size_t max) {
  if (p.size() > max) {
    std::ostringstream msg;
    msg << "system '" << name << "' takes at most " << max << " parameters, got " << p.size();
    throw Error(ErrorCode::invalid_argument, msg.str());
  }
}

}  // namespace

BenchmarkSystem make_benchmark(const std::string& name, const std::vector<double>& params) {
  if (name == "lin1d") {
    check_arity(name, params, 1);
    const double a = param(params, 0, 1.0);
    return {lin1d(a), DataManifold::point(1.0), {-1.0, 1.0},
            [a](StateView x, Complex lambda) { return std::pow(Complex(x[0]), lambda / a); }};
  }
  if (name == "lin2d") {
    check_arity(name, params, 2);
    const double a2 = param(params, 1, 2.0);
    return {lin2d(param(params, 0, 1.0), a2), DataManifold::segment({0.25, 1.0}, {3.0, 1.0}, 201, 0.25, 3.0),
            {0.0, 1.0},
            [a2](StateView x, Complex lambda) { return std::pow(Complex(x[1]), lambda / a2); }};
  }
  if (name == "hopf") {
    check_arity(name, params, 1);
    return {hopf(param(params, 0, 1.0)),
            DataManifold::circle({0.0, 0.0}, 5.0, -std::numbers::pi, std::numbers::pi, 721),
            {0.0, 2.0},
            {}};
  }
  if (name == "vdp") {
    check_arity(name, params, 1);
    return {van_der_pol(param(params, 0, 1.0)), DataManifold::segment({0.5, 0.0}, {3.0, 0.0}, 201, 0.5, 3.0),
            {0.0, 2.0},
            {}};
  }
  if (name == "blowup") {
    check_arity(name, params, 0);
    // h = 1 at x = 1 gives e^{lambda (1 - 1/x)}.
    return {blowup(), DataManifold::point(1.0), {-1.0, 0.5},
            [](StateView x, Complex lambda) { return std::exp(lambda * (1.0 - 1.0 / x[0])); }};
  }
  if (name == "action_angle") {
    check_arity(name, params, 3);
    const double a = param(params, 0, 1.0);
    const double b = param(params, 1, 2.0);
    const double alpha = param(params, 2, 0.5);
    if (!(b > a && a > 0.0)) throw Error(ErrorCode::invalid_argument, "action_angle needs 0 < a < b");
    return {action_angle(), DataManifold::segment({a, alpha}, {b, alpha}, 201, a, b),
            {0.0, 2.0},
            [alpha](StateView x, Complex lambda) { return std::exp(lambda * (x[1] - alpha) / x[0]); }};
  }
  throw Error(ErrorCode::invalid_argument, "unknown system '" + name + "'");
}

std::vector<std::string> benchmark_names() {
  return {"lin1d", "lin2d", "hopf", "vdp", "blowup", "action_angle"};
}

}  // namespace koopeig

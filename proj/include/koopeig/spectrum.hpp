#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "koopeig/keig.hpp"
#include "koopeig/types.hpp"

namespace koopeig {

/// phi(I, theta) = e^{i theta} delta_n(I - omega) on the action-angle
/// cylinder [a, b] x S^1, delta_n = n on (-1/(2n), 1/(2n)).
struct ApproxEig {
  double omega = 1.0;
  int n = 1;
  double a = 0.5;
  double b = 1.5;

  [[nodiscard]] double support_lo() const noexcept { return omega - 0.5 / n; }
  [[nodiscard]] double support_hi() const noexcept { return omega + 0.5 / n; }
};

struct ApproxEigResidual {
  double residual_norm = 0.0;      // |K_t phi - e^{i omega t} phi| in L^2
  double phi_norm = 0.0;           // |phi| in L^2, sqrt(2 pi n) analytically
  double relative_residual = 0.0;  // ratio of the two
};

/// Exact angular factor times Gauss-Legendre in I over the support.
/// Throws SupportOutOfRange when the support leaves [a, b].
[[nodiscard]] ApproxEigResidual approx_eig_residual(const ApproxEig& ae, double t,
                                                    std::size_t quad_points = 256);

/// Least-squares slope of log(values) against log(ns).
[[nodiscard]] double log_log_slope(std::span<const double> ns, std::span<const double> values);

struct ScalingPoint {
  int n = 0;
  ApproxEigResidual residual;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // meaningful only when points.size() >= 2
};

/// Relative residual for each n on the annulus [omega - 0.5, omega + 0.5]
/// and the log-log slope (about -1).
[[nodiscard]] ScalingReport scaling_fit(double omega, double t, std::span<const int> n_list,
                                        std::size_t quad_points = 256);

/// Nonrecurrent wedge (a, b) x (alpha1, alpha2) of the action-angle cylinder,
/// with a radial data ray at angle `ray`.
struct Wedge {
  double a = 1.0;
  double b = 2.0;
  double alpha1 = 0.25;
  double alpha2 = 5.5;
  double ray = 0.5;
};

/// h(I) e^{lambda (theta - ray) / I}.
[[nodiscard]] Eigenfunction wedge_eigenfunction(Complex lambda, const Wedge& wedge,
                                                std::function<Complex(double)> h);

struct WedgeReport {
  std::vector<double> residuals;  // one per lambda
  double max_residual = 0.0;
};

/// Certifies the closed-form wedge eigenfunction for every lambda with
/// koopman_residual over `count` random points whose time-t images stay in
/// the wedge.
[[nodiscard]] WedgeReport wedge_point_spectrum_check(std::span<const Complex> lambdas, const Wedge& wedge,
                                                     const std::function<Complex(double)>& h,
                                                     double t = 0.1, std::size_t count = 100,
                                                     std::uint64_t seed = 7);

}  // namespace koopeig

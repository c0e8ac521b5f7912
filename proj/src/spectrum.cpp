#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include <gsl/gsl_integration.h>

#include "koopeig/benchmarks.hpp"
#include "koopeig/errors.hpp"
#include "koopeig/spectrum.hpp"

namespace koopeig {

namespace {

struct GlTableDeleter {
  void operator()(gsl_integration_glfixed_table* t) const { gsl_integration_glfixed_table_free(t); }
};

template <class F>
double gauss_legendre(F&& f, double lo, double hi, std::size_t points) {
  std::unique_ptr<gsl_integration_glfixed_table, GlTableDeleter> table(
      gsl_integration_glfixed_table_alloc(points));
  if (!table) throw Error(ErrorCode::invalid_argument, "could not build Gauss-Legendre table");
  double sum = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    double x = 0.0;
    double w = 0.0;
    gsl_integration_glfixed_point(lo, hi, k, &x, &w, table.get());
    sum += w * f(x);
  }
  return sum;
}

}  // namespace

ApproxEigResidual approx_eig_residual(const ApproxEig& ae, double t, std::size_t quad_points) {
  if (ae.n < 1) throw Error(ErrorCode::invalid_argument, "sharpness n must be positive");
  if (quad_points < 64) throw Error(ErrorCode::invalid_argument, "need at least 64 quadrature points");
  if (ae.support_lo() < ae.a || ae.support_hi() > ae.b) {
    std::ostringstream msg;
    msg << "support [" << ae.support_lo() << ", " << ae.support_hi() << "] not inside [" << ae.a << ", "
        << ae.b << "]";
    throw Error(ErrorCode::support_out_of_range, msg.str());
  }
  const double n = ae.n;
  const double two_pi = 2.0 * std::numbers::pi;
  // |e^{iIt} - e^{i omega t}|^2 = 4 sin^2((I - omega) t / 2)
  const double defect = gauss_legendre(
      [&](double action) {
        const double s = std::sin(0.5 * (action - ae.omega) * t);
        return n * n * 4.0 * s * s;
      },
      ae.support_lo(), ae.support_hi(), quad_points);
  const double mass = gauss_legendre([&](double) { return n * n; }, ae.support_lo(), ae.support_hi(),
                                     quad_points);
  ApproxEigResidual out;
  out.residual_norm = std::sqrt(two_pi * defect);
  out.phi_norm = std::sqrt(two_pi * mass);
  out.relative_residual = out.residual_norm / out.phi_norm;
  return out;
}

double log_log_slope(std::span<const double> ns, std::span<const double> values) {
  if (ns.size() != values.size() || ns.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "slope fit needs at least two paired values");
  }
  double mx = 0.0;
  double my = 0.0;
  const double k = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    mx += std::log(ns[i]);
    my += std::log(values[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(ns[i]) - mx;
    sxy += dx * (std::log(values[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::invalid_argument, "slope fit needs distinct n values");
  return sxy / sxx;
}

ScalingReport scaling_fit(double omega, double t, std::span<const int> n_list, std::size_t quad_points) {
  ScalingReport report;
  std::vector<double> ns;
  std::vector<double> rel;
  for (int n : n_list) {
    const ApproxEig ae{omega, n, omega - 0.5, omega + 0.5};
    const auto r = approx_eig_residual(ae, t, quad_points);
    report.points.push_back({n, r});
    ns.push_back(n);
    rel.push_back(r.relative_residual);
  }
  if (ns.size() >= 2) report.slope = log_log_slope(ns, rel);
  return report;
}

Eigenfunction wedge_eigenfunction(Complex lambda, const Wedge& wedge, std::function<Complex(double)> h) {
  const double ray = wedge.ray;
  return Eigenfunction(lambda, [lambda, ray, h = std::move(h)](StateView x) {
    return h(x[0]) * std::exp(lambda * (x[1] - ray) / x[0]);
  });
}

WedgeReport wedge_point_spectrum_check(std::span<const Complex> lambdas, const Wedge& wedge,
                                       const std::function<Complex(double)>& h, double t, std::size_t count,
                                       std::uint64_t seed) {
  if (!(wedge.b > wedge.a && wedge.a > 0.0)) throw Error(ErrorCode::invalid_argument, "wedge needs 0 < a < b");
  if (!(wedge.alpha2 > wedge.alpha1) || wedge.alpha2 - wedge.alpha1 >= 2.0 * std::numbers::pi) {
    throw Error(ErrorCode::invalid_argument, "wedge opening must lie in (0, 2 pi)");
  }
  if (wedge.alpha2 - wedge.b * t <= wedge.alpha1) {
    throw Error(ErrorCode::invalid_argument, "wedge too narrow for the requested flow time");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<State> points;
  points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double action = wedge.a + (wedge.b - wedge.a) * unit(rng);
    const double top = wedge.alpha2 - action * t;
    points.push_back({action, wedge.alpha1 + (top - wedge.alpha1) * unit(rng)});
  }

  const VectorField field = action_angle();
  WedgeReport report;
  for (const Complex& lambda : lambdas) {
    const double r = koopman_residual(field, wedge_eigenfunction(lambda, wedge, h), points, t);
    report.residuals.push_back(r);
    report.max_residual = std::max(report.max_residual, r);
  }
  return report;
}

}  // namespace koopeig

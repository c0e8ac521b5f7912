#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "koopeig/errors.hpp"
#include "koopeig/okeedmd.hpp"
#include "koopeig/parallel.hpp"

namespace koopeig {

CharacteristicGrid build_grid(const VectorField& field, const DataManifold& manifold, TimeWindow window,
                              std::size_t n, std::size_t m, const GridOptions& opts) {
  if (n < 1 || m < 1) throw Error(ErrorCode::invalid_argument, "grid needs n >= 1 and m >= 1");
  if (window.t_begin > 0.0 || window.t_end < window.t_begin) {
    throw Error(ErrorCode::invalid_argument, "time window must satisfy t_begin <= 0 <= t_end");
  }
  if (field.dim() <= 2) {
    const auto report = check_transversality(manifold, field);
    if (!report.pass) {
      std::ostringstream msg;
      msg << "manifold is not transverse to the flow (min normalized cross "
          << report.min_normalized_cross << ")";
      throw Error(ErrorCode::invalid_argument, msg.str());
    }
  }

  CharacteristicGrid grid{manifold.s_grid(n + 1), {}, {}, field, manifold, window};
  grid.r_nodes.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    grid.r_nodes[j] = window.t_begin + window.length() * static_cast<double>(j) / static_cast<double>(m);
  }
  grid.r_nodes.back() = window.t_end;
  grid.points.resize((n + 1) * (m + 1));

  const std::size_t cols = m + 1;
  parallel_for(n + 1, opts.threads, [&](std::size_t i) {
    State x = manifold.embed(grid.s_nodes[i]);
    if (grid.r_nodes[0] != 0.0) x = flow(field, x, grid.r_nodes[0], opts.integrator).state;
    grid.points[i * cols] = x;
    for (std::size_t j = 1; j < cols; ++j) {
      const double dt = grid.r_nodes[j] - grid.r_nodes[j - 1];
      if (dt != 0.0) x = flow(field, x, dt, opts.integrator).state;
      grid.points[i * cols + j] = x;
    }
  });
  return grid;
}

double TargetSample::norm() const {
  double s = 0.0;
  for (const Complex& v : b) s += std::norm(v);
  return std::sqrt(s);
}

TargetSample sample_target(const CharacteristicGrid& grid, const std::function<Complex(StateView)>& q) {
  TargetSample t{grid.rows(), grid.cols(), std::vector<Complex>(grid.rows() * grid.cols())};
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) t.b[j * t.rows + i] = q(grid.at(i, j));
  }
  return t;
}

namespace {

void check_shape(std::span<const double> r_nodes, const TargetSample& target) {
  if (target.cols != r_nodes.size() || target.b.size() != target.rows * target.cols || target.rows == 0) {
    std::ostringstream msg;
    msg << "target shaped " << target.rows << " x " << target.cols << " does not match " << r_nodes.size()
        << " time nodes";
    throw Error(ErrorCode::grid_mismatch, msg.str());
  }
}

std::vector<Complex> exponentials(std::span<const double> r_nodes, Complex lambda) {
  std::vector<Complex> e(r_nodes.size());
  for (std::size_t j = 0; j < r_nodes.size(); ++j) e[j] = std::exp(lambda * r_nodes[j]);
  return e;
}

double residual_of(std::span<const Complex> e, std::size_t rows, std::span<const Complex> h,
                   std::span<const Complex> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    for (std::size_t i = 0; i < rows; ++i) s += std::norm(e[j] * h[i] - b[j * rows + i]);
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<Complex> apply_a(std::span<const double> r_nodes, std::size_t rows, std::span<const Complex> h,
                             Complex lambda) {
  if (h.size() != rows) throw Error(ErrorCode::grid_mismatch, "h length differs from the row count");
  const auto e = exponentials(r_nodes, lambda);
  std::vector<Complex> p(rows * e.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    for (std::size_t i = 0; i < rows; ++i) p[j * rows + i] = e[j] * h[i];
  }
  return p;
}

FitResult fit_h(std::span<const double> r_nodes, const TargetSample& target, Complex lambda) {
  check_shape(r_nodes, target);
  const auto e = exponentials(r_nodes, lambda);
  double denom = 0.0;
  for (const Complex& v : e) denom += std::norm(v);

  FitResult out;
  out.h.assign(target.rows, Complex{});
  if (!(denom >= kDegenerateColumnThreshold) || !std::isfinite(denom)) {
    out.degenerate = true;
  } else {
    for (std::size_t i = 0; i < target.rows; ++i) {
      Complex num{};
      for (std::size_t j = 0; j < e.size(); ++j) num += std::conj(e[j]) * target.b[j * target.rows + i];
      out.h[i] = num / denom;
    }
  }
  out.residual_norm = residual_of(e, target.rows, out.h, target.b);
  return out;
}

FitResult fit_h(const CharacteristicGrid& grid, const TargetSample& target, Complex lambda) {
  return fit_h(grid.r_nodes, target, lambda);
}

FitResult fit_h_dense(std::span<const double> r_nodes, const TargetSample& target, Complex lambda) {
  check_shape(r_nodes, target);
  const auto rows = static_cast<Eigen::Index>(target.rows);
  const auto cols = static_cast<Eigen::Index>(target.cols);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(rows * cols, rows);
  Eigen::VectorXcd b(rows * cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const Complex e = std::exp(lambda * r_nodes[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < rows; ++i) a(j * rows + i, i) = e;
  }
  for (Eigen::Index k = 0; k < rows * cols; ++k) b(k) = target.b[static_cast<std::size_t>(k)];
  const Eigen::VectorXcd h = a.colPivHouseholderQr().solve(b);

  FitResult out;
  out.h.assign(h.data(), h.data() + h.size());
  out.residual_norm = (a * h - b).norm();
  return out;
}

std::vector<Complex> real_candidates(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {Complex(lo, 0.0)};
  std::vector<Complex> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = Complex(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1), 0.0);
  }
  out.back() = Complex(hi, 0.0);
  return out;
}

std::vector<Complex> complex_candidates(double re_lo, double re_hi, std::size_t re_count, double im_lo,
                                        double im_hi, std::size_t im_count) {
  const auto re = real_candidates(re_lo, re_hi, re_count);
  const auto im = real_candidates(im_lo, im_hi, im_count);
  std::vector<Complex> out;
  out.reserve(re.size() * im.size());
  for (const Complex& y : im) {
    for (const Complex& x : re) out.emplace_back(x.real(), y.real());
  }
  return out;
}

namespace {

// Residual first, then |lambda|, then |Im lambda|.
bool better(double res_a, Complex la, double res_b, Complex lb) {
  const double tie = 1e-12 * std::max({res_a, res_b, std::numeric_limits<double>::min()});
  if (std::abs(res_a - res_b) > tie) return res_a < res_b;
  if (std::abs(la) != std::abs(lb)) return std::abs(la) < std::abs(lb);
  return std::abs(la.imag()) < std::abs(lb.imag());
}

// Smallest gap between distinct sorted values, or 0 when all are equal.
double local_spacing(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double gap = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double d = v[k] - v[k - 1];
    if (d > 0.0 && (gap == 0.0 || d < gap)) gap = d;
  }
  return gap;
}

}  // namespace

SweepResult sweep_lambda(std::span<const double> r_nodes, const TargetSample& target,
                         std::span<const Complex> candidates, const SweepOptions& opts) {
  if (candidates.empty()) throw Error(ErrorCode::invalid_argument, "lambda candidate list is empty");
  check_shape(r_nodes, target);

  std::vector<FitResult> fits(candidates.size());
  parallel_for(candidates.size(), opts.threads,
               [&](std::size_t k) { fits[k] = fit_h(r_nodes, target, candidates[k]); });

  SweepResult out;
  out.curve.reserve(candidates.size());
  std::size_t best = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    out.curve.push_back({candidates[k], fits[k].residual_norm});
    if (k > 0 && better(fits[k].residual_norm, candidates[k], fits[best].residual_norm, candidates[best])) {
      best = k;
    }
  }
  out.lambda = candidates[best];
  out.fit = std::move(fits[best]);

  if (opts.refine && candidates.size() > 1) {
    std::vector<double> re;
    std::vector<double> im;
    for (const Complex& c : candidates) {
      re.push_back(c.real());
      im.push_back(c.imag());
    }
    const auto [re_lo, re_hi] = std::minmax_element(re.begin(), re.end());
    const auto [im_lo, im_hi] = std::minmax_element(im.begin(), im.end());
    const double re_gap = local_spacing(re);
    const double im_gap = local_spacing(im);

    auto polish = [&](bool real_axis, double gap, double lo_bound, double hi_bound) {
      if (gap <= 0.0) return;
      const Complex center = out.lambda;
      const double c0 = real_axis ? center.real() : center.imag();
      double lo = std::max(c0 - gap, lo_bound);
      double hi = std::min(c0 + gap, hi_bound);
      auto at = [&](double v) { return real_axis ? Complex(v, center.imag()) : Complex(center.real(), v); };
      auto consider = [&](double v) {
        FitResult f = fit_h(r_nodes, target, at(v));
        if (better(f.residual_norm, at(v), out.fit.residual_norm, out.lambda)) {
          out.lambda = at(v);
          out.fit = f;
        }
        return f.residual_norm;
      };
      const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
      double a = hi - inv_phi * (hi - lo);
      double b = lo + inv_phi * (hi - lo);
      double fa = consider(a);
      double fb = consider(b);
      while (hi - lo > 1e-3 * gap) {
        if (fa < fb) {
          hi = b;
          b = a;
          fb = fa;
          a = hi - inv_phi * (hi - lo);
          fa = consider(a);
        } else {
          lo = a;
          a = b;
          fa = fb;
          b = lo + inv_phi * (hi - lo);
          fb = consider(b);
        }
      }
    };
    polish(true, re_gap, *re_lo, *re_hi);
    polish(false, im_gap, *im_lo, *im_hi);
  }
  return out;
}

SweepResult sweep_lambda(const CharacteristicGrid& grid, const TargetSample& target,
                         std::span<const Complex> candidates, const SweepOptions& opts) {
  return sweep_lambda(grid.r_nodes, target, candidates, opts);
}

DecompositionResult greedy_decompose(const CharacteristicGrid& grid, const TargetSample& target,
                                     std::span<const Complex> candidates, std::size_t K, double stop_tol,
                                     const DecomposeOptions& opts) {
  if (K < 1) throw Error(ErrorCode::invalid_argument, "K must be at least 1");
  if (target.rows != grid.rows() || target.cols != grid.cols()) {
    throw Error(ErrorCode::grid_mismatch, "target does not match the grid");
  }
  const double b_norm = target.norm();
  if (b_norm == 0.0) throw Error(ErrorCode::empty_target, "target vanishes on the grid");

  DecompositionResult result{{}, {b_norm}, target.b, grid};
  TargetSample residual = target;
  const double s_lo = grid.s_nodes.front();
  const double s_hi = grid.s_nodes.back();

  for (std::size_t k = 0; k < K; ++k) {
    SweepResult sweep = sweep_lambda(grid.r_nodes, residual, candidates, opts.sweep);
    std::vector<Complex> p = apply_a(grid.r_nodes, grid.rows(), sweep.fit.h, sweep.lambda);
    double c = 0.0;
    for (const Complex& v : p) c += std::norm(v);
    c = std::sqrt(c);
    if (c < opts.min_term_norm) break;

    for (std::size_t idx = 0; idx < p.size(); ++idx) residual.b[idx] -= p[idx];
    std::vector<Complex> normalized(p.size());
    for (std::size_t idx = 0; idx < p.size(); ++idx) normalized[idx] = p[idx] / c;

    DataFunction h(s_lo, s_hi, sweep.fit.h);
    Keig keig(sweep.lambda, h, grid.manifold, grid.field, grid.window, opts.pullback);
    result.terms.push_back(DecompositionTerm{sweep.lambda, std::move(h), c, std::move(normalized),
                                             std::move(sweep.curve), std::move(keig)});
    result.residual_norms.push_back(residual.norm());
    if (result.residual_norms.back() / b_norm < stop_tol) break;
  }
  result.residual = std::move(residual.b);
  return result;
}

}  // namespace koopeig

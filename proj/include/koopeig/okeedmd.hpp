#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "koopeig/dynamics.hpp"
#include "koopeig/keig.hpp"
#include "koopeig/manifold.hpp"
#include "koopeig/types.hpp"

namespace koopeig {

/// Points S(i, j) = flow_{r_j}(embed(s_i)) swept out by the data manifold.
struct CharacteristicGrid {
  std::vector<double> s_nodes;  // n + 1 nodes on the manifold
  std::vector<double> r_nodes;  // m + 1 flow times, r_0 = t_begin
  std::vector<State> points;    // row-major in i: points[i * cols() + j]
  VectorField field;
  DataManifold manifold;
  TimeWindow window;

  [[nodiscard]] std::size_t rows() const noexcept { return s_nodes.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return r_nodes.size(); }
  [[nodiscard]] const State& at(std::size_t i, std::size_t j) const { return points[i * cols() + j]; }
};

struct GridOptions {
  IntegratorOptions integrator;
  std::size_t threads = 1;
};

/// Uniform (n + 1) x (m + 1) grid. Each column continues the integration of
/// the previous one rather than restarting from the manifold.
[[nodiscard]] CharacteristicGrid build_grid(const VectorField& field, const DataManifold& manifold,
                                            TimeWindow window, std::size_t n, std::size_t m,
                                            const GridOptions& opts = {});

/// Target values on the grid. b is flattened with i fastest,
/// b[j * rows + i] = q(S(i, j)), matching A(lambda) = E(lambda) (x) I.
struct TargetSample {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Complex> b;

  [[nodiscard]] Complex q(std::size_t i, std::size_t j) const { return b[j * rows + i]; }
  [[nodiscard]] double norm() const;
};

[[nodiscard]] TargetSample sample_target(const CharacteristicGrid& grid,
                                         const std::function<Complex(StateView)>& q);

struct FitResult {
  std::vector<Complex> h;  // one value per s node
  double residual_norm = 0.0;
  bool degenerate = false;  // sum |e^{lambda r_j}|^2 underflowed; h set to 0
};

inline constexpr double kDegenerateColumnThreshold = 1e-300;

/// Per-lambda least squares min_h |A(lambda) h - b|. The Kronecker structure
/// decouples it into one scalar problem per s node:
/// h_i = sum_j conj(e_j) q_ij / sum_j |e_j|^2 with e_j = e^{lambda r_j}.
[[nodiscard]] FitResult fit_h(std::span<const double> r_nodes, const TargetSample& target, Complex lambda);
[[nodiscard]] FitResult fit_h(const CharacteristicGrid& grid, const TargetSample& target, Complex lambda);

/// Same problem solved by assembling A(lambda) and a dense QR least squares.
/// Exists to cross-check the decoupled formula.
[[nodiscard]] FitResult fit_h_dense(std::span<const double> r_nodes, const TargetSample& target,
                                    Complex lambda);

/// A(lambda) h flattened like b.
[[nodiscard]] std::vector<Complex> apply_a(std::span<const double> r_nodes, std::size_t rows,
                                           std::span<const Complex> h, Complex lambda);

struct CurvePoint {
  Complex lambda;
  double residual = 0.0;
};

struct SweepOptions {
  /// Golden-section polish around the discrete argmin along each axis the
  /// candidate set spans, to three digits of the local candidate spacing.
  bool refine = true;
  std::size_t threads = 1;
};

struct SweepResult {
  Complex lambda;
  FitResult fit;
  std::vector<CurvePoint> curve;  // one entry per candidate, in input order
};

/// argmin over candidates of the fit residual. Ties go to smaller |lambda|,
/// then smaller |Im lambda|.
[[nodiscard]] SweepResult sweep_lambda(std::span<const double> r_nodes, const TargetSample& target,
                                       std::span<const Complex> candidates, const SweepOptions& opts = {});
[[nodiscard]] SweepResult sweep_lambda(const CharacteristicGrid& grid, const TargetSample& target,
                                       std::span<const Complex> candidates, const SweepOptions& opts = {});

/// count reals evenly spaced over [lo, hi].
[[nodiscard]] std::vector<Complex> real_candidates(double lo, double hi, std::size_t count);
/// Rectangular grid re_count x im_count over [re_lo, re_hi] x [im_lo, im_hi].
[[nodiscard]] std::vector<Complex> complex_candidates(double re_lo, double re_hi, std::size_t re_count,
                                                      double im_lo, double im_hi, std::size_t im_count);

struct DecompositionTerm {
  Complex lambda;
  DataFunction h;
  double c = 0.0;                          // |p_k|
  std::vector<Complex> normalized_phi;     // p_k / c_k, flattened like b
  std::vector<CurvePoint> lambda_curve;    // sweep against R_{k-1}
  Keig keig;
};

struct DecompositionResult {
  std::vector<DecompositionTerm> terms;
  std::vector<double> residual_norms;  // |R_0| = |b|, ..., |R_K|
  std::vector<Complex> residual;       // R_K
  CharacteristicGrid grid;
};

struct DecomposeOptions {
  SweepOptions sweep;
  PullbackOptions pullback;  // carried into each returned Keig
  double min_term_norm = 1e-14;
};

/// Greedy residual fitting: R_0 = b, (lambda_k, h_k) = sweep against R_{k-1},
/// p_k = A(lambda_k) h_k, c_k = |p_k|, R_k = R_{k-1} - p_k. Stops after K terms,
/// when |R_k| / |b| < stop_tol, or when c_k < min_term_norm.
[[nodiscard]] DecompositionResult greedy_decompose(const CharacteristicGrid& grid,
                                                   const TargetSample& target,
                                                   std::span<const Complex> candidates, std::size_t K,
                                                   double stop_tol, const DecomposeOptions& opts = {});

}  // namespace koopeig

#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "koopeig/benchmarks.hpp"
#include "koopeig/errors.hpp"
#include "koopeig/okeedmd.hpp"

using namespace koopeig;

namespace {

const double kE = std::numbers::e;

TargetSample single_node(std::vector<Complex> q) { return TargetSample{1, q.size(), std::move(q)}; }

TargetSample random_target(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  TargetSample t{rows, cols, {}};
  for (std::size_t k = 0; k < rows * cols; ++k) t.b.emplace_back(g(rng), g(rng));
  return t;
}

double residual_of(std::span<const double> r, const TargetSample& t, std::span<const Complex> h, Complex lambda) {
  const auto p = apply_a(r, t.rows, h, lambda);
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += std::norm(p[k] - t.b[k]);
  return std::sqrt(sum);
}

CharacteristicGrid lin2d_grid(std::size_t n, std::size_t m) {
  const auto seg = DataManifold::segment({1.0, 1.0}, {2.0, 1.0}, 101, 1.0, 2.0);
  return build_grid(lin2d(1, 2), seg, {0.0, 1.0}, n, m);
}

}  // namespace

TEST_CASE("grid corner is the closed-form flow") {
  const auto grid = lin2d_grid(2, 2);
  CHECK(grid.rows() == 3);
  CHECK(grid.cols() == 3);
  CHECK(grid.at(0, 2)[0] == doctest::Approx(kE).epsilon(1e-8));
  CHECK(grid.at(0, 2)[1] == doctest::Approx(kE * kE).epsilon(1e-8));
  for (std::size_t i = 0; i < grid.rows(); ++i) CHECK(grid.at(i, 0) == grid.manifold.embed(grid.s_nodes[i]));
}

TEST_CASE("zero-length window gives the manifold samples") {
  const auto seg = DataManifold::segment({1.0, 1.0}, {2.0, 1.0}, 101, 1.0, 2.0);
  const auto grid = build_grid(lin2d(1, 2), seg, {0.0, 0.0}, 4, 3);
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) CHECK(grid.at(i, j) == seg.embed(grid.s_nodes[i]));
  }
}

TEST_CASE("continued columns match direct integration") {
  const auto b = make_benchmark("vdp");
  const auto grid = build_grid(b.field, b.default_manifold, b.default_window, 6, 8);
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      const auto direct = flow(b.field, b.default_manifold.embed(grid.s_nodes[i]), grid.r_nodes[j]);
      CHECK(distance(direct.state, grid.at(i, j)) <= 100 * 1e-10);
    }
  }
}

TEST_CASE("grid on a thread pool is identical") {
  const auto b = make_benchmark("vdp");
  GridOptions four;
  four.threads = 4;
  const auto a = build_grid(b.field, b.default_manifold, b.default_window, 10, 10);
  const auto c = build_grid(b.field, b.default_manifold, b.default_window, 10, 10, four);
  CHECK(a.points == c.points);
}

TEST_CASE("grid rejects a tangent manifold") {
  const DataManifold orbit(
      "orbit", 2, 1.0, 2.0, 41, [](double s) { return State{s, s * s}; },
      [](StateView x) { return x[1] - x[0] * x[0]; });
  CHECK_THROWS_AS((void)build_grid(lin2d(1, 2), orbit, {0.0, 1.0}, 3, 3), Error);
}

TEST_CASE("hand-solved single-node fits") {
  const std::vector<double> r{0.0, 1.0};
  const auto a = fit_h(r, single_node({1.0, 3.0}), 0.0);
  CHECK(std::abs(a.h[0] - 2.0) <= 1e-12);
  CHECK(a.residual_norm == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const auto b = fit_h(r, single_node({0.0, kE}), 1.0);
  const double expected = kE * kE / (1.0 + kE * kE);
  CHECK(std::abs(b.h[0] - expected) <= 1e-12);
  CHECK(b.residual_norm * b.residual_norm == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact eigenfunction samples fit with h = 1") {
  const auto grid = lin2d_grid(5, 7);
  const Complex lambda(0.7, -0.4);
  const auto target = sample_target(grid, [&](StateView x) {
    (void)x;
    return Complex(0.0, 0.0);
  });
  TargetSample exact{grid.rows(), grid.cols(), {}};
  for (std::size_t j = 0; j < grid.cols(); ++j) {
    for (std::size_t i = 0; i < grid.rows(); ++i) exact.b.push_back(std::exp(lambda * grid.r_nodes[j]));
  }
  const auto fit = fit_h(grid, exact, lambda);
  for (const auto& h : fit.h) CHECK(std::abs(h - 1.0) <= 1e-12);
  CHECK(fit.residual_norm <= 1e-12);
  CHECK(target.norm() == 0.0);
}

TEST_CASE("decoupled fit matches the dense solve") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = size(rng);
    const std::size_t cols = size(rng);
    std::vector<double> r(cols);
    for (std::size_t j = 0; j < cols; ++j) r[j] = cols == 1 ? 0.0 : static_cast<double>(j) / (cols - 1);
    const auto target = random_target(rows, cols, rng);
    const Complex lambda(u(rng), u(rng));
    const auto fast = fit_h(r, target, lambda);
    const auto dense = fit_h_dense(r, target, lambda);
    for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(fast.h[i] - dense.h[i]) <= 1e-10);
    CHECK(std::abs(fast.residual_norm - dense.residual_norm) <= 1e-10);
  }
}

TEST_CASE("perturbing the optimum never helps") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::vector<double> r{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto target = random_target(6, r.size(), rng);
  const Complex lambda(0.3, 1.1);
  const auto fit = fit_h(r, target, lambda);
  double scale = 0.0;
  for (const auto& h : fit.h) scale = std::max(scale, std::abs(h));
  for (int trial = 0; trial < 100; ++trial) {
    auto h = fit.h;
    for (auto& v : h) v += 1e-3 * scale * Complex(g(rng), g(rng));
    CHECK(residual_of(r, target, h, lambda) >= fit.residual_norm - 1e-12);
  }
}

TEST_CASE("extreme decay marks the column degenerate") {
  const std::vector<double> r{1.0, 2.0};
  const auto fit = fit_h(r, single_node({1.0, 1.0}), -800.0);
  CHECK(fit.degenerate);
  CHECK(fit.h[0] == Complex(0.0, 0.0));
}

TEST_CASE("sweep picks the eigenvalue of the target") {
  const auto grid = lin2d_grid(8, 8);
  const auto target = sample_target(grid, [](StateView x) { return Complex(x[1] * x[1], 0.0); });
  const std::vector<Complex> candidates{1.0, 2.0, 3.0, 4.0, 5.0};
  SweepOptions exact_only;
  exact_only.refine = false;
  const auto best = sweep_lambda(grid, target, candidates, exact_only);
  CHECK(best.lambda == Complex(4.0, 0.0));
  CHECK(best.fit.residual_norm <= 1e-8);
  for (const auto& p : best.curve) CHECK(p.residual >= best.fit.residual_norm);

  const std::vector<Complex> lone{1.5};
  CHECK(sweep_lambda(grid, target, lone).lambda == Complex(1.5, 0.0));
}

TEST_CASE("sweep ties go to the smaller eigenvalue") {
  const std::vector<double> r{0.0};
  const auto target = single_node({1.0});
  const std::vector<Complex> candidates{Complex(2.0, 0.0), Complex(-1.0, 1.0), Complex(1.0, 0.0), Complex(-1.0, 0.0)};
  SweepOptions exact_only;
  exact_only.refine = false;
  const auto best = sweep_lambda(r, target, candidates, exact_only);
  CHECK(best.lambda == Complex(1.0, 0.0));
}

TEST_CASE("refinement lands between candidates") {
  const auto grid = lin2d_grid(8, 8);
  const auto target = sample_target(grid, [](StateView x) { return Complex(std::pow(x[1], 1.3), 0.0); });
  const auto candidates = real_candidates(-5.0, 5.0, 101);
  const auto best = sweep_lambda(grid, target, candidates);
  CHECK(best.lambda.real() == doctest::Approx(2.6).epsilon(1e-3));
  for (const auto& p : best.curve) CHECK(p.residual >= best.fit.residual_norm);
}

TEST_CASE("sweep is identical across thread counts") {
  const auto grid = lin2d_grid(8, 8);
  const auto target = sample_target(grid, [](StateView x) { return Complex(std::exp(-x[0]), x[1]); });
  const auto candidates = complex_candidates(-2.0, 2.0, 9, -1.0, 1.0, 5);
  SweepOptions four;
  four.threads = 4;
  const auto a = sweep_lambda(grid, target, candidates);
  const auto b = sweep_lambda(grid, target, candidates, four);
  CHECK(a.lambda == b.lambda);
  CHECK(a.fit.h == b.fit.h);
}

TEST_CASE("one-term decomposition of an exact eigenfunction") {
  const auto grid = lin2d_grid(10, 10);
  const auto target = sample_target(grid, [](StateView x) { return Complex(3.0 * x[1], 0.0); });
  const auto result = greedy_decompose(grid, target, real_candidates(-5.0, 5.0, 101), 8, 1e-8);
  REQUIRE(result.terms.size() == 1);
  CHECK(result.terms[0].lambda.real() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(result.residual_norms[1] <= 1e-8 * result.residual_norms[0]);
}

TEST_CASE("van der Pol decomposition bookkeeping") {
  const auto b = make_benchmark("vdp");
  const auto grid = build_grid(b.field, b.default_manifold, b.default_window, 20, 20);
  const auto target = sample_target(grid, [](StateView x) {
    return Complex(3.0 * std::exp(-(x[0] * x[0] + x[1] * x[1]) / 10.0), 0.0);
  });
  const auto result = greedy_decompose(grid, target, real_candidates(-5.0, 5.0, 101), 6, 1e-12);
  CHECK(result.residual_norms.front() == doctest::Approx(target.norm()).epsilon(1e-14));
  for (std::size_t k = 1; k < result.residual_norms.size(); ++k) {
    CHECK(result.residual_norms[k] <= result.residual_norms[k - 1]);
  }
  std::vector<Complex> rebuilt = result.residual;
  for (const auto& term : result.terms) {
    for (std::size_t k = 0; k < rebuilt.size(); ++k) rebuilt[k] += term.c * term.normalized_phi[k];
  }
  for (std::size_t k = 0; k < rebuilt.size(); ++k) CHECK(std::abs(rebuilt[k] - target.b[k]) <= 1e-10);

  // Refitting the last residual at the last eigenvalue cannot make it worse.
  const auto& last = result.terms.back();
  const TargetSample residual{grid.rows(), grid.cols(), result.residual};
  CHECK(fit_h(grid, residual, last.lambda).residual_norm <= result.residual_norms.back() + 1e-12);

  // Every term is a genuine eigenfunction away from the grid edges.
  const double t = grid.window.length() / (2.0 * static_cast<double>(grid.cols() - 1));
  std::vector<State> interior;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pi(1, grid.rows() - 2);
  std::uniform_int_distribution<std::size_t> pj(1, grid.cols() - 3);
  for (int k = 0; k < 50; ++k) interior.push_back(grid.at(pi(rng), pj(rng)));
  for (const auto& term : result.terms) CHECK(koopman_residual(term.keig, interior, t) <= 1e-3);
  CHECK(orbit_scaling_check(result.terms.front().keig, grid.at(5, 5), 0.1) <= 1e-4);
}

TEST_CASE("empty target") {
  const auto grid = lin2d_grid(3, 3);
  const auto target = sample_target(grid, [](StateView) { return Complex(0.0, 0.0); });
  try {
    (void)greedy_decompose(grid, target, real_candidates(-1.0, 1.0, 3), 2, 1e-12);
    FAIL("expected EmptyTarget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_target);
  }
}

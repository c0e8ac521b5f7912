#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "koopeig/benchmarks.hpp"
#include "koopeig/errors.hpp"
#include "koopeig/keig.hpp"

using namespace koopeig;

namespace {

const double kLn2 = std::log(2.0);

DataManifold horizontal() { return DataManifold::segment({0.25, 1.0}, {3.0, 1.0}, 201, 0.25, 3.0); }

Keig lin2d_keig(Complex lambda, DataFunction::ClosedForm h, TimeWindow window = {0.0, 1.5}) {
  const auto m = horizontal();
  return Keig(lambda, DataFunction::sample(m, std::move(h)), m, lin2d(1, 2), window);
}

Complex one(double) { return {1.0, 0.0}; }
Complex ident(double s) { return {s, 0.0}; }

std::vector<State> box(double x_lo, double x_hi, double y_lo, double y_hi, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(y_lo, y_hi);
  std::vector<State> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back({ux(rng), uy(rng)});
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("pullback on lin2d") {
  const auto pb = pullback(lin2d(1, 2), horizontal(), {0.0, 1.0}, State{2, 4});
  CHECK(pb.r_star == doctest::Approx(kLn2).epsilon(1e-6));
  CHECK(pb.s_star == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(distance(flow(lin2d(1, 2), pb.foot, pb.r_star).state, State{2, 4}) <= 100 * 1e-10 * 4);
}

TEST_CASE("pullback of a point on the manifold") {
  const auto pb = pullback(lin2d(1, 2), horizontal(), {0.0, 1.0}, State{1.3, 1.0});
  CHECK(pb.r_star == 0.0);
  CHECK(pb.s_star == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("pullback with a negative window start goes forward") {
  const auto pb = pullback(lin2d(1, 2), horizontal(), {-1.0, 1.0}, State{1.0, 0.25});
  CHECK(pb.r_star == doctest::Approx(-kLn2).epsilon(1e-8));
  CHECK(pb.s_star == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("points outside the swept domain") {
  CHECK(code_of([] { (void)pullback(lin2d(1, 2), horizontal(), {0.0, 1.0}, State{2.0, 20.0}); }) ==
        ErrorCode::not_in_domain);
  // Reaches the supporting line but outside the segment.
  CHECK(code_of([] { (void)pullback(lin2d(1, 2), horizontal(), {0.0, 1.0}, State{20.0, 2.0}); }) ==
        ErrorCode::not_in_domain);
}

TEST_CASE("orbit meeting the manifold twice") {
  // Rotation about the origin crosses a chord of the unit circle twice per turn.
  const VectorField rot("rotation", 2, [](StateView x, std::span<double> dx) {
    dx[0] = -x[1];
    dx[1] = x[0];
  });
  const auto chord = DataManifold::segment({-2.0, 0.0}, {2.0, 0.0}, 81, -2.0, 2.0);
  CHECK(code_of([&] { (void)pullback(rot, chord, {0.0, 5.0}, State{0.0, 1.0}); }) ==
        ErrorCode::ambiguous_crossing);
  PullbackOptions first_only;
  first_only.check_ambiguity = false;
  const auto pb = pullback(rot, chord, {0.0, 5.0}, State{0.0, 1.0}, first_only);
  CHECK(pb.r_star == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
}

TEST_CASE("Hopf pullback from inside the data circle") {
  const auto b = make_benchmark("hopf", {1.0});
  const State x{3.0, 1.0};
  PullbackOptions tight;
  tight.integrator.tol = 1e-12;
  const auto coarse = pullback(b.field, b.default_manifold, b.default_window, x);
  const auto fine = pullback(b.field, b.default_manifold, b.default_window, x, tight);
  CHECK(std::abs(coarse.r_star - fine.r_star) <= 1e-6);
  CHECK(std::abs(coarse.s_star - fine.s_star) <= 1e-6);
  // Radial closed form: r(t)^-2 = e^{-2t}/25 + 1 - e^{-2t}.
  const double r2 = 10.0;
  const double e = (1.0 / r2 - 1.0) / (1.0 / 25.0 - 1.0);
  CHECK(fine.r_star == doctest::Approx(-0.5 * std::log(e)).epsilon(1e-8));
}

TEST_CASE("observer and general-solution values") {
  CHECK(std::abs(lin2d_keig(2.0, one)(State{2, 4}) - 4.0) <= 1e-6);
  CHECK(std::abs(lin2d_keig(2.0, ident)(State{2, 4}) - 4.0) <= 1e-6);
  CHECK(std::abs(lin2d_keig(2.0, ident)(State{1.7, 1.0}) - 1.7) <= 1e-12);
}

TEST_CASE("koopman residual") {
  const auto phi = lin2d_keig(2.0, one);
  const auto pts = box(1.0, 2.0, 1.0, 3.0, 100, 5);
  CHECK(koopman_residual(phi, pts, 0.1) <= 1e-8);
  CHECK(koopman_residual(phi, pts, 0.0) == 0.0);
  const Eigenfunction wrong(2.5, phi.as_eigenfunction());
  const double expected = std::exp(0.05) - 1.0;
  CHECK(koopman_residual(lin2d(1, 2), wrong, pts, 0.1) >= expected * (1.0 - 1e-6));
}

TEST_CASE("benchmark oracles are eigenfunctions") {
  for (const auto& [name, pts] : std::vector<std::pair<std::string, std::vector<State>>>{
           {"lin1d", {{0.5}, {1.0}, {1.7}}},
           {"lin2d", box(0.5, 2.0, 1.0, 3.0, 20, 1)},
           {"blowup", {{0.6}, {1.0}, {1.5}}},
           {"action_angle", box(1.0, 2.0, 0.0, 1.0, 20, 2)}}) {
    const auto b = make_benchmark(name);
    for (Complex lambda : {Complex(1.0, 0.0), Complex(-0.5, 2.0)}) {
      const Eigenfunction phi(lambda, [&b, lambda](StateView x) { return b.oracle(x, lambda); });
      CHECK(koopman_residual(b.field, phi, pts, 0.1) <= 1e-6);
    }
  }
}

TEST_CASE("constructed matches benchmark oracles") {
  for (const std::string name : {"lin1d", "blowup", "action_angle"}) {
    const auto b = make_benchmark(name);
    const Complex lambda(1.0, 1.0);
    const Keig k(lambda, DataFunction::constant(b.default_manifold, 1.0), b.default_manifold, b.field,
                 b.default_window);
    const auto pts = sample_domain(b.field, b.default_manifold, b.default_window.t_begin * 0.9,
                                   b.default_window.t_end * 0.9, 20, 3);
    for (const auto& x : pts) CHECK(std::abs(k(x) - b.oracle(x, lambda)) <= 1e-6 * std::abs(b.oracle(x, lambda)));
  }
}

TEST_CASE("algebraic combinations") {
  const auto phi = lin2d_keig(2.0, one).as_eigenfunction();
  const auto sq = algebraic_combine(phi, 1.0, phi, 1.0);
  CHECK(sq.lambda() == Complex(4.0, 0.0));
  CHECK(std::abs(sq(State{1.5, 3.0}) - 9.0) <= 1e-6);
  const auto same = algebraic_combine(phi, 1.0, phi, 0.0);
  CHECK(same.lambda() == phi.lambda());
  CHECK(std::abs(same(State{1.5, 3.0}) - 3.0) <= 1e-6);

  const auto b = make_benchmark("lin1d", {1.0});
  const Keig x(1.0, DataFunction::constant(b.default_manifold, 1.0), b.default_manifold, b.field, {-1.0, 1.0});
  const auto root = algebraic_combine(x.as_eigenfunction(), 0.5, x.as_eigenfunction(), 0.0);
  CHECK(root.lambda() == Complex(0.5, 0.0));
  CHECK(std::abs(root(State{2.0}) - std::sqrt(2.0)) <= 1e-8);
  const std::vector<State> pts{{0.6}, {1.1}, {1.9}, {2.3}};
  CHECK(koopman_residual(b.field, root, pts, 0.1) <= 1e-6);
}

TEST_CASE("fractional powers of negative values are rejected") {
  const Eigenfunction neg(1.0, [](StateView x) { return Complex(-x[0], 0.0); });
  const auto root = algebraic_combine(neg, 0.5, neg, 0.0);
  CHECK(code_of([&] { (void)root(State{1.0}); }) == ErrorCode::domain_error);
  const auto cube = algebraic_combine(neg, 3.0, neg, 0.0);
  CHECK(cube(State{2.0}) == Complex(-8.0, 0.0));
}

TEST_CASE("orbit scaling") {
  const auto phi = lin2d_keig(2.0, one);
  CHECK(orbit_scaling_check(phi, State{1.5, 2.0}, 0.0) == 0.0);
  CHECK(orbit_scaling_check(phi, State{1.5, 2.0}, 0.3) <= 1e-8);
}

TEST_CASE("restating data on another curve") {
  const auto k = lin2d_keig(2.0, ident);
  const auto same = restate_data(k, k.manifold());
  for (std::size_t i = 0; i < same.size(); i += 10) CHECK(std::abs(same.values()[i] - k.h().values()[i]) <= 1e-9);

  // Vertical curve x1 = 1 parameterised by x2.
  const auto vertical = DataManifold::segment({1.0, 1.0}, {1.0, 4.0}, 601, 1.0, 4.0);
  const auto restated = restate_data(k, vertical);
  for (std::size_t i = 0; i < restated.size(); ++i) {
    const double s = restated.s_at(i);
    const Complex expected = ident(std::pow(s, -0.5)) * std::pow(s, 2.0 / 2.0);
    CHECK(std::abs(restated.values()[i] - expected) <= 1e-6);
  }

  const Keig rebuilt(2.0, restated, vertical, lin2d(1, 2), {-2.0, 1.5});
  for (const auto& x : box(1.1, 1.4, 2.0, 3.9, 50, 9)) CHECK(std::abs(rebuilt(x) - k(x)) <= 1e-5);

  // Restating through an intermediate curve equals restating directly.
  const auto middle = DataManifold::segment({0.6, 2.0}, {2.5, 2.0}, 601, 0.6, 2.5);
  const Keig via(2.0, restate_data(k, middle), middle, lin2d(1, 2), {-2.0, 2.0});
  const auto twice = restate_data(via, vertical);
  for (std::size_t i = 0; i < twice.size(); ++i) CHECK(std::abs(twice.values()[i] - restated.values()[i]) <= 1e-5);
}

TEST_CASE("level-set transversality") {
  const Eigenfunction x2(2.0, [](StateView x) { return Complex(x[1], 0.0); });
  const Eigenfunction general(2.0, [](StateView x) { return Complex(x[0] * std::sqrt(x[1]), 0.0); });
  const std::vector<State> unit{{1.0, 1.0}};
  CHECK(levelset_transversality(general, x2, unit, 1e-5)[0] == doctest::Approx(1.0).epsilon(1e-8));

  const auto pts = box(1.0, 2.0, 1.0, 2.0, 100, 4);
  const double h = default_fd_step(pts);
  const auto sq = algebraic_combine(x2, 2.0, x2, 0.0);
  const Eigenfunction triple(2.0, [](StateView x) { return Complex(3.0 * x[1], 0.0); });
  for (double v : levelset_transversality(x2, sq, pts, h)) CHECK(v <= 1e-5);
  for (double v : levelset_transversality(x2, triple, pts, h)) CHECK(v <= 1e-5);
  CHECK(same_primary_class(x2, sq, pts));
  CHECK_FALSE(same_primary_class(x2, general, pts));
}

TEST_CASE("Hopf eigenfunction certification") {
  const auto b = make_benchmark("hopf", {1.0});
  const Keig k(-1.0, DataFunction::sample(b.default_manifold, ident), b.default_manifold, b.field, b.default_window);
  const auto pts = sample_domain(b.field, b.default_manifold, 0.1, 1.8, 30, 1, 0.1);
  CHECK(koopman_residual(k, pts, 0.1) <= 1e-6);
}

TEST_CASE("evaluate_many is independent of the thread count") {
  const auto phi = lin2d_keig(Complex(1.0, 0.5), ident).as_eigenfunction();
  const auto pts = box(1.0, 2.0, 1.0, 3.0, 64, 8);
  const auto one_thread = evaluate_many(phi, pts, 1);
  const auto four = evaluate_many(phi, pts, 4);
  CHECK(one_thread == four);
}

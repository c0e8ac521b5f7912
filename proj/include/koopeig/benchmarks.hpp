#pragma once

#include <functional>
#include <string>
#include <vector>

#include "koopeig/dynamics.hpp"
#include "koopeig/manifold.hpp"

namespace koopeig {

/// x' = a x.
[[nodiscard]] VectorField lin1d(double a = 1.0);
/// x1' = a1 x1, x2' = a2 x2.
[[nodiscard]] VectorField lin2d(double a1 = 1.0, double a2 = 2.0);
/// Hopf normal form; limit cycle of radius sqrt(mu) for mu > 0.
[[nodiscard]] VectorField hopf(double mu = 1.0);
/// x1' = x2, x2' = mu x2 (1 - x1^2) - x1.
[[nodiscard]] VectorField van_der_pol(double mu = 1.0);
/// x' = x^2, which blows up in finite time.
[[nodiscard]] VectorField blowup();
/// State (I, theta): I' = 0, theta' = I.
[[nodiscard]] VectorField action_angle();

struct BenchmarkSystem {
  VectorField field;
  DataManifold default_manifold;
  TimeWindow default_window;
  /// Eigenfunction built from h = 1 on the default manifold, when known in
  /// closed form. Arguments: state, eigenvalue.
  std::function<Complex(StateView, Complex)> oracle;
};

/// Registry lookup: lin1d(a), lin2d(a1, a2), hopf(mu), vdp(mu), blowup,
/// action_angle(a, b, alpha). Missing parameters take the defaults above.
[[nodiscard]] BenchmarkSystem make_benchmark(const std::string& name,
                                             const std::vector<double>& params = {});

[[nodiscard]] std::vector<std::string> benchmark_names();

}  // namespace koopeig

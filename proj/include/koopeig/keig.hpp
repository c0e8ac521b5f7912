#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "koopeig/dynamics.hpp"
#include "koopeig/manifold.hpp"
#include "koopeig/types.hpp"

namespace koopeig {

struct PullbackOptions {
  IntegratorOptions integrator;
  /// Keep scanning after the first crossing and reject a second one.
  bool check_ambiguity = true;
  /// A surface crossing counts only if its projection onto the manifold lies
  /// this close (absolute, plus 100 * integrator tol).
  double accept_distance = 1e-9;
};

/// x = flow(foot, r_star) with foot = embed(s_star).
struct Pullback {
  double r_star = 0.0;
  double s_star = 0.0;
  State foot;
};

/// Locates the unique point of x's orbit on the manifold within the window.
/// Backward first (r_star in [0, t_end]); forward when t_begin < 0.
/// Throws NotInDomain or AmbiguousCrossing.
[[nodiscard]] Pullback pullback(const VectorField& field, const DataManifold& manifold,
                                TimeWindow window, StateView x, const PullbackOptions& opts = {});

/// Any scalar function paired with the eigenvalue it is claimed to carry.
class Eigenfunction {
 public:
  using Fn = std::function<Complex(StateView)>;

  Eigenfunction(Complex lambda, Fn fn) : lambda_(lambda), fn_(std::move(fn)) {}

  [[nodiscard]] Complex lambda() const noexcept { return lambda_; }
  [[nodiscard]] Complex operator()(StateView x) const { return fn_(x); }

 private:
  Complex lambda_;
  Fn fn_;
};

/// Eigenfunction h(s*(x)) e^{lambda r*(x)} built by characteristic pullback
/// from data h on a transverse manifold, valid on the swept domain
/// U = union of flow_t(manifold) for t in the window.
class Keig {
 public:
  Keig(Complex lambda, DataFunction h, DataManifold manifold, VectorField field, TimeWindow window,
       PullbackOptions opts = {});

  [[nodiscard]] Complex lambda() const noexcept { return lambda_; }
  [[nodiscard]] const DataFunction& h() const noexcept { return h_; }
  [[nodiscard]] const DataManifold& manifold() const noexcept { return manifold_; }
  [[nodiscard]] const VectorField& field() const noexcept { return field_; }
  [[nodiscard]] TimeWindow window() const noexcept { return window_; }
  [[nodiscard]] const PullbackOptions& options() const noexcept { return opts_; }

  [[nodiscard]] Pullback pullback(StateView x) const;

  struct Evaluation {
    Complex value;
    Pullback pullback;
  };
  [[nodiscard]] Evaluation evaluate(StateView x) const;
  [[nodiscard]] Complex operator()(StateView x) const { return evaluate(x).value; }

  [[nodiscard]] Eigenfunction as_eigenfunction() const;

 private:
  Complex lambda_;
  DataFunction h_;
  DataManifold manifold_;
  VectorField field_;
  TimeWindow window_;
  PullbackOptions opts_;
};

[[nodiscard]] inline Complex eval(const Keig& keig, StateView x) { return keig(x); }

/// max over points of |phi(flow_t(x)) - e^{lambda t} phi(x)| / max(1, |phi(x)|).
/// The flow uses the field's closed form when one exists.
[[nodiscard]] double koopman_residual(const VectorField& field, const Eigenfunction& phi,
                                      std::span<const State> points, double t,
                                      const IntegratorOptions& opts = {});
[[nodiscard]] double koopman_residual(const Keig& keig, std::span<const State> points,
                                      double t = 0.1);

/// x -> phi1(x)^alpha1 phi2(x)^alpha2 with eigenvalue alpha1 l1 + alpha2 l2.
/// Non-integer powers require non-negative real values (principal branch).
[[nodiscard]] Eigenfunction algebraic_combine(const Eigenfunction& phi1, double alpha1,
                                              const Eigenfunction& phi2, double alpha2);

/// |phi(flow_r(x)) - phi(x) e^{lambda r}|.
[[nodiscard]] double orbit_scaling_check(const VectorField& field, const Eigenfunction& phi,
                                         StateView x, double r, const IntegratorOptions& opts = {});
[[nodiscard]] double orbit_scaling_check(const Keig& keig, StateView x, double r);

/// Data on `target` reproducing the same eigenfunction: samples of keig at
/// target's grid nodes.
[[nodiscard]] DataFunction restate_data(const Keig& keig, const DataManifold& target);

/// Per-point |grad phi1 . perp-grad phi2| with perp(g) = (dg/dx2, -dg/dx1),
/// central differences of step fd_step. Planar states only.
[[nodiscard]] std::vector<double> levelset_transversality(const Eigenfunction& phi1,
                                                          const Eigenfunction& phi2,
                                                          std::span<const State> points,
                                                          double fd_step);

/// 1e-5 times the diagonal of the points' bounding box.
[[nodiscard]] double default_fd_step(std::span<const State> points);

inline constexpr double kPrimaryClassThreshold = 1e-4;

/// Numerical stand-in for "same set of level sets": every transversality
/// value at or below kPrimaryClassThreshold.
[[nodiscard]] bool same_primary_class(const Eigenfunction& phi1, const Eigenfunction& phi2,
                                      std::span<const State> points);

/// Random points flow_r(embed(s)) with r uniform in [r_lo, r_hi] and s
/// uniform over the manifold range shrunk by s_inset of its length per side.
[[nodiscard]] std::vector<State> sample_domain(const VectorField& field, const DataManifold& manifold,
                                               double r_lo, double r_hi, std::size_t count,
                                               std::uint64_t seed, double s_inset = 0.02,
                                               const IntegratorOptions& opts = {});

/// Values of phi at each point, evaluated on up to `threads` workers.
[[nodiscard]] std::vector<Complex> evaluate_many(const Eigenfunction& phi,
                                                 std::span<const State> points, std::size_t threads);

}  // namespace koopeig

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "koopeig/dynamics.hpp"
#include "koopeig/types.hpp"

namespace koopeig {

/// A one-parameter curve (a point when d = 1) transverse to the flow that
/// carries the initial data of an eigenfunction.
class DataManifold {
 public:
  using Embed = std::function<State(double s)>;
  using Tangent = std::function<State(double s)>;
  /// Signed distance to the supporting surface (the full line, the full
  /// circle, ...). Its zero set is what pullbacks detect.
  using Surface = std::function<double(StateView x)>;

  DataManifold(std::string kind, std::size_t dim, double s_min, double s_max,
               std::size_t n_samples, Embed embed, Surface surface, Tangent tangent = {});

  /// Straight segment; the parameter runs linearly over s_range as the point
  /// moves from `from` to `to`.
  static DataManifold segment(State from, State to, std::size_t n_samples,
                              double s_min = 0.0, double s_max = 1.0);
  /// Circular arc in the plane, parameterized by angle.
  static DataManifold circle(State center, double radius, double angle_begin, double angle_end,
                             std::size_t n_samples);
  /// Single point of a one-dimensional state space.
  static DataManifold point(double x);

  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] double s_min() const noexcept { return s_min_; }
  [[nodiscard]] double s_max() const noexcept { return s_max_; }
  [[nodiscard]] std::size_t n_samples() const noexcept { return n_samples_; }
  [[nodiscard]] double s_at(std::size_t i) const noexcept;
  [[nodiscard]] std::vector<double> s_grid() const;
  [[nodiscard]] std::vector<double> s_grid(std::size_t count) const;

  [[nodiscard]] State embed(double s) const { return embed_(s); }
  [[nodiscard]] double surface(StateView x) const { return surface_(x); }
  /// Analytic tangent when supplied, else second-order central difference.
  [[nodiscard]] State tangent(double s) const;

  /// Parameter whose embedding is closest to x: nearest grid node followed by
  /// golden-section refinement on the two neighbouring cells.
  [[nodiscard]] double project(StateView x) const;

  /// Pairwise distinctness of the sampled embedding.
  [[nodiscard]] bool is_injective_on_grid() const;

 private:
  std::string kind_;
  std::size_t dim_;
  double s_min_;
  double s_max_;
  std::size_t n_samples_;
  Embed embed_;
  Surface surface_;
  Tangent tangent_;
};

/// Data function h on a manifold's uniform parameter grid.
class DataFunction {
 public:
  using ClosedForm = std::function<Complex(double s)>;

  DataFunction(double s_min, double s_max, std::vector<Complex> values);

  static DataFunction from_closed_form(double s_min, double s_max, std::size_t count,
                                       ClosedForm fn);
  static DataFunction sample(const DataManifold& manifold, ClosedForm fn);
  static DataFunction constant(const DataManifold& manifold, Complex value);

  [[nodiscard]] double s_min() const noexcept { return s_min_; }
  [[nodiscard]] double s_max() const noexcept { return s_max_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] const std::vector<Complex>& values() const noexcept { return values_; }
  [[nodiscard]] double s_at(std::size_t i) const noexcept;
  [[nodiscard]] bool has_closed_form() const noexcept { return static_cast<bool>(closed_form_); }

  /// Closed form when present, otherwise piecewise-linear interpolation.
  /// Arguments within 1e-9 of the range are clamped; beyond that OutOfRange.
  [[nodiscard]] Complex operator()(double s) const;

 private:
  double s_min_;
  double s_max_;
  std::vector<Complex> values_;
  ClosedForm closed_form_;
};

[[nodiscard]] inline Complex eval_h(const DataFunction& h, double s) { return h(s); }

struct TransversalityReport {
  double min_normalized_cross = 0.0;
  std::vector<double> violating_s;
  bool pass = false;
};

inline constexpr double kTransversalityThreshold = 1e-8;

/// Minimum over the sample grid of |det[tangent, F]| / (|tangent| |F|).
/// Throws ZeroField when F vanishes at a sample.
[[nodiscard]] TransversalityReport check_transversality(const DataManifold& manifold,
                                                        const VectorField& field);

/// sup over the grid of |h h~' - h~ h'| with finite-difference derivatives.
[[nodiscard]] double data_compatibility(const DataFunction& h, const DataFunction& h_tilde);

}  // namespace koopeig

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace koopeig {

using Complex = std::complex<double>;
using State = std::vector<double>;
using StateView = std::span<const double>;

/// Closed time interval [t_begin, t_end] with t_begin <= 0 <= t_end.
struct TimeWindow {
  double t_begin = 0.0;
  double t_end = 1.0;

  [[nodiscard]] double length() const noexcept { return t_end - t_begin; }
  [[nodiscard]] bool contains(double t, double slack = 0.0) const noexcept {
    return t >= t_begin - slack && t <= t_end + slack;
  }
};

[[nodiscard]] inline double norm2(StateView x) noexcept {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

[[nodiscard]] inline double distance(StateView a, StateView b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace koopeig

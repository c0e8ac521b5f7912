#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "koopeig/errors.hpp"
#include "koopeig/manifold.hpp"

namespace koopeig {

DataManifold::DataManifold(std::string kind, std::size_t dim, double s_min, double s_max,
                           std::size_t n_samples, Embed embed, Surface surface, Tangent tangent)
    : kind_(std::move(kind)),
      dim_(dim),
      s_min_(s_min),
      s_max_(s_max),
      n_samples_(n_samples),
      embed_(std::move(embed)),
      surface_(std::move(surface)),
      tangent_(std::move(tangent)) {
  if (dim_ == 0 || n_samples_ == 0) {
    throw Error(ErrorCode::invalid_argument, "manifold needs a positive dimension and sample count");
  }
  if (!(s_max_ >= s_min_) || !std::isfinite(s_min_) || !std::isfinite(s_max_)) {
    throw Error(ErrorCode::invalid_argument, "manifold parameter range must satisfy s_min <= s_max");
  }
  if (n_samples_ > 1 && s_max_ == s_min_) {
    throw Error(ErrorCode::invalid_argument, "a sampled manifold needs s_min < s_max");
  }
  if (!embed_ || !surface_) throw Error(ErrorCode::invalid_argument, "manifold needs embed and surface");
}

DataManifold DataManifold::segment(State from, State to, std::size_t n_samples, double s_min,
                                   double s_max) {
  if (from.size() != to.size()) throw Error(ErrorCode::invalid_argument, "segment endpoints differ in dimension");
  if (from.size() != 2) throw Error(ErrorCode::invalid_argument, "segments are supported in the plane only");
  const double len = distance(from, to);
  if (!(len > 0.0)) throw Error(ErrorCode::invalid_argument, "segment endpoints coincide");
  if (n_samples < 2) throw Error(ErrorCode::invalid_argument, "segment needs at least two samples");
  const State dir{(to[0] - from[0]) / len, (to[1] - from[1]) / len};
  const double span = s_max - s_min;
  auto embed = [from, to, s_min, span](double s) {
    const double u = (s - s_min) / span;
    return State{from[0] + u * (to[0] - from[0]), from[1] + u * (to[1] - from[1])};
  };
  auto surface = [from, dir](StateView x) {
    // Normal is the tangent rotated by +90 degrees.
    return -dir[1] * (x[0] - from[0]) + dir[0] * (x[1] - from[1]);
  };
  auto tangent = [to, from, span](double) {
    return State{(to[0] - from[0]) / span, (to[1] - from[1]) / span};
  };
  return DataManifold("segment", 2, s_min, s_max, n_samples, embed, surface, tangent);
}

DataManifold DataManifold::circle(State center, double radius, double angle_begin, double angle_end,
                                  std::size_t n_samples) {
  if (center.size() != 2) throw Error(ErrorCode::invalid_argument, "circle center must be planar");
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_argument, "circle radius must be positive");
  if (!(angle_end > angle_begin) || angle_end - angle_begin > 2.0 * std::numbers::pi + 1e-12) {
    throw Error(ErrorCode::invalid_argument, "circle arc must satisfy 0 < a2 - a1 <= 2 pi");
  }
  if (n_samples < 2) throw Error(ErrorCode::invalid_argument, "circle needs at least two samples");
  auto embed = [center, radius](double s) {
    return State{center[0] + radius * std::cos(s), center[1] + radius * std::sin(s)};
  };
  auto surface = [center, radius](StateView x) {
    return std::hypot(x[0] - center[0], x[1] - center[1]) - radius;
  };
  auto tangent = [radius](double s) { return State{-radius * std::sin(s), radius * std::cos(s)}; };
  return DataManifold("circle", 2, angle_begin, angle_end, n_samples, embed, surface, tangent);
}

DataManifold DataManifold::point(double x) {
  return DataManifold(
      "point", 1, 0.0, 0.0, 1, [x](double) { return State{x}; },
      [x](StateView y) { return y[0] - x; }, [](double) { return State{1.0}; });
}

double DataManifold::s_at(std::size_t i) const noexcept {
  if (n_samples_ == 1) return s_min_;
  if (i + 1 == n_samples_) return s_max_;
  return s_min_ + (s_max_ - s_min_) * static_cast<double>(i) / static_cast<double>(n_samples_ - 1);
}

std::vector<double> DataManifold::s_grid() const { return s_grid(n_samples_); }

std::vector<double> DataManifold::s_grid(std::size_t count) const {
  if (count == 0) return {};
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = s_min_;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = s_min_ + (s_max_ - s_min_) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = s_max_;
  return out;
}

State DataManifold::tangent(double s) const {
  if (tangent_) return tangent_(s);
  const double h = 1e-6 * std::max(s_max_ - s_min_, 1.0);
  const State plus = embed_(s + h);
  const State minus = embed_(s - h);
  State out(plus.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (plus[i] - minus[i]) / (2.0 * h);
  return out;
}

double DataManifold::project(StateView x) const {
  if (n_samples_ == 1) return s_min_;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples_; ++i) {
    const double d = distance(embed_(s_at(i)), x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  double lo = s_at(best == 0 ? 0 : best - 1);
  double hi = s_at(std::min(best + 1, n_samples_ - 1));
  auto f = [&](double s) { return distance(embed_(s), x); };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = f(a);
  double fb = f(b);
  const double scale = std::max({std::abs(s_min_), std::abs(s_max_), 1.0});
  for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = f(b);
    }
  }
  double s = 0.5 * (lo + hi);

  // Finish on the sign change of (embed(s) - x) . tangent(s).
  auto slope = [&](double u) {
    const State e = embed_(u);
    const State t = tangent(u);
    double dot = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) dot += (e[k] - x[k]) * t[k];
    return dot;
  };
  double a0 = s_at(best == 0 ? 0 : best - 1);
  double b0 = s_at(std::min(best + 1, n_samples_ - 1));
  double ga = slope(a0);
  if (ga * slope(b0) < 0.0) {
    for (int it = 0; it < 100 && b0 - a0 > 0.0; ++it) {
      const double mid = 0.5 * (a0 + b0);
      if (mid <= a0 || mid >= b0) break;
      const double gm = slope(mid);
      if ((gm < 0.0) == (ga < 0.0)) {
        a0 = mid;
        ga = gm;
      } else {
        b0 = mid;
      }
    }
    s = 0.5 * (a0 + b0);
  }
  // The node itself may beat the bracket interior (minimum at an endpoint).
  if (best_d < f(s)) s = s_at(best);
  return s;
}

bool DataManifold::is_injective_on_grid() const {
  if (n_samples_ < 2) return true;
  std::vector<State> pts(n_samples_);
  for (std::size_t i = 0; i < n_samples_; ++i) pts[i] = embed_(s_at(i));
  double min_adjacent = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n_samples_; ++i) {
    min_adjacent = std::min(min_adjacent, distance(pts[i], pts[i + 1]));
  }
  if (!(min_adjacent > 0.0)) return false;
  const double tol = 1e-3 * min_adjacent;
  const bool closed_circle =
      kind_ == "circle" && s_max_ - s_min_ >= 2.0 * std::numbers::pi - 1e-12;
  for (std::size_t i = 0; i < n_samples_; ++i) {
    for (std::size_t j = i + 1; j < n_samples_; ++j) {
      if (closed_circle && i == 0 && j + 1 == n_samples_) continue;
      if (distance(pts[i], pts[j]) < tol) return false;
    }
  }
  return true;
}

DataFunction::DataFunction(double s_min, double s_max, std::vector<Complex> values)
    : s_min_(s_min), s_max_(s_max), values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::invalid_argument, "data function needs samples");
  if (!(s_max_ >= s_min_)) throw Error(ErrorCode::invalid_argument, "data function range is reversed");
  for (const Complex& v : values_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error(ErrorCode::invalid_argument, "data function samples must be finite");
    }
  }
}

DataFunction DataFunction::from_closed_form(double s_min, double s_max, std::size_t count,
                                            ClosedForm fn) {
  std::vector<Complex> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = count == 1 ? s_min
                     : i + 1 == count
                         ? s_max
                         : s_min + (s_max - s_min) * static_cast<double>(i) / static_cast<double>(count - 1);
    values[i] = fn(s);
  }
  DataFunction out(s_min, s_max, std::move(values));
  out.closed_form_ = std::move(fn);
  return out;
}

DataFunction DataFunction::sample(const DataManifold& manifold, ClosedForm fn) {
  return from_closed_form(manifold.s_min(), manifold.s_max(), manifold.n_samples(), std::move(fn));
}

DataFunction DataFunction::constant(const DataManifold& manifold, Complex value) {
  return sample(manifold, [value](double) { return value; });
}

double DataFunction::s_at(std::size_t i) const noexcept {
  const std::size_t n = values_.size();
  if (n == 1) return s_min_;
  if (i + 1 == n) return s_max_;
  return s_min_ + (s_max_ - s_min_) * static_cast<double>(i) / static_cast<double>(n - 1);
}

Complex DataFunction::operator()(double s) const {
  constexpr double kSlack = 1e-9;
  if (s < s_min_ - kSlack || s > s_max_ + kSlack || std::isnan(s)) {
    std::ostringstream msg;
    msg << "parameter " << s << " outside [" << s_min_ << ", " << s_max_ << "]";
    throw Error(ErrorCode::out_of_range, msg.str());
  }
  s = std::clamp(s, s_min_, s_max_);
  if (closed_form_) return closed_form_(s);
  const std::size_t n = values_.size();
  if (n == 1 || s_max_ == s_min_) return values_.front();
  const double u = (s - s_min_) / (s_max_ - s_min_) * static_cast<double>(n - 1);
  const std::size_t k = std::min(static_cast<std::size_t>(u), n - 2);
  const double w = u - static_cast<double>(k);
  return (1.0 - w) * values_[k] + w * values_[k + 1];
}

TransversalityReport check_transversality(const DataManifold& manifold, const VectorField& field) {
  if (manifold.dim() != field.dim()) {
    throw Error(ErrorCode::invalid_argument, "manifold and field dimensions differ");
  }
  TransversalityReport report;
  report.min_normalized_cross = std::numeric_limits<double>::infinity();
  for (double s : manifold.s_grid()) {
    const State x = manifold.embed(s);
    const State f = field(x);
    const double f_norm = norm2(f);
    if (f_norm < 1e-14) {
      std::ostringstream msg;
      msg << "vector field vanishes on the manifold at s = " << s;
      throw Error(ErrorCode::zero_field, msg.str());
    }
    double value = 1.0;
    if (field.dim() == 2) {
      const State t = manifold.tangent(s);
      const double t_norm = norm2(t);
      value = t_norm > 0.0 ? std::abs(t[0] * f[1] - t[1] * f[0]) / (t_norm * f_norm) : 0.0;
    } else if (field.dim() > 2) {
      throw Error(ErrorCode::invalid_argument, "transversality is implemented for d <= 2");
    }
    report.min_normalized_cross = std::min(report.min_normalized_cross, value);
    if (value < kTransversalityThreshold) report.violating_s.push_back(s);
  }
  report.pass = report.violating_s.empty();
  return report;
}

namespace {

std::vector<Complex> grid_derivative(const DataFunction& h) {
  const auto& v = h.values();
  const std::size_t n = v.size();
  std::vector<Complex> d(n, Complex{});
  if (n < 2) return d;
  const double ds = (h.s_max() - h.s_min()) / static_cast<double>(n - 1);
  if (n == 2) {
    d[0] = d[1] = (v[1] - v[0]) / ds;
    return d;
  }
  d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * ds);
  d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * ds);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * ds);
  return d;
}

}  // namespace

double data_compatibility(const DataFunction& h, const DataFunction& h_tilde) {
  if (h.size() != h_tilde.size()) {
    std::ostringstream msg;
    msg << "sample counts differ: " << h.size() << " vs " << h_tilde.size();
    throw Error(ErrorCode::grid_mismatch, msg.str());
  }
  const double scale = std::max({std::abs(h.s_min()), std::abs(h.s_max()), 1.0});
  if (std::abs(h.s_min() - h_tilde.s_min()) > 1e-12 * scale ||
      std::abs(h.s_max() - h_tilde.s_max()) > 1e-12 * scale) {
    throw Error(ErrorCode::grid_mismatch, "parameter ranges differ");
  }
  const auto dh = grid_derivative(h);
  const auto dht = grid_derivative(h_tilde);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    worst = std::max(worst, std::abs(h.values()[i] * dht[i] - h_tilde.values()[i] * dh[i]));
  }
  return worst;
}

}  // namespace koopeig

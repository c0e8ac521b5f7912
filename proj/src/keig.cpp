#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "koopeig/errors.hpp"
#include "koopeig/keig.hpp"
#include "koopeig/parallel.hpp"

namespace koopeig {

namespace {

// Lets points sitting exactly on the window edge still resolve.
double budget_slack(double t) { return 1e-8 * std::max(1.0, std::abs(t)); }

std::optional<Pullback> scan_for_foot(const VectorField& field, const DataManifold& manifold,
                                      StateView x, Direction direction, double budget,
                                      const PullbackOptions& opts) {
  const double accept = opts.accept_distance + 100.0 * opts.integrator.tol;
  const double sign = direction == Direction::backward ? 1.0 : -1.0;
  std::optional<Pullback> found;
  bool ambiguous = false;
  double second_time = 0.0;

  try {
    scan_events(
        field, x, [&](StateView y) { return manifold.surface(y); }, direction, budget,
        opts.integrator,
        [&](const EventCrossing& c) {
          const double s = manifold.project(c.state);
          if (distance(manifold.embed(s), c.state) > accept) return ScanControl::resume;
          if (!found) {
            found = Pullback{sign * c.time_of_flight, s, c.state};
            return opts.check_ambiguity ? ScanControl::resume : ScanControl::stop;
          }
          ambiguous = true;
          second_time = c.time_of_flight;
          return ScanControl::stop;
        },
        /*tolerate_blowup=*/true);
  } catch (const Error& e) {
    // Running out of step size before reaching the manifold means x is not in U.
    // An orbit that escapes after its crossing keeps the crossing.
    if (e.code() != ErrorCode::step_underflow) throw;
  }

  if (ambiguous) {
    std::ostringstream msg;
    msg << "orbit meets the manifold twice within the window (flow times " << std::abs(found->r_star)
        << " and " << second_time << ")";
    throw Error(ErrorCode::ambiguous_crossing, msg.str());
  }
  return found;
}

}  // namespace

Pullback pullback(const VectorField& field, const DataManifold& manifold, TimeWindow window,
                  StateView x, const PullbackOptions& opts) {
  if (x.size() != field.dim() || manifold.dim() != field.dim()) {
    throw Error(ErrorCode::invalid_argument, "pullback dimensions disagree");
  }
  if (window.t_begin > 0.0 || window.t_end < 0.0) {
    throw Error(ErrorCode::invalid_argument, "time window must contain 0");
  }
  if (auto pb = scan_for_foot(field, manifold, x, Direction::backward, window.t_end + budget_slack(window.t_end),
                              opts)) {
    return *pb;
  }
  if (window.t_begin < 0.0) {
    if (auto pb = scan_for_foot(field, manifold, x, Direction::forward,
                                -window.t_begin + budget_slack(window.t_begin),
                                opts)) {
      return *pb;
    }
  }
  std::ostringstream msg;
  msg << "no crossing of the " << manifold.kind() << " manifold within flow times ["
      << window.t_begin << ", " << window.t_end << "] of (";
  for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
  msg << ")";
  throw Error(ErrorCode::not_in_domain, msg.str());
}

Keig::Keig(Complex lambda, DataFunction h, DataManifold manifold, VectorField field, TimeWindow window,
           PullbackOptions opts)
    : lambda_(lambda),
      h_(std::move(h)),
      manifold_(std::move(manifold)),
      field_(std::move(field)),
      window_(window),
      opts_(opts) {
  if (window_.t_begin > 0.0 || window_.t_end < 0.0) {
    throw Error(ErrorCode::invalid_argument, "time window must contain 0");
  }
  if (manifold_.dim() != field_.dim()) {
    throw Error(ErrorCode::invalid_argument, "manifold and field dimensions differ");
  }
}

Pullback Keig::pullback(StateView x) const { return koopeig::pullback(field_, manifold_, window_, x, opts_); }

Keig::Evaluation Keig::evaluate(StateView x) const {
  Pullback pb = pullback(x);
  const Complex value = h_(pb.s_star) * std::exp(lambda_ * pb.r_star);
  return {value, std::move(pb)};
}

Eigenfunction Keig::as_eigenfunction() const {
  auto self = std::make_shared<const Keig>(*this);
  return Eigenfunction(lambda_, [self](StateView x) { return (*self)(x); });
}

double koopman_residual(const VectorField& field, const Eigenfunction& phi,
                        std::span<const State> points, double t, const IntegratorOptions& opts) {
  const Complex growth = std::exp(phi.lambda() * t);
  double worst = 0.0;
  for (const State& x : points) {
    const Complex here = phi(x);
    const State moved = t == 0.0 ? x : advance(field, x, t, opts);
    const Complex there = phi(moved);
    const double defect = std::abs(there - growth * here) / std::max(1.0, std::abs(here));
    worst = std::max(worst, defect);
  }
  return worst;
}

double koopman_residual(const Keig& keig, std::span<const State> points, double t) {
  return koopman_residual(keig.field(), keig.as_eigenfunction(), points, t, keig.options().integrator);
}

namespace {

bool is_integer(double a) { return std::floor(a) == a && std::abs(a) < 1e9; }

Complex int_pow(Complex z, long long k) {
  if (k < 0) {
    if (z == Complex{}) throw Error(ErrorCode::domain_error, "negative power of zero");
    return 1.0 / int_pow(z, -k);
  }
  Complex result{1.0, 0.0};
  while (k > 0) {
    if (k & 1) result *= z;
    z *= z;
    k >>= 1;
  }
  return result;
}

Complex checked_pow(Complex z, double alpha) {
  if (alpha == 0.0) return {1.0, 0.0};
  if (is_integer(alpha)) return int_pow(z, static_cast<long long>(alpha));
  const double mag = std::abs(z);
  if (std::abs(z.imag()) > 1e-12 * mag || z.real() < 0.0) {
    std::ostringstream msg;
    msg << "non-integer power " << alpha << " of " << z << " leaves the principal branch";
    throw Error(ErrorCode::domain_error, msg.str());
  }
  if (z.real() == 0.0 && alpha < 0.0) throw Error(ErrorCode::domain_error, "negative power of zero");
  return {std::pow(z.real(), alpha), 0.0};
}

}  // namespace

Eigenfunction algebraic_combine(const Eigenfunction& phi1, double alpha1, const Eigenfunction& phi2,
                                double alpha2) {
  const Complex lambda = alpha1 * phi1.lambda() + alpha2 * phi2.lambda();
  return Eigenfunction(lambda, [phi1, alpha1, phi2, alpha2](StateView x) {
    const Complex a = alpha1 == 0.0 ? Complex{1.0, 0.0} : checked_pow(phi1(x), alpha1);
    const Complex b = alpha2 == 0.0 ? Complex{1.0, 0.0} : checked_pow(phi2(x), alpha2);
    return a * b;
  });
}

double orbit_scaling_check(const VectorField& field, const Eigenfunction& phi, StateView x, double r,
                           const IntegratorOptions& opts) {
  const Complex here = phi(x);
  const State moved = r == 0.0 ? State(x.begin(), x.end()) : advance(field, x, r, opts);
  return std::abs(phi(moved) - here * std::exp(phi.lambda() * r));
}

double orbit_scaling_check(const Keig& keig, StateView x, double r) {
  return orbit_scaling_check(keig.field(), keig.as_eigenfunction(), x, r, keig.options().integrator);
}

DataFunction restate_data(const Keig& keig, const DataManifold& target) {
  if (target.dim() != keig.field().dim()) {
    throw Error(ErrorCode::invalid_argument, "target manifold dimension differs from the field");
  }
  const auto grid = target.s_grid();
  std::vector<Complex> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = keig(target.embed(grid[i]));
  return DataFunction(target.s_min(), target.s_max(), std::move(values));
}

std::vector<double> levelset_transversality(const Eigenfunction& phi1, const Eigenfunction& phi2,
                                            std::span<const State> points, double fd_step) {
  if (!(fd_step > 0.0)) throw Error(ErrorCode::invalid_argument, "fd_step must be positive");
  std::vector<double> out;
  out.reserve(points.size());
  for (const State& x : points) {
    if (x.size() != 2) throw Error(ErrorCode::invalid_argument, "level-set transversality needs planar states");
    Complex g1[2];
    Complex g2[2];
    for (int k = 0; k < 2; ++k) {
      State plus = x;
      State minus = x;
      plus[k] += fd_step;
      minus[k] -= fd_step;
      g1[k] = (phi1(plus) - phi1(minus)) / (2.0 * fd_step);
      g2[k] = (phi2(plus) - phi2(minus)) / (2.0 * fd_step);
    }
    // grad phi1 . (d phi2/dx2, -d phi2/dx1)
    out.push_back(std::abs(g1[0] * g2[1] - g1[1] * g2[0]));
  }
  return out;
}

double default_fd_step(std::span<const State> points) {
  if (points.empty()) return 1e-5;
  State lo = points.front();
  State hi = points.front();
  for (const State& p : points) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  const double diag = distance(lo, hi);
  return 1e-5 * (diag > 0.0 ? diag : 1.0);
}

bool same_primary_class(const Eigenfunction& phi1, const Eigenfunction& phi2,
                        std::span<const State> points) {
  const auto values = levelset_transversality(phi1, phi2, points, default_fd_step(points));
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return v <= kPrimaryClassThreshold; });
}

std::vector<State> sample_domain(const VectorField& field, const DataManifold& manifold, double r_lo,
                                 double r_hi, std::size_t count, std::uint64_t seed, double s_inset,
                                 const IntegratorOptions& opts) {
  if (r_hi < r_lo) throw Error(ErrorCode::invalid_argument, "sample_domain needs r_lo <= r_hi");
  std::mt19937_64 rng(seed);
  const double span = manifold.s_max() - manifold.s_min();
  std::uniform_real_distribution<double> s_dist(manifold.s_min() + s_inset * span,
                                                manifold.s_max() - s_inset * span);
  std::uniform_real_distribution<double> r_dist(r_lo, r_hi);
  std::vector<State> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = span > 0.0 ? s_dist(rng) : manifold.s_min();
    const double r = r_hi > r_lo ? r_dist(rng) : r_lo;
    out.push_back(advance(field, manifold.embed(s), r, opts));
  }
  return out;
}

std::vector<Complex> evaluate_many(const Eigenfunction& phi, std::span<const State> points,
                                   std::size_t threads) {
  std::vector<Complex> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) { out[i] = phi(points[i]); });
  return out;
}

}  // namespace koopeig

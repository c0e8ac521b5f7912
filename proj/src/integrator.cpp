#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "koopeig/dynamics.hpp"
#include "koopeig/errors.hpp"

namespace koopeig {

VectorField::VectorField(std::string name, std::size_t dim, Rhs rhs, Flow closed_form_flow)
    : name_(std::move(name)), dim_(dim), rhs_(std::move(rhs)), flow_(std::move(closed_form_flow)) {
  if (dim_ == 0) throw Error(ErrorCode::invalid_argument, "vector field dimension must be positive");
  if (!rhs_) throw Error(ErrorCode::invalid_argument, "vector field needs a right-hand side");
}

State VectorField::operator()(StateView x) const {
  State out(dim_);
  rhs_(x, out);
  return out;
}

State VectorField::closed_form_flow(StateView x, double t) const {
  if (!flow_) throw Error(ErrorCode::invalid_argument, name_ + " has no closed-form flow");
  return flow_(x, t);
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer & Wanner, dopri5 contd5).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

constexpr int kMaxBisections = 80;

// Integrates dx/dtau = sign * F(x) for tau >= 0.
class DormandPrince {
 public:
  DormandPrince(const VectorField& field, StateView x0, double sign, const IntegratorOptions& opts)
      : field_(field), sign_(sign), opts_(opts), n_(field.dim()), y_(x0.begin(), x0.end()) {
    if (x0.size() != n_) {
      std::ostringstream msg;
      msg << "state has dimension " << x0.size() << ", field " << field.name() << " expects " << n_;
      throw Error(ErrorCode::invalid_argument, msg.str());
    }
    if (!(opts_.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &yprev_}) v->resize(n_);
    for (auto& r : rcont_) r.resize(n_);
    check_state(y_);
    rhs(y_, k1_);
  }

  [[nodiscard]] const State& state() const noexcept { return y_; }
  [[nodiscard]] double elapsed() const noexcept { return tau_; }
  [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
  [[nodiscard]] double last_step() const noexcept { return last_h_; }

  // Takes one accepted step without passing tau_end. Returns true once there.
  bool step_toward(double tau_end) {
    const double remaining = tau_end - tau_;
    if (remaining <= 0.0) return true;
    if (h_ <= 0.0) h_ = initial_step(remaining);

    bool rejected_before = false;
    for (;;) {
      if (++attempts_ > opts_.max_steps) {
        throw Error(ErrorCode::step_underflow, "maximum number of integration steps exceeded");
      }
      bool last = false;
      double h = h_;
      if (h >= remaining) {
        h = remaining;
        last = true;
      } else if (h < opts_.min_step) {
        std::ostringstream msg;
        msg << "step size " << h << " below " << opts_.min_step << " at elapsed time " << tau_;
        throw Error(ErrorCode::step_underflow, msg.str());
      }

      const double err = attempt(h);
      if (std::isfinite(err) && err <= 1.0) {
        check_state(ynew_);
        build_dense(h);
        yprev_.swap(y_);
        y_.swap(ynew_);
        k1_.swap(k7_);
        tau_prev_ = tau_;
        tau_ = last ? tau_end : tau_ + h;
        last_h_ = h;
        ++steps_;
        double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        factor = std::clamp(factor, 0.2, rejected_before ? 1.0 : 5.0);
        const double proposal = h * factor;
        // A clipped final step must not shrink the proposal for a later call.
        h_ = last ? std::max(h_, proposal) : proposal;
        return last;
      }
      rejected_before = true;
      const double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h_ = h * factor;
    }
  }

  // Dense output on the last accepted step, theta in [0, 1].
  void dense(double theta, State& out) const {
    const double one_minus = 1.0 - theta;
    out.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = rcont_[0][i] +
               theta * (rcont_[1][i] +
                        one_minus * (rcont_[2][i] + theta * (rcont_[3][i] + one_minus * rcont_[4][i])));
    }
  }

  [[nodiscard]] double step_start() const noexcept { return tau_prev_; }

 private:
  void rhs(const State& x, State& out) const {
    field_.eval(x, out);
    if (sign_ < 0.0) {
      for (double& v : out) v = -v;
    }
  }

  void check_state(const State& x) const {
    double sq = 0.0;
    for (double v : x) sq += v * v;
    if (!std::isfinite(sq) || std::sqrt(sq) > opts_.blowup_bound) {
      std::ostringstream msg;
      msg << "state norm exceeded " << opts_.blowup_bound << " at elapsed time " << tau_;
      throw Error(ErrorCode::blow_up, msg.str());
    }
  }

  [[nodiscard]] double scaled_norm(const State& v) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sk = opts_.tol + opts_.tol * std::abs(y_[i]);
      const double r = v[i] / sk;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(n_));
  }

  double initial_step(double remaining) {
    const double d0 = scaled_norm(y_);
    const double dd1 = scaled_norm(k1_);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, remaining);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y_[i] + h0 * k1_[i];
    rhs(tmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i) k3_[i] = k2_[i] - k1_[i];
    const double d2 = scaled_norm(k3_) / h0;
    const double dmax = std::max(dd1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, remaining});
  }

  double attempt(double h) {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y_[i] + h * a21 * k1_[i];
    rhs(tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    rhs(tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    rhs(tmp_, k4_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    rhs(tmp_, k5_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    rhs(tmp_, k6_);
    for (std::size_t i = 0; i < n; ++i)
      ynew_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
    for (double v : ynew_) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    }
    rhs(ynew_, k7_);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] +
                            e7 * k7_[i]);
      const double sk = opts_.tol + opts_.tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
      s += (e / sk) * (e / sk);
    }
    return std::sqrt(s / static_cast<double>(n));
  }

  void build_dense(double h) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double dy = ynew_[i] - y_[i];
      const double bspl = h * k1_[i] - dy;
      rcont_[0][i] = y_[i];
      rcont_[1][i] = dy;
      rcont_[2][i] = bspl;
      rcont_[3][i] = dy - h * k7_[i] - bspl;
      rcont_[4][i] =
          h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
    }
  }

  const VectorField& field_;
  double sign_;
  IntegratorOptions opts_;
  std::size_t n_;
  State y_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, yprev_;
  std::array<State, 5> rcont_;
  double tau_ = 0.0;
  double tau_prev_ = 0.0;
  double h_ = 0.0;
  double last_h_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t attempts_ = 0;
};

[[nodiscard]] bool opposite_signs(double a, double b) noexcept {
  return (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0);
}

}  // namespace

FlowResult flow(const VectorField& field, StateView x0, double t, const IntegratorOptions& opts) {
  if (!std::isfinite(t)) throw Error(ErrorCode::invalid_argument, "flow time must be finite");
  DormandPrince stepper(field, x0, t < 0.0 ? -1.0 : 1.0, opts);
  const double tau_end = std::abs(t);
  while (!stepper.step_toward(tau_end)) {
  }
  return FlowResult{stepper.state(), t, stepper.steps()};
}

std::size_t scan_events(const VectorField& field, StateView x0, const EventFunction& event,
                        Direction direction, double t_max, const IntegratorOptions& opts,
                        const std::function<ScanControl(const EventCrossing&)>& on_crossing,
                        bool tolerate_blowup) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw Error(ErrorCode::invalid_argument, "t_max must be positive and finite");
  }
  const double sign = direction == Direction::forward ? 1.0 : -1.0;
  DormandPrince stepper(field, x0, sign, opts);

  std::size_t count = 0;
  double g_prev = event(x0);
  if (std::abs(g_prev) < opts.tol) {
    ++count;
    if (on_crossing(EventCrossing{State(x0.begin(), x0.end()), 0.0}) == ScanControl::stop) {
      return count;
    }
    g_prev = 0.0;
  }

  State probe;
  for (;;) {
    bool done = false;
    try {
      done = stepper.step_toward(t_max);
    } catch (const Error& e) {
      if (tolerate_blowup && e.code() == ErrorCode::blow_up) return count;
      throw;
    }
    const double g_new = event(stepper.state());
    if (g_prev != 0.0 && (opposite_signs(g_prev, g_new) || g_new == 0.0)) {
      EventCrossing crossing;
      if (g_new == 0.0) {
        crossing = EventCrossing{stepper.state(), stepper.elapsed()};
      } else {
        double lo = 0.0;
        double hi = 1.0;
        double g_lo = g_prev;
        double best_theta = 1.0;
        double best_g = g_new;
        for (int it = 0; it < kMaxBisections; ++it) {
          const double mid = 0.5 * (lo + hi);
          stepper.dense(mid, probe);
          const double gm = event(probe);
          if (std::abs(gm) < std::abs(best_g)) {
            best_g = gm;
            best_theta = mid;
          }
          if (std::abs(gm) < opts.tol || hi - lo < 1e-16) break;
          if (opposite_signs(g_lo, gm)) {
            hi = mid;
          } else {
            lo = mid;
            g_lo = gm;
          }
        }
        stepper.dense(best_theta, probe);
        crossing = EventCrossing{probe, stepper.step_start() + best_theta * stepper.last_step()};
      }
      ++count;
      if (on_crossing(crossing) == ScanControl::stop) return count;
    }
    g_prev = g_new;
    if (done) return count;
  }
}

EventCrossing flow_to_event(const VectorField& field, StateView x0, const EventFunction& event,
                            Direction direction, double t_max, const IntegratorOptions& opts) {
  std::optional<EventCrossing> found;
  scan_events(field, x0, event, direction, t_max, opts, [&](const EventCrossing& c) {
    found = c;
    return ScanControl::stop;
  });
  if (!found) {
    std::ostringstream msg;
    msg << "no sign change of the event within flow time " << t_max;
    throw Error(ErrorCode::no_crossing, msg.str());
  }
  return *found;
}

State advance(const VectorField& field, StateView x0, double t, const IntegratorOptions& opts) {
  if (field.has_closed_form_flow()) return field.closed_form_flow(x0, t);
  return flow(field, x0, t, opts).state;
}

}  // namespace koopeig

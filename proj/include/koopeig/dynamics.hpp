#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "koopeig/types.hpp"

namespace koopeig {

/// Right-hand side F of x' = F(x), optionally paired with its exact flow.
class VectorField {
 public:
  using Rhs = std::function<void(StateView x, std::span<double> dxdt)>;
  using Flow = std::function<State(StateView x, double t)>;

  VectorField(std::string name, std::size_t dim, Rhs rhs, Flow closed_form_flow = {});

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

  void eval(StateView x, std::span<double> dxdt) const { rhs_(x, dxdt); }
  [[nodiscard]] State operator()(StateView x) const;

  [[nodiscard]] bool has_closed_form_flow() const noexcept { return static_cast<bool>(flow_); }
  /// Exact flow; throws if none was supplied.
  [[nodiscard]] State closed_form_flow(StateView x, double t) const;

 private:
  std::string name_;
  std::size_t dim_;
  Rhs rhs_;
  Flow flow_;
};

struct IntegratorOptions {
  double tol = 1e-10;            // per-step local error (absolute and relative)
  double blowup_bound = 1e12;    // |x| above this raises BlowUp
  double min_step = 1e-14;       // StepUnderflow below this
  std::size_t max_steps = 5'000'000;
};

struct FlowResult {
  State state;
  double time_elapsed = 0.0;
  std::size_t steps_taken = 0;
};

enum class Direction { backward, forward };

struct EventCrossing {
  State state;
  double time_of_flight = 0.0;  // magnitude; the sign lives in the direction
};

using EventFunction = std::function<double(StateView)>;

/// Integrates x' = F(x) from x0 over signed time t with Dormand-Prince 4(5).
/// Negative t integrates the reversed field. The last step is clipped so the
/// elapsed time equals t exactly.
[[nodiscard]] FlowResult flow(const VectorField& field, StateView x0, double t,
                              const IntegratorOptions& opts = {});

/// Flows until `event` changes sign, then bisects on the dense output until
/// |event| < tol (at most 80 halvings). Throws NoCrossing when none occurs
/// within t_max.
[[nodiscard]] EventCrossing flow_to_event(const VectorField& field, StateView x0,
                                          const EventFunction& event, Direction direction,
                                          double t_max, const IntegratorOptions& opts = {});

enum class ScanControl { stop, resume };

/// Reports every sign change of `event` along the orbit in order. The callback
/// decides whether to keep scanning. Returns the number of crossings seen.
/// A start point with |event| < tol is reported as a crossing at time 0.
/// BlowUp during the scan ends it silently when `tolerate_blowup` is set.
std::size_t scan_events(const VectorField& field, StateView x0, const EventFunction& event,
                        Direction direction, double t_max, const IntegratorOptions& opts,
                        const std::function<ScanControl(const EventCrossing&)>& on_crossing,
                        bool tolerate_blowup = false);

/// Uses the exact flow when the field has one, the integrator otherwise.
[[nodiscard]] State advance(const VectorField& field, StateView x0, double t,
                            const IntegratorOptions& opts = {});

}  // namespace koopeig

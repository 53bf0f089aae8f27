#pragma once

// Event-detecting hybrid simulation of one half gait cycle (apex -> apex)
// executing a MotionPlan open loop.

#include <optional>
#include <string>
#include <vector>

#include "aslip/model.hpp"
#include "aslip/ode.hpp"
#include "aslip/plan.hpp"

namespace aslip {

struct SimConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double event_tol = 1e-10;
  double max_time = 10.0;
  double max_step = 0.02;

  void validate() const;
};

enum class SimStatus { ApexReached, FellInStance, FellInFlight, NegativeLiftoff, Timeout };
enum class EventKind { Touchdown, Liftoff, Apex, GroundContact, Recontact };

std::string_view to_string(SimStatus status);
std::string_view to_string(EventKind kind);
bool is_failure(SimStatus status);

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::Touchdown;
  State state;  // world frame
};

struct SimOutcome {
  SimStatus status = SimStatus::Timeout;
  std::optional<State> apex;  // present iff ApexReached
  std::vector<SimEvent> events;
  std::optional<double> touchdown_angle;
  std::optional<Point2> contact_point;
  /// Non-terminating anomalies (set point out of range, horizon extrapolation).
  std::vector<std::string> diagnostics;
};

/// Dense record of a simulated step, stored per phase as accepted integrator steps.
class SimTrace {
 public:
  struct Sample {
    double t = 0.0;
    Mode mode = Mode::FlightDescent;
    State world;
    double force = 0.0;  // leg force along the leg, zero in flight
  };

  /// World-frame state at `t`, or nullopt outside the simulated interval.
  std::optional<State> state_at(double t) const;
  /// Same as state_at but with positions relative to `origin`.
  std::optional<State> state_at(double t, Point2 origin) const;
  std::optional<Mode> mode_at(double t) const;
  /// Uniform samples every `dt`, plus the phase boundaries.
  std::vector<Sample> sample(double dt) const;

  double begin() const;
  double end() const;

 private:
  friend SimOutcome simulate_step(const MotionPlan&, const State&, double, const SimConfig&,
                                  SimTrace*);
  struct Arc {
    Mode mode;
    Point2 origin;  // world = local + origin
    std::vector<DenseStep<5>> steps;
    double t_end = 0.0;
  };
  const Arc* find(double t, const DenseStep<5>** step) const;
  State make_state(const Arc& arc, const DenseStep<5>& step, double t) const;

  std::vector<Arc> arcs_;
  MotionPlan plan_;
};

/// Simulates from `apex` (world frame, ydot = 0) over ground at height
/// `ground_y`. The set point follows the plan; the r0/r0dot fields of `apex`
/// are ignored. Throws IntegrationFailure on integrator breakdown.
SimOutcome simulate_step(const MotionPlan& plan, const State& apex, double ground_y,
                         const SimConfig& config = {}, SimTrace* trace = nullptr);

/// Apex state at world height `y0` and forward speed `xd0` (relaxed spring).
State apex_state(const MotionPlan& plan, double y0, double xd0);

}  // namespace aslip

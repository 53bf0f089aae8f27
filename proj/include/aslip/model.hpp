#pragma once

// Actuated spring-loaded inverted pendulum (ASLIP): point-mass body, massless
// leg made of a rigid set-point actuator in series with a damped linear spring.
// All quantities are nondimensional (mass m, max set-point length l0, gravity g).

#include <array>
#include <cmath>
#include <string_view>

#include "aslip/error.hpp"

namespace aslip {

struct Params {
  double mass = 1.0;
  double leg_length = 1.0;  // l0, maximum set-point length
  double gravity = 1.0;
  double stiffness = 20.0;  // k [m g / l0]
  double damping = 0.89;    // b [m sqrt(g / l0)]
  double max_accel = 5.0;   // set-point acceleration limit [g]

  double min_setpoint() const { return 0.5 * leg_length; }
  double max_setpoint() const { return leg_length; }

  /// Throws InvalidParameters unless every constant is in its admissible range.
  /// Zero damping is allowed here; flight dynamics reject it separately.
  void validate() const;
};

inline constexpr int kStateDim = 7;

/// The seven continuous ASLIP states. In flight `x, y` are the body position;
/// in stance they are measured from the foot contact point and `rp` carries the
/// dependent deflection r - r0.
struct State {
  double x = 0.0;
  double y = 0.0;
  double xdot = 0.0;
  double ydot = 0.0;
  double r0 = 0.0;
  double r0dot = 0.0;
  double rp = 0.0;

  double leg_radius() const { return std::hypot(x, y); }
  /// Rate of change of the body's distance to the origin. Throws SingularState at r ~ 0.
  double leg_radius_rate() const;

  std::array<double, kStateDim> to_array() const { return {x, y, xdot, ydot, r0, r0dot, rp}; }
  static State from_array(const std::array<double, kStateDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  bool finite() const;
};

/// Time derivative of a State, same layout.
struct Deriv {
  double x = 0.0;
  double y = 0.0;
  double xdot = 0.0;
  double ydot = 0.0;
  double r0 = 0.0;
  double r0dot = 0.0;
  double rp = 0.0;

  std::array<double, kStateDim> to_array() const { return {x, y, xdot, ydot, r0, r0dot, rp}; }
};

enum class Mode { FlightDescent, Stance, FlightAscent };

std::string_view to_string(Mode mode);
inline bool is_flight(Mode mode) { return mode != Mode::Stance; }

/// Radius below which stance geometry is treated as singular.
inline constexpr double kSingularRadius = 1e-9;

Deriv flight_deriv(const State& s, double accel, const Params& p);
Deriv stance_deriv(const State& s, double accel, const Params& p);
Deriv mode_deriv(Mode mode, const State& s, double accel, const Params& p);

/// Leg force along the leg on the body, F = k (r0 - r) + b (r0dot - rdot).
double leg_force(const State& s, const Params& p);

/// Distance to the contact point minus the uncompressed-by-flight leg length.
double touchdown_guard(const State& s);
/// Leg force; liftoff happens when it drops to zero from above.
double liftoff_guard(const State& s, const Params& p);

/// World frame -> contact frame at touchdown. `leg_angle` is measured from
/// vertical, positive with the foot ahead of the body. Velocities pass through.
State touchdown_reset(const State& world, double leg_angle, double ground_y,
                      double tolerance = 1e-8);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Contact frame -> world frame at liftoff (pure translation).
State liftoff_reset(const State& contact, Point2 contact_world);

/// Jacobian of the mode dynamics with respect to (x, y, xdot, ydot, r0, r0dot, rp, u).
using DynamicsJacobian = std::array<std::array<double, kStateDim + 1>, kStateDim>;

DynamicsJacobian flight_jacobian(const State& s, const Params& p);
DynamicsJacobian stance_jacobian(const State& s, const Params& p);
DynamicsJacobian mode_jacobian(Mode mode, const State& s, const Params& p);

/// Structural nonzeros of the mode Jacobian (entries that can ever be nonzero).
using DynamicsMask = std::array<std::array<bool, kStateDim + 1>, kStateDim>;
const DynamicsMask& mode_mask(Mode mode);

/// Partials of leg_force with respect to the seven states.
std::array<double, kStateDim> leg_force_gradient(const State& s, const Params& p);

}  // namespace aslip

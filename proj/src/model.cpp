#include "aslip/model.hpp"

#include <string>

namespace aslip {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameters: return "invalid-parameters";
    case ErrorCode::SingularState: return "singular-state";
    case ErrorCode::InconsistentTouchdown: return "inconsistent-touchdown";
    case ErrorCode::InvalidGrid: return "invalid-grid";
    case ErrorCode::NoEvent: return "no-event";
    case ErrorCode::InfeasibleBounds: return "infeasible-bounds";
    case ErrorCode::InfeasibleSolution: return "infeasible-solution";
    case ErrorCode::InconsistentRetraction: return "inconsistent-retraction";
    case ErrorCode::InvalidPlan: return "invalid-plan";
    case ErrorCode::IntegrationFailure: return "integration-failure";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

void Params::validate() const {
  auto bad = [](const char* name, double v) {
    throw Error(ErrorCode::InvalidParameters, std::string(name) + " = " + std::to_string(v));
  };
  if (!(mass > 0.0)) bad("mass", mass);
  if (!(leg_length > 0.0)) bad("leg_length", leg_length);
  if (!(gravity > 0.0)) bad("gravity", gravity);
  if (!(stiffness > 0.0)) bad("stiffness", stiffness);
  if (!(damping >= 0.0)) bad("damping", damping);
  if (!(max_accel > 0.0)) bad("max_accel", max_accel);
}

double State::leg_radius_rate() const {
  const double r = leg_radius();
  if (r < kSingularRadius) throw Error(ErrorCode::SingularState, "leg radius ~ 0");
  return (x * xdot + y * ydot) / r;
}

bool State::finite() const {
  for (double v : to_array())
    if (!std::isfinite(v)) return false;
  return true;
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::FlightDescent: return "flight-descent";
    case Mode::Stance: return "stance";
    case Mode::FlightAscent: return "flight-ascent";
  }
  return "unknown";
}

Deriv flight_deriv(const State& s, double accel, const Params& p) {
  if (!(p.damping > 0.0))
    throw Error(ErrorCode::InvalidParameters, "flight spring relaxation needs damping > 0");
  Deriv d;
  d.x = s.xdot;
  d.y = s.ydot;
  d.xdot = 0.0;
  d.ydot = -p.gravity;
  d.r0 = s.r0dot;
  d.r0dot = accel;
  d.rp = -(p.stiffness / p.damping) * s.rp;
  return d;
}

double leg_force(const State& s, const Params& p) {
  const double r = s.leg_radius();
  if (r < kSingularRadius) throw Error(ErrorCode::SingularState, "leg radius ~ 0");
  const double rdot = (s.x * s.xdot + s.y * s.ydot) / r;
  return p.stiffness * (s.r0 - r) + p.damping * (s.r0dot - rdot);
}

Deriv stance_deriv(const State& s, double accel, const Params& p) {
  const double r = s.leg_radius();
  if (r < kSingularRadius) throw Error(ErrorCode::SingularState, "leg radius ~ 0");
  const double rdot = (s.x * s.xdot + s.y * s.ydot) / r;
  const double force = p.stiffness * (s.r0 - r) + p.damping * (s.r0dot - rdot);
  Deriv d;
  d.x = s.xdot;
  d.y = s.ydot;
  d.xdot = s.x * force / (p.mass * r);
  d.ydot = s.y * force / (p.mass * r) - p.gravity;
  d.r0 = s.r0dot;
  d.r0dot = accel;
  d.rp = rdot - s.r0dot;
  return d;
}

Deriv mode_deriv(Mode mode, const State& s, double accel, const Params& p) {
  return mode == Mode::Stance ? stance_deriv(s, accel, p) : flight_deriv(s, accel, p);
}

double touchdown_guard(const State& s) { return s.leg_radius() - (s.r0 + s.rp); }

double liftoff_guard(const State& s, const Params& p) { return leg_force(s, p); }

State touchdown_reset(const State& world, double leg_angle, double ground_y, double tolerance) {
  const double length = world.r0 + world.rp;
  const double foot_height = world.y - length * std::cos(leg_angle) - ground_y;
  if (!(std::abs(foot_height) <= tolerance))
    throw Error(ErrorCode::InconsistentTouchdown,
                "foot is " + std::to_string(foot_height) + " above the ground");
  State c = world;
  c.x = -length * std::sin(leg_angle);
  c.y = length * std::cos(leg_angle);
  return c;
}

State liftoff_reset(const State& contact, Point2 contact_world) {
  State w = contact;
  w.x += contact_world.x;
  w.y += contact_world.y;
  return w;
}

std::array<double, kStateDim> leg_force_gradient(const State& s, const Params& p) {
  const double r = s.leg_radius();
  if (r < kSingularRadius) throw Error(ErrorCode::SingularState, "leg radius ~ 0");
  const double rdot = (s.x * s.xdot + s.y * s.ydot) / r;
  const double k = p.stiffness, b = p.damping;
  // d rdot / d(x, y)
  const double rdot_x = (s.xdot - rdot * s.x / r) / r;
  const double rdot_y = (s.ydot - rdot * s.y / r) / r;
  return {-k * s.x / r - b * rdot_x,
          -k * s.y / r - b * rdot_y,
          -b * s.x / r,
          -b * s.y / r,
          k,
          b,
          0.0};
}

namespace {

enum Col { X, Y, XD, YD, R0, R0D, RP, U };

}  // namespace

DynamicsJacobian flight_jacobian(const State& /*s*/, const Params& p) {
  if (!(p.damping > 0.0))
    throw Error(ErrorCode::InvalidParameters, "flight spring relaxation needs damping > 0");
  DynamicsJacobian J{};
  J[X][XD] = 1.0;
  J[Y][YD] = 1.0;
  J[R0][R0D] = 1.0;
  J[R0D][U] = 1.0;
  J[RP][RP] = -p.stiffness / p.damping;
  return J;
}

DynamicsJacobian stance_jacobian(const State& s, const Params& p) {
  const double r = s.leg_radius();
  if (r < kSingularRadius) throw Error(ErrorCode::SingularState, "leg radius ~ 0");
  const double rdot = (s.x * s.xdot + s.y * s.ydot) / r;
  const double force = p.stiffness * (s.r0 - r) + p.damping * (s.r0dot - rdot);
  const auto dF = leg_force_gradient(s, p);
  const double r_x = s.x / r, r_y = s.y / r;
  const double mr = p.mass * r;

  DynamicsJacobian J{};
  J[X][XD] = 1.0;
  J[Y][YD] = 1.0;
  J[R0][R0D] = 1.0;
  J[R0D][U] = 1.0;

  // a = (x, y) F / (m r)
  const double q = force / mr;
  const double q_x = dF[X] / mr - force * r_x / (mr * r);
  const double q_y = dF[Y] / mr - force * r_y / (mr * r);
  J[XD][X] = q + s.x * q_x;
  J[XD][Y] = s.x * q_y;
  J[YD][X] = s.y * q_x;
  J[YD][Y] = q + s.y * q_y;
  for (int c : {XD, YD, R0, R0D}) {
    J[XD][c] = s.x * dF[c] / mr;
    J[YD][c] = s.y * dF[c] / mr;
  }

  // rp slot follows rdot - r0dot
  J[RP][X] = (s.xdot - rdot * r_x) / r;
  J[RP][Y] = (s.ydot - rdot * r_y) / r;
  J[RP][XD] = r_x;
  J[RP][YD] = r_y;
  J[RP][R0D] = -1.0;
  return J;
}

DynamicsJacobian mode_jacobian(Mode mode, const State& s, const Params& p) {
  return mode == Mode::Stance ? stance_jacobian(s, p) : flight_jacobian(s, p);
}

const DynamicsMask& mode_mask(Mode mode) {
  static const DynamicsMask flight = [] {
    DynamicsMask m{};
    m[X][XD] = m[Y][YD] = m[R0][R0D] = m[R0D][U] = m[RP][RP] = true;
    return m;
  }();
  static const DynamicsMask stance = [] {
    DynamicsMask m{};
    m[X][XD] = m[Y][YD] = m[R0][R0D] = m[R0D][U] = true;
    for (int c : {X, Y, XD, YD, R0, R0D}) m[XD][c] = m[YD][c] = true;
    for (int c : {X, Y, XD, YD, R0D}) m[RP][c] = true;
    return m;
  }();
  return mode == Mode::Stance ? stance : flight;
}

}  // namespace aslip

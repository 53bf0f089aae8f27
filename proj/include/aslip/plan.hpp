#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aslip/model.hpp"

namespace aslip {

/// Leg touches down at a fixed horizontal world location.
struct FixedTarget {
  double target_x = 0.0;
};

/// Touchdown angle as a function of time since the initial apex, linearly
/// interpolated between (time, angle) pairs and clamped outside them.
struct AngleSchedule {
  std::vector<double> times;
  std::vector<double> angles;
};

using TouchdownPolicy = std::variant<FixedTarget, AngleSchedule>;

/// Boundary apex conditions a plan was generated for (world frame).
struct ApexTask {
  double y0 = 1.1;
  double xd0 = 0.8;
  double yf = 1.1;
  double xdf = 0.8;

  bool operator==(const ApexTask&) const = default;
};

/// Open-loop plan: piecewise-linear set-point acceleration U over knot times T,
/// initial set-point conditions, and a touchdown policy.
struct MotionPlan {
  std::vector<double> times;
  std::vector<double> accels;
  double r0_init = 1.0;
  double r0dot_init = 0.0;
  TouchdownPolicy policy = FixedTarget{};
  double horizon = 0.0;
  Params params;
  std::optional<ApexTask> task;

  /// Throws InvalidPlan unless the knot grid, acceleration limits, and the
  /// densely sampled set-point range (within `setpoint_tolerance`) are valid.
  void validate(double setpoint_tolerance = 1e-3) const;
};

struct SetPoint {
  double r0 = 0.0;
  double r0dot = 0.0;
};

/// Exact double integral of the piecewise-linear acceleration. Outside
/// [0, horizon] the end segments are extrapolated.
SetPoint eval_setpoint(const MotionPlan& plan, double t);

/// Commanded set-point acceleration at `t` (linear interpolation of the knots).
double eval_accel(const MotionPlan& plan, double t);

/// Touchdown leg angle from vertical (positive: foot ahead). Returns nullopt when
/// the body is at or below the ground, where the geometry is degenerate.
std::optional<double> leg_angle(const TouchdownPolicy& policy, const State& body_world, double t,
                                double ground_y);

inline constexpr int kPlanFormatVersion = 1;

nlohmann::json to_json(const MotionPlan& plan);
/// Throws InvalidPlan on schema violations.
MotionPlan plan_from_json(const nlohmann::json& doc);

void save_plan(const MotionPlan& plan, const std::filesystem::path& path);
MotionPlan load_plan(const std::filesystem::path& path);

nlohmann::json to_json(const Params& p);
Params params_from_json(const nlohmann::json& doc);

}  // namespace aslip

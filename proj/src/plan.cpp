#include "aslip/plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aslip/linking.hpp"

namespace aslip {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidPlan, what); }

}  // namespace

void MotionPlan::validate(double setpoint_tolerance) const {
  params.validate();
  if (times.size() < 2 || times.size() != accels.size())
    invalid("need at least two knots with one acceleration each");
  if (times.front() != 0.0) invalid("first knot must be at t = 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) invalid("knot times must be strictly increasing");
  if (!(std::abs(times.back() - horizon) <= 1e-12 * std::max(1.0, horizon)))
    invalid("last knot must equal the horizon");
  const double amax = params.max_accel * (1.0 + 1e-6);
  for (double a : accels)
    if (!(std::abs(a) <= amax)) invalid("acceleration " + std::to_string(a) + " exceeds limit");
  if (const auto* sched = std::get_if<AngleSchedule>(&policy)) {
    if (sched->times.empty() || sched->times.size() != sched->angles.size())
      invalid("angle schedule needs matching, nonempty times and angles");
    for (std::size_t i = 1; i < sched->times.size(); ++i)
      if (!(sched->times[i] > sched->times[i - 1])) invalid("schedule times must increase");
  }

  const double lo = params.min_setpoint() - setpoint_tolerance;
  const double hi = params.max_setpoint() + setpoint_tolerance;
  constexpr int kSamplesPerSegment = 16;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    for (int j = 0; j <= kSamplesPerSegment; ++j) {
      const double t = times[i] + (times[i + 1] - times[i]) * j / kSamplesPerSegment;
      const double r0 = eval_setpoint(*this, t).r0;
      if (r0 < lo || r0 > hi)
        invalid("set point " + std::to_string(r0) + " leaves its range at t = " + std::to_string(t));
    }
  }
}

SetPoint eval_setpoint(const MotionPlan& plan, double t) {
  const auto& T = plan.times;
  const auto& U = plan.accels;
  const std::size_t seg = segment_index(T, t);
  double r = plan.r0_init, v = plan.r0dot_init;
  // Integrate whole segments up to the one holding t.
  for (std::size_t i = 0; i < seg; ++i) {
    const double h = T[i + 1] - T[i];
    const double s = (U[i + 1] - U[i]) / h;
    r += v * h + U[i] * h * h / 2.0 + s * h * h * h / 6.0;
    v += U[i] * h + s * h * h / 2.0;
  }
  const double s = (U[seg + 1] - U[seg]) / (T[seg + 1] - T[seg]);
  const double tau = t - T[seg];
  return {r + v * tau + U[seg] * tau * tau / 2.0 + s * tau * tau * tau / 6.0,
          v + U[seg] * tau + s * tau * tau / 2.0};
}

double eval_accel(const MotionPlan& plan, double t) { return lin_interp(plan.times, plan.accels, t); }

std::optional<double> leg_angle(const TouchdownPolicy& policy, const State& body_world, double t,
                                double ground_y) {
  const double height = body_world.y - ground_y;
  if (!(height > 0.0)) return std::nullopt;
  if (const auto* fixed = std::get_if<FixedTarget>(&policy))
    return std::atan2(fixed->target_x - body_world.x, height);
  const auto& sched = std::get<AngleSchedule>(policy);
  if (sched.times.size() == 1 || t <= sched.times.front()) return sched.angles.front();
  if (t >= sched.times.back()) return sched.angles.back();
  return lin_interp(sched.times, sched.angles, t);
}

json to_json(const Params& p) {
  return json{{"mass", p.mass},           {"leg_length", p.leg_length}, {"gravity", p.gravity},
              {"stiffness", p.stiffness}, {"damping", p.damping},       {"max_accel", p.max_accel}};
}

Params params_from_json(const json& doc) {
  Params p;
  p.mass = doc.value("mass", p.mass);
  p.leg_length = doc.value("leg_length", p.leg_length);
  p.gravity = doc.value("gravity", p.gravity);
  p.stiffness = doc.value("stiffness", p.stiffness);
  p.damping = doc.value("damping", p.damping);
  p.max_accel = doc.value("max_accel", p.max_accel);
  p.validate();
  return p;
}

json to_json(const MotionPlan& plan) {
  json doc;
  doc["format"] = "aslip-motion-plan";
  doc["version"] = kPlanFormatVersion;
  doc["times"] = plan.times;
  doc["accels"] = plan.accels;
  doc["r0_init"] = plan.r0_init;
  doc["r0dot_init"] = plan.r0dot_init;
  if (const auto* fixed = std::get_if<FixedTarget>(&plan.policy)) {
    doc["policy"] = {{"type", "fixed_target"}, {"target_x", fixed->target_x}};
  } else {
    const auto& sched = std::get<AngleSchedule>(plan.policy);
    doc["policy"] = {{"type", "angle_schedule"}, {"times", sched.times}, {"angles", sched.angles}};
  }
  doc["horizon"] = plan.horizon;
  doc["params"] = to_json(plan.params);
  if (plan.task) {
    doc["task"] = {{"y0", plan.task->y0},
                   {"xd0", plan.task->xd0},
                   {"yf", plan.task->yf},
                   {"xdf", plan.task->xdf}};
  }
  return doc;
}

MotionPlan plan_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string{}) != "aslip-motion-plan") invalid("not a motion plan");
    const int version = doc.at("version").get<int>();
    if (version != kPlanFormatVersion) invalid("unsupported plan version " + std::to_string(version));
    MotionPlan plan;
    plan.times = doc.at("times").get<std::vector<double>>();
    plan.accels = doc.at("accels").get<std::vector<double>>();
    plan.r0_init = doc.at("r0_init").get<double>();
    plan.r0dot_init = doc.at("r0dot_init").get<double>();
    const auto& pol = doc.at("policy");
    const auto type = pol.at("type").get<std::string>();
    if (type == "fixed_target") {
      plan.policy = FixedTarget{pol.at("target_x").get<double>()};
    } else if (type == "angle_schedule") {
      plan.policy = AngleSchedule{pol.at("times").get<std::vector<double>>(),
                                  pol.at("angles").get<std::vector<double>>()};
    } else {
      invalid("unknown policy type '" + type + "'");
    }
    plan.horizon = doc.at("horizon").get<double>();
    plan.params = params_from_json(doc.at("params"));
    if (doc.contains("task")) {
      const auto& t = doc.at("task");
      plan.task = ApexTask{t.at("y0").get<double>(), t.at("xd0").get<double>(),
                           t.at("yf").get<double>(), t.at("xdf").get<double>()};
    }
    return plan;
  } catch (const json::exception& e) {
    invalid(e.what());
  }
}

void save_plan(const MotionPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(plan).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

MotionPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return plan_from_json(doc);
}

}  // namespace aslip

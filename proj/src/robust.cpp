#include "aslip/robust.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "aslip/error.hpp"
#include "aslip/linking.hpp"

namespace aslip {

void DisturbanceSet::validate() const {
  if (offsets.empty()) throw Error(ErrorCode::InvalidParameters, "disturbance set is empty");
  std::set<double> seen;
  for (double d : offsets) {
    if (!std::isfinite(d)) throw Error(ErrorCode::InvalidParameters, "disturbance offsets must be finite");
    if (!seen.insert(d).second)
      throw Error(ErrorCode::InvalidParameters, "duplicate disturbance offset " + std::to_string(d));
  }
  nominal_index();
}

int DisturbanceSet::nominal_index() const {
  const auto it = std::find(offsets.begin(), offsets.end(), 0.0);
  if (it == offsets.end()) throw Error(ErrorCode::InvalidParameters, "disturbance set must contain 0");
  return static_cast<int>(it - offsets.begin());
}

CollocationProblem build_robust(const RobustTask& task, const Params& p) {
  task.disturbances.validate();
  if (task.grid_points < 2) throw Error(ErrorCode::InvalidParameters, "control grid needs at least two points");
  if (!(task.regularization >= 0.0)) throw Error(ErrorCode::InvalidParameters, "regularization must be >= 0");
  TranscriptionSpec spec;
  spec.bc = task.bc;
  spec.params = p;
  spec.phases = task.phases;
  spec.ground_offsets = task.disturbances.offsets;
  spec.grid_points = task.grid_points;
  spec.input_continuity = false;
  spec.effort_weight = task.regularization;
  return CollocationProblem(std::move(spec));
}

namespace {

// Node times and inputs of case 0 of a single-case solution, with duplicate join nodes dropped.
void nominal_input(const CollocationProblem& nominal, std::span<const double> x, std::vector<double>& t,
                   std::vector<double>& u) {
  const auto& L = nominal.layout();
  for (int ph = 0; ph < 3; ++ph)
    for (int k = (ph == 0 ? 0 : 1); k < L.nodes(ph); ++k) {
      t.push_back(nominal.node_time(x, 0, ph, k));
      u.push_back(nominal.node_input(x, 0, ph, k));
    }
}

}  // namespace

std::vector<double> robust_warm_start(const CollocationProblem& robust, const CollocationProblem& nominal,
                                      std::span<const double> xn) {
  const auto& L = robust.layout();
  const auto& N = nominal.layout();
  if (N.num_cases() != 1 || L.grid_points() < 2)
    throw Error(ErrorCode::InvalidParameters, "warm start needs a single-case nominal and a gridded robust problem");
  for (int ph = 0; ph < 3; ++ph)
    if (L.nodes(ph) != N.nodes(ph)) throw Error(ErrorCode::InvalidParameters, "phase node counts differ");

  const Params& p = robust.spec().params;
  const auto& bc = robust.spec().bc;
  const double g = p.gravity;
  const State td = nominal.node_state(xn, 0, 0, N.nodes(0) - 1);
  const double tau_stance = nominal.duration(xn, 0, 1), tau_ascent = nominal.duration(xn, 0, 2);

  // Per-case descent durations for ballistic fall to the nominal touchdown point.
  std::vector<double> descent(L.num_cases());
  double horizon = 0.0;
  for (int c = 0; c < L.num_cases(); ++c) {
    const double drop = bc.y0 - robust.spec().ground_offsets[c] - td.y;
    descent[c] = std::max(std::sqrt(2.0 * std::max(drop, 0.0) / g), kMinNodeSpacing * (L.nodes(0) - 1));
    horizon = std::max(horizon, descent[c] + tau_stance + tau_ascent);
  }

  // Shared grid sampled from the nominal input.
  std::vector<double> tn, un;
  nominal_input(nominal, xn, tn, un);
  ControlGrid grid;
  grid.horizon = horizon;
  grid.values.resize(L.grid_points());
  const auto T = grid.times();
  for (int j = 0; j < L.grid_points(); ++j)
    grid.values[j] = std::clamp(lin_interp(tn, un, std::min(T[j], tn.back())), -p.max_accel, p.max_accel);

  MotionPlan setpoint;
  setpoint.times = T;
  setpoint.accels = grid.values;
  setpoint.horizon = horizon;
  setpoint.params = p;
  const State s0 = nominal.node_state(xn, 0, 0, 0);
  setpoint.r0_init = s0.r0;
  setpoint.r0dot_init = s0.r0dot;

  std::vector<double> x(L.num_variables(), 0.0);
  for (int c = 0; c < L.num_cases(); ++c) {
    const std::array<double, 3> dur{descent[c], tau_stance, tau_ascent};
    for (int ph = 0; ph < 3; ++ph) x[L.duration_index(c, ph)] = dur[ph];
    for (int ph = 0; ph < 3; ++ph) {
      const int n = L.nodes(ph);
      for (int k = 0; k < n; ++k) {
        const double t = robust.node_time(x, c, ph, k);
        State s;
        if (ph == 0) {
          const double back = dur[0] - dur[0] * k / (n - 1);
          s = td;
          s.x = td.x - bc.xd0 * back;
          s.y = td.y + std::sqrt(2.0 * g * std::max(bc.y0 - robust.spec().ground_offsets[c] - td.y, 0.0)) * back -
                g * back * back / 2;
          s.xdot = bc.xd0;
          s.ydot = -g * (dur[0] - back);
          s.rp = 0.0;
        } else {
          s = nominal.node_state(xn, 0, ph, k);
        }
        const SetPoint sp = eval_setpoint(setpoint, std::min(t, horizon));
        s.r0 = std::clamp(sp.r0, p.min_setpoint(), p.max_setpoint());
        s.r0dot = sp.r0dot;
        robust.set_node(x, c, ph, k, s, grid.value_at(t));
      }
    }
  }
  for (int j = 0; j < L.grid_points(); ++j) x[L.grid_value_index(j)] = grid.values[j];
  x[L.horizon_index()] = horizon;
  return x;
}

std::vector<TouchdownSample> case_touchdowns(const CollocationProblem& robust, std::span<const double> x) {
  const auto& L = robust.layout();
  std::vector<TouchdownSample> out;
  for (int c = 0; c < L.num_cases(); ++c) {
    const State td = robust.node_state(x, c, 0, L.nodes(0) - 1);
    out.push_back({robust.duration(x, c, 0), std::atan2(-td.x, td.y), robust.spec().ground_offsets[c]});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

MotionPlan extract_robust_plan(const CollocationProblem& robust, std::span<const double> x, double tol) {
  const auto& L = robust.layout();
  if (L.grid_points() < 2) throw Error(ErrorCode::InvalidParameters, "extract_robust_plan expects a control grid");
  if (static_cast<int>(x.size()) != robust.num_variables())
    throw Error(ErrorCode::InvalidParameters, "solution has the wrong size");
  const double viol = constraint_violation(robust, x);
  if (!(viol <= tol))
    throw Error(ErrorCode::InfeasibleSolution, "solution violates constraints by " + std::to_string(viol));

  const Params& p = robust.spec().params;
  ControlGrid grid;
  grid.horizon = x[L.horizon_index()];
  for (int j = 0; j < L.grid_points(); ++j)
    grid.values.push_back(std::clamp(x[L.grid_value_index(j)], -p.max_accel, p.max_accel));

  AngleSchedule schedule;
  for (const auto& s : case_touchdowns(robust, x)) {
    if (!schedule.times.empty() && s.time == schedule.times.back()) {
      if (s.angle != schedule.angles.back())
        throw Error(ErrorCode::InconsistentRetraction,
                    "two cases touch down at t = " + std::to_string(s.time) + " with different angles");
      continue;
    }
    schedule.times.push_back(s.time);
    schedule.angles.push_back(s.angle);
  }

  MotionPlan plan;
  plan.times = grid.times();
  plan.accels = grid.values;
  plan.horizon = grid.horizon;
  const State s0 = robust.node_state(x, 0, 0, 0);
  plan.r0_init = s0.r0;
  plan.r0dot_init = s0.r0dot;
  plan.policy = std::move(schedule);
  plan.params = p;
  plan.task = robust.spec().bc;
  return plan;
}

RobustPlanSolve plan_robust(const RobustTask& task, const Params& p, const SolverOptions& options) {
  RobustPlanSolve out;
  CollocationProblem robust = build_robust(task, p);
  out.nominal = plan_min_effort(task.bc, p, task.phases, options);
  if (!out.nominal.result.success()) {
    out.result = out.nominal.result;
    out.result.message = "min-effort warm start failed: " + out.result.message;
    return out;
  }
  const CollocationProblem nominal = build_min_effort(task.bc, p, task.phases);
  robust.set_initial_point(robust_warm_start(robust, nominal, out.nominal.result.x));
  out.result = solve(robust, options);
  if (out.result.success()) out.plan = extract_robust_plan(robust, out.result.x, options.constraint_tol);
  return out;
}

}  // namespace aslip

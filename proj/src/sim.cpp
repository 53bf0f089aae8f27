#include "aslip/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace aslip {

namespace {

using Vec5 = std::array<double, 5>;
enum { X, Y, XD, YD, RP };

State full_state(const Vec5& v, SetPoint sp) {
  return {v[X], v[Y], v[XD], v[YD], sp.r0, sp.r0dot, v[RP]};
}

Vec5 pack(const State& s) { return {s.x, s.y, s.xdot, s.ydot, s.rp}; }

Vec5 pack(const Deriv& d) { return {d.x, d.y, d.xdot, d.ydot, d.rp}; }

struct Guard {
  EventKind kind;
  bool fall;
  std::function<double(double, const Vec5&)> value;
  // Guards that start at (or below) zero only fire after exceeding this level.
  double arm_level = 0.0;
};

struct PhaseResult {
  bool timed_out = false;
  double t = 0.0;
  Vec5 y{};
  const Guard* guard = nullptr;
};

class StepRunner {
 public:
  StepRunner(const MotionPlan& plan, const SimConfig& cfg, SimOutcome& out)
      : plan_(plan), cfg_(cfg), out_(out) {}

  PhaseResult run(std::function<Vec5(double, const Vec5&)> rhs, double t0, const Vec5& y0,
                  const std::vector<Guard>& guards, std::vector<DenseStep<5>>* record) {
    OdeTolerances tol{cfg_.abs_tol, cfg_.rel_tol, cfg_.max_step};
    DormandPrince<5> ode(std::move(rhs), tol);
    ode.reset(t0, y0);

    std::vector<double> prev(guards.size());
    std::vector<bool> armed(guards.size());
    for (std::size_t i = 0; i < guards.size(); ++i) {
      prev[i] = guards[i].value(t0, y0);
      armed[i] = prev[i] > guards[i].arm_level;
    }

    for (;;) {
      if (ode.time() >= cfg_.max_time) return {true, ode.time(), ode.state(), nullptr};
      const DenseStep<5> step = ode.step(cfg_.max_time);
      if (record) record->push_back(step);
      check_setpoint(step.t1());

      PhaseResult best;
      bool found = false;
      for (std::size_t i = 0; i < guards.size(); ++i) {
        const double g = guards[i].value(step.t1(), ode.state());
        if (armed[i] && prev[i] > 0.0 && g <= 0.0) {
          auto [t, y] = locate_event(step, guards[i].value, cfg_.event_tol);
          // Earliest root wins; exact ties go to fall events.
          if (!found || t < best.t || (t == best.t && guards[i].fall && !best.guard->fall)) {
            best = {false, t, y, &guards[i]};
            found = true;
          }
        }
        if (!armed[i] && g > guards[i].arm_level) armed[i] = true;
        prev[i] = g;
      }
      if (found) return best;
    }
  }

 private:
  void check_setpoint(double t) {
    if (!horizon_flagged_ && t > plan_.horizon) {
      horizon_flagged_ = true;
      out_.diagnostics.push_back("set point extrapolated beyond plan horizon at t = " +
                                 std::to_string(t));
    }
    if (!range_flagged_) {
      const double r0 = eval_setpoint(plan_, t).r0;
      const auto& p = plan_.params;
      if (r0 < p.min_setpoint() - 1e-9 || r0 > p.max_setpoint() + 1e-9) {
        range_flagged_ = true;
        out_.diagnostics.push_back("set point " + std::to_string(r0) +
                                   " outside its range at t = " + std::to_string(t));
      }
    }
  }

  const MotionPlan& plan_;
  const SimConfig& cfg_;
  SimOutcome& out_;
  bool horizon_flagged_ = false;
  bool range_flagged_ = false;
};

}  // namespace

void SimConfig::validate() const {
  if (!(abs_tol > 0 && rel_tol > 0 && event_tol > 0 && max_time > 0 && max_step > 0))
    throw Error(ErrorCode::InvalidParameters, "simulation tolerances must be positive");
}

std::string_view to_string(SimStatus status) {
  switch (status) {
    case SimStatus::ApexReached: return "apex-reached";
    case SimStatus::FellInStance: return "fell-in-stance";
    case SimStatus::FellInFlight: return "fell-in-flight";
    case SimStatus::NegativeLiftoff: return "negative-liftoff";
    case SimStatus::Timeout: return "timeout";
  }
  return "unknown";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Touchdown: return "touchdown";
    case EventKind::Liftoff: return "liftoff";
    case EventKind::Apex: return "apex";
    case EventKind::GroundContact: return "ground-contact";
    case EventKind::Recontact: return "recontact";
  }
  return "unknown";
}

bool is_failure(SimStatus status) { return status != SimStatus::ApexReached; }

State apex_state(const MotionPlan& plan, double y0, double xd0) {
  return {0.0, y0, xd0, 0.0, plan.r0_init, plan.r0dot_init, 0.0};
}

SimOutcome simulate_step(const MotionPlan& plan, const State& apex, double ground_y,
                         const SimConfig& config, SimTrace* trace) {
  config.validate();
  plan.params.validate();
  const Params& p = plan.params;
  SimOutcome out;
  StepRunner runner(plan, config, out);
  auto setpoint = [&plan](double t) { return eval_setpoint(plan, t); };
  auto accel = [&plan](double t) { return eval_accel(plan, t); };

  if (trace) {
    trace->arcs_.clear();
    trace->plan_ = plan;
  }
  auto begin_arc = [&](Mode mode, Point2 origin) -> std::vector<DenseStep<5>>* {
    if (!trace) return nullptr;
    trace->arcs_.push_back({mode, origin, {}, 0.0});
    return &trace->arcs_.back().steps;
  };
  auto close_arc = [&](double t) {
    if (trace) trace->arcs_.back().t_end = t;
  };
  auto log = [&](double t, EventKind kind, const State& world) {
    out.events.push_back({t, kind, world});
  };

  const double t0 = 0.0;
  Vec5 y0 = pack(apex);

  // Descending flight, world frame.
  auto flight_rhs = [&](double t, const Vec5& v) {
    return pack(flight_deriv(full_state(v, setpoint(t)), accel(t), p));
  };
  auto foot_height = [&](double t, const Vec5& v) {
    const State s = full_state(v, setpoint(t));
    const auto angle = leg_angle(plan.policy, s, t, ground_y);
    if (!angle) return -1.0;
    return s.y - (s.r0 + s.rp) * std::cos(*angle) - ground_y;
  };
  std::vector<Guard> descent_guards{
      {EventKind::Touchdown, false, foot_height},
      {EventKind::GroundContact, true, [&](double, const Vec5& v) { return v[Y] - ground_y; }},
  };
  if (foot_height(t0, y0) <= 0.0) {
    out.status = SimStatus::FellInFlight;
    out.diagnostics.push_back("leg starts at or below the ground");
    log(t0, EventKind::GroundContact, full_state(y0, setpoint(t0)));
    return out;
  }
  auto* rec = begin_arc(Mode::FlightDescent, {0.0, 0.0});
  PhaseResult r = runner.run(flight_rhs, t0, y0, descent_guards, rec);
  close_arc(r.t);
  if (r.timed_out) {
    out.status = SimStatus::Timeout;
    return out;
  }
  State world = full_state(r.y, setpoint(r.t));
  if (r.guard->kind != EventKind::Touchdown) {
    log(r.t, r.guard->kind, world);
    out.status = SimStatus::FellInFlight;
    return out;
  }
  const double phi = *leg_angle(plan.policy, world, r.t, ground_y);
  const double length = world.r0 + world.rp;
  const Point2 contact{world.x + length * std::sin(phi), ground_y};
  const State td = touchdown_reset(world, phi, ground_y, std::max(1e-8, 100.0 * config.event_tol));
  log(r.t, EventKind::Touchdown, world);
  out.touchdown_angle = phi;
  out.contact_point = contact;

  // Stance, contact frame.
  auto stance_rhs = [&](double t, const Vec5& v) {
    return pack(stance_deriv(full_state(v, setpoint(t)), accel(t), p));
  };
  std::vector<Guard> stance_guards{
      {EventKind::Liftoff, false,
       [&](double t, const Vec5& v) { return leg_force(full_state(v, setpoint(t)), p); }},
      {EventKind::GroundContact, true, [](double, const Vec5& v) { return v[Y]; }},
  };
  rec = begin_arc(Mode::Stance, contact);
  r = runner.run(stance_rhs, r.t, pack(td), stance_guards, rec);
  close_arc(r.t);
  if (r.timed_out) {
    out.status = SimStatus::Timeout;
    return out;
  }
  world = liftoff_reset(full_state(r.y, setpoint(r.t)), contact);
  log(r.t, r.guard->kind, world);
  if (r.guard->kind != EventKind::Liftoff) {
    out.status = SimStatus::FellInStance;
    return out;
  }
  if (world.ydot <= 0.0) {
    out.status = SimStatus::NegativeLiftoff;
    return out;
  }

  // Ascending flight, world frame.
  std::vector<Guard> ascent_guards{
      {EventKind::Apex, false, [](double, const Vec5& v) { return v[YD]; }},
      {EventKind::GroundContact, true, [&](double, const Vec5& v) { return v[Y] - ground_y; }},
      {EventKind::Recontact, true,
       [&](double t, const Vec5& v) {
         const SetPoint sp = setpoint(t);
         return std::hypot(v[X] - contact.x, v[Y] - contact.y) - (sp.r0 + v[RP]);
       },
       1e3 * config.event_tol},
  };
  rec = begin_arc(Mode::FlightAscent, {0.0, 0.0});
  r = runner.run(flight_rhs, r.t, pack(world), ascent_guards, rec);
  close_arc(r.t);
  if (r.timed_out) {
    out.status = SimStatus::Timeout;
    return out;
  }
  world = full_state(r.y, setpoint(r.t));
  log(r.t, r.guard->kind, world);
  if (r.guard->kind == EventKind::Apex) {
    out.status = SimStatus::ApexReached;
    out.apex = world;
  } else {
    out.status = SimStatus::FellInFlight;
  }
  return out;
}

// ---------------------------------------------------------------------------

const SimTrace::Arc* SimTrace::find(double t, const DenseStep<5>** step) const {
  for (const auto& arc : arcs_) {
    if (arc.steps.empty()) continue;
    if (t < arc.steps.front().t0 || t > arc.t_end) continue;
    auto it = std::lower_bound(arc.steps.begin(), arc.steps.end(), t,
                               [](const DenseStep<5>& s, double v) { return s.t1() < v; });
    if (it == arc.steps.end()) it = std::prev(arc.steps.end());
    *step = &*it;
    return &arc;
  }
  return nullptr;
}

State SimTrace::make_state(const Arc& arc, const DenseStep<5>& step, double t) const {
  State s = full_state(step(t), eval_setpoint(plan_, t));
  s.x += arc.origin.x;
  s.y += arc.origin.y;
  return s;
}

std::optional<State> SimTrace::state_at(double t) const {
  const DenseStep<5>* step = nullptr;
  const Arc* arc = find(t, &step);
  if (!arc) return std::nullopt;
  return make_state(*arc, *step, t);
}

std::optional<State> SimTrace::state_at(double t, Point2 origin) const {
  auto s = state_at(t);
  if (s) {
    s->x -= origin.x;
    s->y -= origin.y;
  }
  return s;
}

std::optional<Mode> SimTrace::mode_at(double t) const {
  const DenseStep<5>* step = nullptr;
  const Arc* arc = find(t, &step);
  if (!arc) return std::nullopt;
  return arc->mode;
}

double SimTrace::begin() const { return arcs_.empty() ? 0.0 : arcs_.front().steps.front().t0; }

double SimTrace::end() const {
  return arcs_.empty() ? 0.0 : arcs_.back().t_end;
}

std::vector<SimTrace::Sample> SimTrace::sample(double dt) const {
  std::vector<Sample> out;
  for (const Arc& arc : arcs_) {
    if (arc.steps.empty()) continue;
    const double ta = arc.steps.front().t0;
    const double tb = arc.t_end;
    auto emit = [&](double t) {
      const DenseStep<5>* step = nullptr;
      auto it = std::lower_bound(arc.steps.begin(), arc.steps.end(), t,
                                 [](const DenseStep<5>& s, double v) { return s.t1() < v; });
      if (it == arc.steps.end()) it = std::prev(arc.steps.end());
      step = &*it;
      Sample s{t, arc.mode, make_state(arc, *step, t), 0.0};
      if (arc.mode == Mode::Stance) {
        State local = s.world;
        local.x -= arc.origin.x;
        local.y -= arc.origin.y;
        s.force = leg_force(local, plan_.params);
      }
      out.push_back(s);
    };
    for (double t = ta; t < tb; t += dt) emit(t);
    emit(tb);
  }
  return out;
}

}  // namespace aslip

#include "aslip/collocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aslip/error.hpp"
#include "aslip/linking.hpp"
#include "aslip/sim.hpp"

namespace aslip {

PhaseSet make_phases(int descent, int stance, int ascent) {
  return {PhaseSpec{Mode::FlightDescent, descent}, PhaseSpec{Mode::Stance, stance},
          PhaseSpec{Mode::FlightAscent, ascent}};
}

void validate_phases(const PhaseSet& phases) {
  if (phases[0].mode != Mode::FlightDescent || phases[1].mode != Mode::Stance || phases[2].mode != Mode::FlightAscent)
    throw Error(ErrorCode::InvalidParameters, "phases must be descent, stance, ascent");
  for (const auto& ph : phases)
    if (ph.nodes < 2) throw Error(ErrorCode::InvalidParameters, "every phase needs at least two nodes");
}

void validate_boundary(const BoundaryConditions& bc, const Params& p, double ground_offset) {
  if (!std::isfinite(bc.y0) || !std::isfinite(bc.xd0) || !std::isfinite(bc.yf) || !std::isfinite(bc.xdf))
    throw Error(ErrorCode::InvalidParameters, "boundary conditions must be finite");
  const double lo = p.min_setpoint();
  if (!(bc.y0 - ground_offset > lo) || !(bc.yf - ground_offset > lo))
    throw Error(ErrorCode::InfeasibleBounds,
                "apex height above ground must exceed the minimum set point " + std::to_string(lo));
}

TrapezoidDefect trapezoid_defect(const State& xk, double uk, const State& xk1, double uk1, double h, Mode mode,
                                 const Params& p) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidParameters, "node spacing must be positive");
  const auto fk = mode_deriv(mode, xk, uk, p).to_array();
  const auto fk1 = mode_deriv(mode, xk1, uk1, p).to_array();
  const auto ak = mode_jacobian(mode, xk, p);
  const auto ak1 = mode_jacobian(mode, xk1, p);
  const auto a = xk.to_array(), b = xk1.to_array();

  TrapezoidDefect d;
  for (int i = 0; i < kStateDim; ++i) {
    d.residual[i] = b[i] - a[i] - 0.5 * h * (fk[i] + fk1[i]);
    d.d_h[i] = -0.5 * (fk[i] + fk1[i]);
    for (int j = 0; j <= kStateDim; ++j) {
      d.d_left[i][j] = -0.5 * h * ak[i][j];
      d.d_right[i][j] = -0.5 * h * ak1[i][j];
    }
    d.d_left[i][i] -= 1.0;
    d.d_right[i][i] += 1.0;
  }
  return d;
}

EffortValue objective_effort(std::span<const std::vector<double>> inputs, std::span<const double> spacings) {
  if (inputs.size() != spacings.size()) throw Error(ErrorCode::InvalidParameters, "one spacing per phase expected");
  EffortValue out;
  out.d_inputs.resize(inputs.size());
  out.d_spacings.assign(spacings.size(), 0.0);
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const auto& u = inputs[p];
    const double h = spacings[p];
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidParameters, "node spacing must be positive");
    out.d_inputs[p].assign(u.size(), 0.0);
    if (u.size() < 2) continue;
    double sum = 0.0;  // sum of trapezoid weights * u^2 with unit spacing
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double w = (k == 0 || k + 1 == u.size()) ? 0.5 : 1.0;
      sum += w * u[k] * u[k];
      out.d_inputs[p][k] = 2.0 * w * h * u[k];
    }
    out.value += h * sum;
    out.d_spacings[p] = sum;
  }
  return out;
}

// ---------------------------------------------------------------------------

DecisionLayout::DecisionLayout(const PhaseSet& phases, int cases, int grid_points)
    : phases_(phases), cases_(cases), grid_points_(grid_points) {
  validate_phases(phases);
  if (cases < 1) throw Error(ErrorCode::InvalidParameters, "at least one case required");
  if (grid_points != 0 && grid_points < 2) throw Error(ErrorCode::InvalidParameters, "control grid needs >= 2 points");
  int offset = 0;
  for (int p = 0; p < 3; ++p) {
    phase_offset_[p] = offset;
    offset += phases[p].nodes * kNodeVars;
    total_nodes_ += phases[p].nodes;
  }
  case_size_ = offset + 3;
}

int DecisionLayout::grid_value_index(int j) const {
  if (grid_points_ == 0 || j < 0 || j >= grid_points_) throw Error(ErrorCode::InvalidParameters, "no such grid point");
  return cases_ * case_size_ + j;
}

int DecisionLayout::horizon_index() const {
  if (grid_points_ == 0) throw Error(ErrorCode::InvalidParameters, "problem has no control grid");
  return cases_ * case_size_ + grid_points_;
}

ProblemSize problem_size(const TranscriptionSpec& s) {
  const int C = static_cast<int>(s.ground_offsets.size());
  const int N = s.phases[0].nodes + s.phases[1].nodes + s.phases[2].nodes;
  const int m = s.grid_points;
  ProblemSize out;
  out.variables = C * (8 * N + 3) + (m > 0 ? m + 1 : 0);
  int per_case = 7 * (N - 3) + 14 + 2 + 7;
  if (s.input_continuity) per_case += 2;
  if (m > 0) per_case += N + 1;
  out.constraints = C * per_case + 2 * (C - 1);
  return out;
}

// ---------------------------------------------------------------------------

// Receives rows in a fixed order. In pattern mode it records the structure and
// bounds; otherwise it writes constraint values and/or Jacobian values.
struct CollocationProblem::Sink {
  std::span<double> g;
  std::span<double> jac;
  std::vector<JacobianEntry>* pattern = nullptr;
  std::vector<double>* lower = nullptr;
  std::vector<double>* upper = nullptr;
  std::vector<RowRange>* case_ranges = nullptr;
  std::vector<RowRange>* linking_ranges = nullptr;
  int row = 0;
  std::size_t k = 0;

  bool wants_jacobian() const { return pattern || !jac.empty(); }
  void entry(int col, double v) {
    if (pattern) pattern->push_back({row, col});
    if (!jac.empty()) jac[k] = v;
    ++k;
  }
  void finish(double value, double lo = 0.0, double hi = 0.0) {
    if (!g.empty()) g[row] = value;
    if (lower) {
      lower->push_back(lo);
      upper->push_back(hi);
    }
    ++row;
  }
};

CollocationProblem::CollocationProblem(TranscriptionSpec spec) : spec_(std::move(spec)) {
  spec_.params.validate();
  if (spec_.ground_offsets.empty()) throw Error(ErrorCode::InvalidParameters, "at least one case required");
  for (double d : spec_.ground_offsets) validate_boundary(spec_.bc, spec_.params, d);
  if (!(spec_.effort_weight >= 0.0)) throw Error(ErrorCode::InvalidParameters, "effort weight must be >= 0");
  layout_ = DecisionLayout(spec_.phases, static_cast<int>(spec_.ground_offsets.size()), spec_.grid_points);

  const int n = layout_.num_variables();
  xl_.assign(n, -kInf);
  xu_.assign(n, kInf);
  const Params& p = spec_.params;
  for (int c = 0; c < layout_.num_cases(); ++c) {
    for (int ph = 0; ph < 3; ++ph) {
      for (int k = 0; k < layout_.nodes(ph); ++k) {
        xl_[layout_.state_index(c, ph, k, kR0)] = p.min_setpoint();
        xu_[layout_.state_index(c, ph, k, kR0)] = p.max_setpoint();
        xl_[layout_.input_index(c, ph, k)] = -p.max_accel;
        xu_[layout_.input_index(c, ph, k)] = p.max_accel;
      }
      xl_[layout_.duration_index(c, ph)] = kMinNodeSpacing * (layout_.nodes(ph) - 1);
    }
  }
  for (int j = 0; j < layout_.grid_points(); ++j) {
    xl_[layout_.grid_value_index(j)] = -p.max_accel;
    xu_[layout_.grid_value_index(j)] = p.max_accel;
  }
  if (layout_.grid_points() > 0) xl_[layout_.horizon_index()] = kMinNodeSpacing * (layout_.grid_points() - 1);

  // Structure pass at a harmless point (any point works; the pattern is value-independent).
  x0_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) x0_[i] = std::clamp(0.5, xl_[i], xu_[i]);
  for (int c = 0; c < layout_.num_cases(); ++c)
    for (int ph = 0; ph < 3; ++ph)
      for (int k = 0; k < layout_.nodes(ph); ++k) x0_[layout_.state_index(c, ph, k, kY)] = 1.0;
  Sink sink;
  sink.pattern = &pattern_;
  sink.lower = &gl_;
  sink.upper = &gu_;
  sink.case_ranges = &case_rows_;
  sink.linking_ranges = &linking_rows_;
  assemble(x0_, sink);
}

void CollocationProblem::set_initial_point(std::vector<double> x0) {
  if (static_cast<int>(x0.size()) != num_variables())
    throw Error(ErrorCode::InvalidParameters, "initial point has the wrong size");
  x0_ = std::move(x0);
}

State CollocationProblem::node_state(std::span<const double> x, int c, int phase, int k) const {
  const int i = layout_.node_index(c, phase, k);
  return {x[i + kX], x[i + kY], x[i + kXd], x[i + kYd], x[i + kR0], x[i + kR0d], x[i + kRp]};
}

double CollocationProblem::node_input(std::span<const double> x, int c, int phase, int k) const {
  return x[layout_.input_index(c, phase, k)];
}

double CollocationProblem::duration(std::span<const double> x, int c, int phase) const {
  return x[layout_.duration_index(c, phase)];
}

double CollocationProblem::node_time(std::span<const double> x, int c, int phase, int k) const {
  double t = 0.0;
  for (int q = 0; q < phase; ++q) t += duration(x, c, q);
  return t + duration(x, c, phase) * k / (layout_.nodes(phase) - 1);
}

double CollocationProblem::total_duration(std::span<const double> x, int c) const {
  return duration(x, c, 0) + duration(x, c, 1) + duration(x, c, 2);
}

void CollocationProblem::set_node(std::vector<double>& x, int c, int phase, int k, const State& s, double u) const {
  const int i = layout_.node_index(c, phase, k);
  const auto a = s.to_array();
  std::copy(a.begin(), a.end(), x.begin() + i);
  x[i + kU] = u;
}

void CollocationProblem::assemble(std::span<const double> x, Sink& sink) const {
  for (int c = 0; c < layout_.num_cases(); ++c) assemble_case(x, c, sink);
  // Shared initial set point across cases.
  for (int c = 1; c < layout_.num_cases(); ++c) {
    for (int comp : {kR0, kR0d}) {
      const int a = layout_.state_index(c, 0, 0, comp), b = layout_.state_index(0, 0, 0, comp);
      if (sink.wants_jacobian()) {
        sink.entry(a, 1.0);
        sink.entry(b, -1.0);
      }
      sink.finish(x[a] - x[b]);
    }
  }
}

namespace {

// Replaces the set-point row of a trapezoid defect by the exact double integral
// of an input that is linear between the two nodes. `nodes` holds both node blocks.
void exact_setpoint_row(TrapezoidDefect& D, std::span<const double> nodes, double h) {
  const double r0 = nodes[kR0], r0d = nodes[kR0d], u = nodes[kU];
  const double r1 = nodes[kNodeVars + kR0], u1 = nodes[kNodeVars + kU];
  D.residual[kR0] = r1 - r0 - h * r0d - h * h * (2 * u + u1) / 6;
  D.d_left[kR0].fill(0.0);
  D.d_right[kR0].fill(0.0);
  D.d_left[kR0][kR0] = -1.0;
  D.d_left[kR0][kR0d] = -h;
  D.d_left[kR0][kU] = -h * h / 3;
  D.d_right[kR0][kR0] = 1.0;
  D.d_right[kR0][kU] = -h * h / 6;
  D.d_h[kR0] = -r0d - h * (2 * u + u1) / 3;
}

}  // namespace

void CollocationProblem::grid_setpoint_row(std::span<const double> x, int c, int ph, int k, int component,
                                           const ControlGrid& grid, const GridIntegral& I0, const GridIntegral& I1,
                                           Sink& sink) const {
  const int n = layout_.nodes(ph), m = layout_.grid_points();
  const double t0 = node_time(x, c, ph, k), t1 = node_time(x, c, ph, k + 1), h = t1 - t0;
  const int left = layout_.node_index(c, ph, k), right = layout_.node_index(c, ph, k + 1);
  const double f0 = grid.value_at(t0), f1 = grid.value_at(t1);
  const double r0d = x[left + kR0d];

  // Residual, its time partials, and grid partials of the subtracted integral.
  double residual, d_t0, d_t1;
  std::vector<double> d_values(m);
  double d_horizon;
  if (component == kR0d) {
    residual = x[right + kR0d] - x[left + kR0d] - (I1.first - I0.first);
    d_t0 = f0;
    d_t1 = -f1;
    for (int j = 0; j < m; ++j) d_values[j] = -(I1.d_values_first[j] - I0.d_values_first[j]);
    d_horizon = -(I1.d_horizon_first - I0.d_horizon_first);
  } else {
    residual = x[right + kR0] - x[left + kR0] - r0d * h - (I1.second - I0.second) + I0.first * h;
    d_t0 = r0d + f0 * h;
    d_t1 = -r0d - I1.first + I0.first;
    for (int j = 0; j < m; ++j)
      d_values[j] = -(I1.d_values_second[j] - I0.d_values_second[j]) + I0.d_values_first[j] * h;
    d_horizon = -(I1.d_horizon_second - I0.d_horizon_second) + I0.d_horizon_first * h;
  }
  if (sink.wants_jacobian()) {
    sink.entry(left + component, -1.0);
    sink.entry(right + component, 1.0);
    if (component == kR0) sink.entry(left + kR0d, -h);
    const double frac0 = static_cast<double>(k) / (n - 1), frac1 = static_cast<double>(k + 1) / (n - 1);
    for (int q = 0; q <= ph; ++q) {
      const double dt0 = q < ph ? 1.0 : frac0, dt1 = q < ph ? 1.0 : frac1;
      sink.entry(layout_.duration_index(c, q), d_t0 * dt0 + d_t1 * dt1);
    }
    for (int j = 0; j < m; ++j) sink.entry(layout_.grid_value_index(j), d_values[j]);
    sink.entry(layout_.horizon_index(), d_horizon);
  }
  sink.finish(residual);
}

void CollocationProblem::assemble_case(std::span<const double> x, int c, Sink& sink) const {
  const Params& p = spec_.params;
  const double d = spec_.ground_offsets[c];
  const bool jac = sink.wants_jacobian();
  const int case_begin = sink.row;

  // With a shared grid the set point is known in closed form, so its rows
  // integrate the grid signal exactly between node times.
  const int m = layout_.grid_points();
  ControlGrid grid;
  std::vector<std::vector<GridIntegral>> integral(3);
  if (m > 0) {
    grid.horizon = x[layout_.horizon_index()];
    for (int j = 0; j < m; ++j) grid.values.push_back(x[layout_.grid_value_index(j)]);
    for (int ph = 0; ph < 3; ++ph)
      for (int k = 0; k < layout_.nodes(ph); ++k) integral[ph].push_back(integrate_grid(grid, node_time(x, c, ph, k)));
  }

  // Trapezoidal defects.
  for (int ph = 0; ph < 3; ++ph) {
    const Mode mode = spec_.phases[ph].mode;
    const auto& mask = mode_mask(mode);
    const int n = layout_.nodes(ph);
    const double h = duration(x, c, ph) / (n - 1);
    const int tau = layout_.duration_index(c, ph);
    for (int k = 0; k + 1 < n; ++k) {
      TrapezoidDefect D = trapezoid_defect(node_state(x, c, ph, k), node_input(x, c, ph, k),
                                           node_state(x, c, ph, k + 1), node_input(x, c, ph, k + 1), h, mode, p);
      exact_setpoint_row(D, x.subspan(layout_.node_index(c, ph, k), 2 * kNodeVars), h);
      const int left = layout_.node_index(c, ph, k), right = layout_.node_index(c, ph, k + 1);
      for (int i = 0; i < kStateDim; ++i) {
        if (m > 0 && (i == kR0 || i == kR0d)) {
          grid_setpoint_row(x, c, ph, k, i, grid, integral[ph][k], integral[ph][k + 1], sink);
          continue;
        }
        if (jac) {
          for (int j = 0; j < kNodeVars; ++j)
            if (i == j || mask[i][j] || (i == kR0 && j == kU)) sink.entry(left + j, D.d_left[i][j]);
          for (int j = 0; j < kNodeVars; ++j)
            if (i == j || mask[i][j] || (i == kR0 && j == kU)) sink.entry(right + j, D.d_right[i][j]);
          sink.entry(tau, D.d_h[i] / (n - 1));
        }
        sink.finish(D.residual[i]);
      }
    }
  }

  // Continuity across the two phase joins (same contact frame throughout).
  for (int ph = 0; ph < 2; ++ph) {
    const int end = layout_.node_index(c, ph, layout_.nodes(ph) - 1);
    const int start = layout_.node_index(c, ph + 1, 0);
    const int count = spec_.input_continuity ? kNodeVars : kStateDim;
    for (int i = 0; i < count; ++i) {
      if (jac) {
        sink.entry(end + i, 1.0);
        sink.entry(start + i, -1.0);
      }
      sink.finish(x[end + i] - x[start + i]);
    }
  }

  // Touchdown guard at the end of descent.
  {
    const int i = layout_.node_index(c, 0, layout_.nodes(0) - 1);
    const State s = node_state(x, c, 0, layout_.nodes(0) - 1);
    const double r = s.leg_radius();
    if (jac) {
      const double rs = std::max(r, kSingularRadius);
      sink.entry(i + kX, s.x / rs);
      sink.entry(i + kY, s.y / rs);
      sink.entry(i + kR0, -1.0);
      sink.entry(i + kRp, -1.0);
    }
    sink.finish(touchdown_guard(s));
  }
  // Liftoff guard (zero leg force) at the end of stance.
  {
    const int i = layout_.node_index(c, 1, layout_.nodes(1) - 1);
    const State s = node_state(x, c, 1, layout_.nodes(1) - 1);
    if (jac) {
      const auto grad = leg_force_gradient(s, p);
      for (int comp : {kX, kY, kXd, kYd, kR0, kR0d}) sink.entry(i + comp, grad[comp]);
    }
    sink.finish(liftoff_guard(s, p));
  }

  // Apex boundary conditions, heights above this case's ground.
  auto fix = [&](int ph, int k, int comp, double target) {
    const int i = layout_.state_index(c, ph, k, comp);
    if (jac) sink.entry(i, 1.0);
    sink.finish(x[i] - target);
  };
  const int last = layout_.nodes(2) - 1;
  fix(0, 0, kY, spec_.bc.y0 - d);
  fix(0, 0, kXd, spec_.bc.xd0);
  fix(0, 0, kYd, 0.0);
  fix(0, 0, kRp, 0.0);
  fix(2, last, kY, spec_.bc.yf - d);
  fix(2, last, kXd, spec_.bc.xdf);
  fix(2, last, kYd, 0.0);
  if (sink.case_ranges) sink.case_ranges->push_back({case_begin, sink.row});

  if (layout_.grid_points() == 0) {
    if (sink.linking_ranges) sink.linking_ranges->push_back({sink.row, sink.row});
    return;
  }

  // Input linking to the shared grid.
  const int th = layout_.horizon_index();
  const double horizon = grid.horizon;
  const std::vector<double> T = grid.times();
  std::vector<SparseGradient> dT(m), dU(m);
  for (int j = 0; j < m; ++j) {
    dT[j][th] = static_cast<double>(j) / (m - 1);
    dU[j][layout_.grid_value_index(j)] = 1.0;
  }
  const int link_begin = sink.row;
  for (int ph = 0; ph < 3; ++ph) {
    const int n = layout_.nodes(ph);
    for (int k = 0; k < n; ++k) {
      const double tk = node_time(x, c, ph, k);
      const int ui = layout_.input_index(c, ph, k);
      if (jac) {
        SparseGradient dt;
        for (int q = 0; q < ph; ++q) dt[layout_.duration_index(c, q)] = 1.0;
        dt[layout_.duration_index(c, ph)] = static_cast<double>(k) / (n - 1);
        const SparseGradient g = linking_gradient(tk, T, grid.values, {{ui, 1.0}}, dt, dT, dU);
        auto at = [&](int col) {
          const auto it = g.find(col);
          return it == g.end() ? 0.0 : it->second;
        };
        sink.entry(ui, at(ui));
        for (int q = 0; q <= ph; ++q) sink.entry(layout_.duration_index(c, q), at(layout_.duration_index(c, q)));
        for (int j = 0; j < m; ++j) sink.entry(layout_.grid_value_index(j), at(layout_.grid_value_index(j)));
        sink.entry(th, at(th));
      }
      sink.finish(linking_constraint(x[ui], tk, grid));
    }
  }
  if (sink.linking_ranges) sink.linking_ranges->push_back({link_begin, sink.row});

  // Grid horizon covers this case.
  if (jac) {
    sink.entry(th, 1.0);
    for (int ph = 0; ph < 3; ++ph) sink.entry(layout_.duration_index(c, ph), -1.0);
  }
  sink.finish(horizon - total_duration(x, c), 0.0, kInf);
}

double CollocationProblem::objective(std::span<const double> x) const {
  if (spec_.effort_weight == 0.0) return 0.0;
  double J = 0.0;
  for (int c = 0; c < layout_.num_cases(); ++c) {
    std::vector<std::vector<double>> u(3);
    std::vector<double> h(3);
    for (int ph = 0; ph < 3; ++ph) {
      for (int k = 0; k < layout_.nodes(ph); ++k) u[ph].push_back(node_input(x, c, ph, k));
      h[ph] = duration(x, c, ph) / (layout_.nodes(ph) - 1);
    }
    J += objective_effort(u, h).value;
  }
  return spec_.effort_weight * J;
}

void CollocationProblem::objective_gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (spec_.effort_weight == 0.0) return;
  const double w = spec_.effort_weight;
  for (int c = 0; c < layout_.num_cases(); ++c) {
    std::vector<std::vector<double>> u(3);
    std::vector<double> h(3);
    for (int ph = 0; ph < 3; ++ph) {
      for (int k = 0; k < layout_.nodes(ph); ++k) u[ph].push_back(node_input(x, c, ph, k));
      h[ph] = duration(x, c, ph) / (layout_.nodes(ph) - 1);
    }
    const EffortValue e = objective_effort(u, h);
    for (int ph = 0; ph < 3; ++ph) {
      for (int k = 0; k < layout_.nodes(ph); ++k) grad[layout_.input_index(c, ph, k)] = w * e.d_inputs[ph][k];
      grad[layout_.duration_index(c, ph)] = w * e.d_spacings[ph] / (layout_.nodes(ph) - 1);
    }
  }
}

void CollocationProblem::constraints(std::span<const double> x, std::span<double> g) const {
  Sink sink;
  sink.g = g;
  assemble(x, sink);
}

void CollocationProblem::jacobian_values(std::span<const double> x, std::span<double> values) const {
  Sink sink;
  sink.jac = values;
  assemble(x, sink);
}

// ---------------------------------------------------------------------------
// Minimum-effort problem

CollocationProblem build_min_effort(const BoundaryConditions& bc, const Params& p, const PhaseSet& phases) {
  TranscriptionSpec spec;
  spec.bc = bc;
  spec.params = p;
  spec.phases = phases;
  CollocationProblem problem(std::move(spec));
  problem.set_initial_point(min_effort_guess(problem));
  return problem;
}

namespace {

// Samples a simulated passive bounce onto the node grid of case 0 (contact frame).
std::vector<double> sample_trace(const CollocationProblem& prob, const SimTrace& trace, const SimOutcome& out) {
  const auto& L = prob.layout();
  std::vector<double> x = prob.initial_point();
  const Point2 origin = *out.contact_point;
  const std::array<double, 4> t{0.0, out.events[0].time, out.events[1].time, out.events[2].time};
  for (int ph = 0; ph < 3; ++ph) {
    const int n = L.nodes(ph);
    for (int k = 0; k < n; ++k) {
      const double tk = std::min(t[ph] + (t[ph + 1] - t[ph]) * k / (n - 1), trace.end());
      const State s = *trace.state_at(tk, origin);
      prob.set_node(x, 0, ph, k, s, 0.0);
    }
    x[L.duration_index(0, ph)] = std::max(t[ph + 1] - t[ph], kMinNodeSpacing * (n - 1));
  }
  return x;
}

// Ballistic descent, mirrored linear stance, ballistic ascent.
std::vector<double> analytic_guess(const CollocationProblem& prob) {
  const auto& L = prob.layout();
  const auto& bc = prob.spec().bc;
  const Params& p = prob.spec().params;
  std::vector<double> x = prob.initial_point();
  const double r0 = 0.95 * p.max_setpoint(), phi = 0.3, g = p.gravity;
  const double y_td = r0 * std::cos(phi), x_td = -r0 * std::sin(phi);
  const double t1 = std::sqrt(2.0 * std::max(bc.y0 - y_td, 1e-3) / g);
  const double yd_td = -g * t1;
  const double t2 = M_PI * std::sqrt(p.mass / p.stiffness);
  const double t3 = -yd_td / g;
  const std::array<double, 3> dur{t1, t2, t3};
  for (int ph = 0; ph < 3; ++ph) {
    const int n = L.nodes(ph);
    for (int k = 0; k < n; ++k) {
      const double s = dur[ph] * k / (n - 1), f = static_cast<double>(k) / (n - 1);
      State st{0, 0, bc.xd0, 0, r0, 0, 0};
      if (ph == 0) {
        st.x = x_td - bc.xd0 * (t1 - s);
        st.y = bc.y0 - 0.5 * g * s * s;
        st.ydot = -g * s;
      } else if (ph == 1) {
        st.x = x_td * (1 - 2 * f);
        st.y = y_td - 0.1 * std::sin(M_PI * f);
        st.ydot = yd_td * (1 - 2 * f);
        st.rp = st.leg_radius() - r0;
      } else {
        st.x = -x_td + bc.xd0 * s;
        st.y = y_td - yd_td * s - 0.5 * g * s * s;
        st.ydot = -yd_td - g * s;
      }
      prob.set_node(x, 0, ph, k, st, 0.0);
    }
    x[L.duration_index(0, ph)] = dur[ph];
  }
  return x;
}

}  // namespace

std::vector<double> min_effort_guess(const CollocationProblem& problem) {
  const auto& bc = problem.spec().bc;
  const Params& p = problem.spec().params;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (double r0 : {0.9, 0.95, 1.0}) {
    const double setpoint = std::clamp(r0 * p.max_setpoint(), p.min_setpoint(), p.max_setpoint());
    for (int i = 0; i <= 24; ++i) {
      MotionPlan plan;
      plan.times = {0.0, 10.0};
      plan.accels = {0.0, 0.0};
      plan.horizon = 10.0;
      plan.r0_init = setpoint;
      plan.params = p;
      plan.policy = AngleSchedule{{0.0}, {0.025 * i}};
      SimTrace trace;
      SimOutcome out;
      try {
        out = simulate_step(plan, apex_state(plan, bc.y0, bc.xd0), 0.0, {}, &trace);
      } catch (const Error&) {
        continue;
      }
      if (out.status != SimStatus::ApexReached) continue;
      const double score = std::abs(out.apex->y - bc.yf) + std::abs(out.apex->xdot - bc.xdf);
      if (score < best_score) {
        best_score = score;
        best = sample_trace(problem, trace, out);
      }
    }
  }
  return best.empty() ? analytic_guess(problem) : best;
}

MotionPlan extract_plan(const CollocationProblem& problem, std::span<const double> x, double tol) {
  const auto& L = problem.layout();
  if (L.num_cases() != 1 || L.grid_points() != 0)
    throw Error(ErrorCode::InvalidParameters, "extract_plan expects a single-case problem without a control grid");
  if (static_cast<int>(x.size()) != problem.num_variables())
    throw Error(ErrorCode::InvalidParameters, "solution has the wrong size");
  const double viol = constraint_violation(problem, x);
  if (!(viol <= tol))
    throw Error(ErrorCode::InfeasibleSolution, "solution violates constraints by " + std::to_string(viol));

  const Params& p = problem.spec().params;
  MotionPlan plan;
  for (int ph = 0; ph < 3; ++ph)
    for (int k = (ph == 0 ? 0 : 1); k < L.nodes(ph); ++k) {
      plan.times.push_back(problem.node_time(x, 0, ph, k));
      plan.accels.push_back(std::clamp(problem.node_input(x, 0, ph, k), -p.max_accel, p.max_accel));
    }
  plan.horizon = plan.times.back();
  const State s0 = problem.node_state(x, 0, 0, 0);
  plan.r0_init = s0.r0;
  plan.r0dot_init = s0.r0dot;
  plan.policy = FixedTarget{-s0.x};
  plan.params = p;
  plan.task = problem.spec().bc;
  return plan;
}

PlanSolve plan_min_effort(const BoundaryConditions& bc, const Params& p, const PhaseSet& phases,
                          const SolverOptions& options) {
  CollocationProblem problem = build_min_effort(bc, p, phases);
  PlanSolve out;
  // A task that changes apex state starts from the steady task at its initial
  // apex, whose passive solution the scan guess finds reliably.
  if (bc.yf != bc.y0 || bc.xdf != bc.xd0) {
    const CollocationProblem steady = build_min_effort({bc.y0, bc.xd0, bc.y0, bc.xd0}, p, phases);
    const SolveResult seed = solve(steady, options);
    if (seed.success()) {
      const std::vector<double> scan = problem.initial_point();
      problem.set_initial_point(seed.x);
      out.result = solve(problem, options);
      out.result.iterations += seed.iterations;
      if (out.result.success()) {
        out.plan = extract_plan(problem, out.result.x, options.constraint_tol);
        return out;
      }
      problem.set_initial_point(scan);
    }
  }
  out.result = solve(problem, options);
  if (out.result.success()) out.plan = extract_plan(problem, out.result.x, options.constraint_tol);
  return out;
}

}  // namespace aslip

#pragma once

// Three-phase trapezoidal direct collocation of one ASLIP half cycle
// (descending flight, stance, ascending flight), with an optional stack of
// ground-height cases tied to one shared control grid.
//
// All phases are transcribed in the contact frame of their case: the foot
// touches down at the origin and the case's ground is y = 0.

#include <array>
#include <span>
#include <vector>

#include "aslip/linking.hpp"
#include "aslip/model.hpp"
#include "aslip/nlp.hpp"
#include "aslip/plan.hpp"

namespace aslip {

struct PhaseSpec {
  Mode mode = Mode::FlightDescent;
  int nodes = 2;
};
using PhaseSet = std::array<PhaseSpec, 3>;

PhaseSet make_phases(int descent, int stance, int ascent);
inline PhaseSet default_phases() { return make_phases(15, 25, 15); }
/// Throws InvalidParameters unless the modes are in half-cycle order and every phase has >= 2 nodes.
void validate_phases(const PhaseSet& phases);

/// Smallest node spacing; phase p's duration is bounded below by kMinNodeSpacing * (n_p - 1).
inline constexpr double kMinNodeSpacing = 1e-3;

/// World-frame apex boundary conditions (same record as a plan's task).
using BoundaryConditions = ApexTask;

/// Throws InfeasibleBounds if either apex is not above the lowest set point
/// over a ground at height `ground_offset`, InvalidParameters if not finite.
void validate_boundary(const BoundaryConditions& bc, const Params& p, double ground_offset = 0.0);

// ---------------------------------------------------------------------------
// Building blocks

/// x_{k+1} - x_k - h/2 [f(x_k, u_k) + f(x_{k+1}, u_{k+1})] with partials.
/// Partial blocks are over (x, y, xdot, ydot, r0, r0dot, rp, u).
struct TrapezoidDefect {
  std::array<double, kStateDim> residual{};
  DynamicsJacobian d_left{};
  DynamicsJacobian d_right{};
  std::array<double, kStateDim> d_h{};
};

TrapezoidDefect trapezoid_defect(const State& xk, double uk, const State& xk1, double uk1, double h, Mode mode,
                                 const Params& p);

/// Trapezoidal quadrature of u^2 over the phases; `inputs[p]` are phase p's
/// node inputs, `spacings[p]` its node spacing.
struct EffortValue {
  double value = 0.0;
  std::vector<std::vector<double>> d_inputs;
  std::vector<double> d_spacings;
};

EffortValue objective_effort(std::span<const std::vector<double>> inputs, std::span<const double> spacings);

// ---------------------------------------------------------------------------
// Decision layout
//
// Per case: for each phase, each node holds (x, y, xdot, ydot, r0, r0dot, rp, u);
// then the three phase durations. Cases are stacked, then the shared control
// grid values U_0..U_{m-1} and the grid horizon T_h.

inline constexpr int kNodeVars = kStateDim + 1;

class DecisionLayout {
 public:
  DecisionLayout() = default;
  DecisionLayout(const PhaseSet& phases, int cases, int grid_points);

  const PhaseSet& phases() const { return phases_; }
  int num_cases() const { return cases_; }
  int grid_points() const { return grid_points_; }
  int nodes(int phase) const { return phases_[phase].nodes; }
  int total_nodes() const { return total_nodes_; }
  int case_size() const { return case_size_; }
  int num_variables() const { return cases_ * case_size_ + (grid_points_ > 0 ? grid_points_ + 1 : 0); }

  int node_index(int c, int phase, int k) const { return c * case_size_ + phase_offset_[phase] + k * kNodeVars; }
  int state_index(int c, int phase, int k, int component) const { return node_index(c, phase, k) + component; }
  int input_index(int c, int phase, int k) const { return node_index(c, phase, k) + kStateDim; }
  int duration_index(int c, int phase) const { return c * case_size_ + 8 * total_nodes_ + phase; }
  int grid_value_index(int j) const;
  int horizon_index() const;

 private:
  PhaseSet phases_{};
  int cases_ = 0;
  int grid_points_ = 0;
  int total_nodes_ = 0;
  int case_size_ = 0;
  std::array<int, 3> phase_offset_{};
};

// State component offsets inside a node block.
enum StateComponent : int { kX = 0, kY, kXd, kYd, kR0, kR0d, kRp, kU };

// ---------------------------------------------------------------------------
// Transcription

struct TranscriptionSpec {
  BoundaryConditions bc;
  Params params;
  PhaseSet phases = default_phases();
  /// Ground height of each case relative to the nominal ground.
  std::vector<double> ground_offsets{0.0};
  /// Shared control grid size (0 = none; node inputs are then independent).
  int grid_points = 0;
  /// u equal across each phase join (used when there is no shared grid).
  bool input_continuity = true;
  /// Weight on the effort objective of every case.
  double effort_weight = 1.0;
};

struct ProblemSize {
  int variables = 0;
  int constraints = 0;
};

/// Closed-form variable and constraint counts:
///   variables   = C (8 N + 3) + [m + 1]
///   constraints = C (7 (N - 3) + 23 + 2 [continuity] + N [grid] + 1 [grid]) + 2 (C - 1)
/// with N the total node count over the three phases and C the case count.
ProblemSize problem_size(const TranscriptionSpec& spec);

class CollocationProblem : public NlpProblem {
 public:
  explicit CollocationProblem(TranscriptionSpec spec);

  const TranscriptionSpec& spec() const { return spec_; }
  const DecisionLayout& layout() const { return layout_; }

  int num_variables() const override { return layout_.num_variables(); }
  int num_constraints() const override { return static_cast<int>(gl_.size()); }
  std::span<const double> variable_lower() const override { return xl_; }
  std::span<const double> variable_upper() const override { return xu_; }
  std::span<const double> constraint_lower() const override { return gl_; }
  std::span<const double> constraint_upper() const override { return gu_; }
  std::vector<double> initial_point() const override { return x0_; }
  void set_initial_point(std::vector<double> x0);

  double objective(std::span<const double> x) const override;
  void objective_gradient(std::span<const double> x, std::span<double> grad) const override;
  void constraints(std::span<const double> x, std::span<double> g) const override;
  const std::vector<JacobianEntry>& jacobian_pattern() const override { return pattern_; }
  void jacobian_values(std::span<const double> x, std::span<double> values) const override;

  // Accessors on a decision vector.
  State node_state(std::span<const double> x, int c, int phase, int k) const;
  double node_input(std::span<const double> x, int c, int phase, int k) const;
  double duration(std::span<const double> x, int c, int phase) const;
  /// Time of node k of `phase` measured from the initial apex.
  double node_time(std::span<const double> x, int c, int phase, int k) const;
  double total_duration(std::span<const double> x, int c) const;
  /// Writes a node's state and input into x.
  void set_node(std::vector<double>& x, int c, int phase, int k, const State& s, double u) const;

  /// Row ranges by kind, for diagnostics and tests.
  struct RowRange {
    int begin = 0;
    int end = 0;
  };
  RowRange linking_rows(int c) const { return linking_rows_.at(c); }
  RowRange case_rows(int c) const { return case_rows_.at(c); }

 private:
  struct Sink;
  void assemble(std::span<const double> x, Sink& sink) const;
  void assemble_case(std::span<const double> x, int c, Sink& sink) const;
  void grid_setpoint_row(std::span<const double> x, int c, int ph, int k, int component, const ControlGrid& grid,
                         const GridIntegral& I0, const GridIntegral& I1, Sink& sink) const;

  TranscriptionSpec spec_;
  DecisionLayout layout_;
  std::vector<double> xl_, xu_, gl_, gu_, x0_;
  std::vector<JacobianEntry> pattern_;
  std::vector<RowRange> linking_rows_, case_rows_;
};

// ---------------------------------------------------------------------------
// Minimum-effort problem

CollocationProblem build_min_effort(const BoundaryConditions& bc, const Params& p,
                                    const PhaseSet& phases = default_phases());

/// Deterministic initial guess: the best of a small scan of passive bounces
/// (fixed set point, no actuation) simulated from the initial apex, sampled onto
/// the node grid. Falls back to an analytic ballistic/spring-bounce guess.
std::vector<double> min_effort_guess(const CollocationProblem& problem);

/// Executable plan from a solved single-case problem. Throws InfeasibleSolution
/// if the point violates the problem's constraints by more than `tol`.
MotionPlan extract_plan(const CollocationProblem& problem, std::span<const double> x, double tol = 1e-6);

struct PlanSolve {
  SolveResult result;
  std::optional<MotionPlan> plan;  // present iff the solve succeeded
};

/// Builds and solves the min-effort problem. A task that changes the apex state
/// is warm started from the solved steady task at its initial apex, falling back
/// to the scan guess if that solve fails.
PlanSolve plan_min_effort(const BoundaryConditions& bc, const Params& p, const PhaseSet& phases = default_phases(),
                          const SolverOptions& options = {});

}  // namespace aslip

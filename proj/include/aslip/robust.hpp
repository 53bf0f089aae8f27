#pragma once

// Ground-height-robust planning: one trajectory per disturbance case, all
// driven by one shared control grid and all ending at the same world apex.

#include <vector>

#include "aslip/collocation.hpp"

namespace aslip {

struct DisturbanceSet {
  /// Ground-height offsets [l0]; must be distinct and include 0 (the nominal case).
  std::vector<double> offsets{0.10, 0.05, 0.0, -0.05, -0.10};

  void validate() const;
  int nominal_index() const;
};

struct RobustTask {
  BoundaryConditions bc;
  DisturbanceSet disturbances;
  PhaseSet phases = default_phases();
  int grid_points = 30;
  /// Weight of the optional effort term; 0 makes it a pure feasibility problem.
  double regularization = 0.0;
};

CollocationProblem build_robust(const RobustTask& task, const Params& p);

/// Initial point for a robust problem from a solved single-case problem with
/// the same phases: every case copies the nominal trajectory with its descent
/// retimed for ballistic fall to its own ground; the grid samples the nominal input.
std::vector<double> robust_warm_start(const CollocationProblem& robust, const CollocationProblem& nominal,
                                      std::span<const double> nominal_solution);

/// Touchdown (time, angle) of every case, sorted by time.
struct TouchdownSample {
  double time = 0.0;
  double angle = 0.0;
  double ground_offset = 0.0;
};
std::vector<TouchdownSample> case_touchdowns(const CollocationProblem& robust, std::span<const double> x);

/// Plan from a solved robust problem: the shared grid as (T, U) and a
/// retraction schedule of the per-case touchdown angles. Throws
/// InfeasibleSolution if x violates the constraints by more than `tol`, and
/// InconsistentRetraction if two cases touch down at the same time with
/// different angles.
MotionPlan extract_robust_plan(const CollocationProblem& robust, std::span<const double> x, double tol = 1e-6);

struct RobustPlanSolve {
  PlanSolve nominal;  // the min-effort warm start
  SolveResult result;
  std::optional<MotionPlan> plan;
};

/// Solves the min-effort problem for the task, then the robust problem warm started from it.
RobustPlanSolve plan_robust(const RobustTask& task, const Params& p, const SolverOptions& options = {});

}  // namespace aslip

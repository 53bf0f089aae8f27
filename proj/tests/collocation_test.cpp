#include "aslip/collocation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "arc_oracle.hpp"
#include "aslip/error.hpp"
#include "aslip/sim.hpp"
#include "random_point.hpp"

namespace aslip {
namespace {

const Params kParams;
const BoundaryConditions kSteady{1.1, 0.8, 1.1, 0.8};
const PhaseSet kFine = make_phases(15, 80, 15);

State random_state(std::mt19937_64& rng, bool stance) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  State s{0.2 * u(rng),       0.9 + 0.1 * u(rng), 0.8 + 0.3 * u(rng), 0.5 * u(rng),
          0.8 + 0.1 * u(rng), 0.3 * u(rng),       0.05 * u(rng)};
  if (stance) s.rp = s.leg_radius() - s.r0;
  return s;
}

// --- layout and counts -----------------------------------------------------

TEST(ProblemSizeTest, HandCountForThreeFourThree) {
  // 10 nodes x 8 + 3 durations; 7 x 7 defects + 2 x 8 joins + 2 guards + 7 boundary rows.
  const CollocationProblem prob = build_min_effort(kSteady, kParams, make_phases(3, 4, 3));
  EXPECT_EQ(prob.num_variables(), 83);
  EXPECT_EQ(prob.num_constraints(), 74);
  const ProblemSize size = problem_size(prob.spec());
  EXPECT_EQ(size.variables, 83);
  EXPECT_EQ(size.constraints, 74);
}

TEST(ProblemSizeTest, FormulaMatchesAssembledProblems) {
  for (const auto& phases : {make_phases(2, 2, 2), default_phases(), make_phases(7, 11, 5)}) {
    for (int cases : {1, 3}) {
      for (int grid : {0, 9}) {
        TranscriptionSpec spec;
        spec.bc = kSteady;
        spec.phases = phases;
        spec.ground_offsets.assign(cases, 0.0);
        for (int c = 0; c < cases; ++c) spec.ground_offsets[c] = 0.01 * c;
        spec.grid_points = grid;
        spec.input_continuity = grid == 0;
        const CollocationProblem prob(spec);
        const ProblemSize size = problem_size(spec);
        EXPECT_EQ(prob.num_variables(), size.variables);
        EXPECT_EQ(prob.num_constraints(), size.constraints);
      }
    }
  }
}

TEST(DecisionLayoutTest, IndicesAreDenseAndDisjoint) {
  const DecisionLayout L(make_phases(3, 5, 4), 3, 6);
  std::multiset<int> seen;
  for (int c = 0; c < 3; ++c) {
    for (int ph = 0; ph < 3; ++ph) {
      for (int k = 0; k < L.nodes(ph); ++k)
        for (int i = 0; i < kNodeVars; ++i) seen.insert(L.node_index(c, ph, k) + i);
      seen.insert(L.duration_index(c, ph));
    }
  }
  for (int j = 0; j < 6; ++j) seen.insert(L.grid_value_index(j));
  seen.insert(L.horizon_index());
  ASSERT_EQ(static_cast<int>(seen.size()), L.num_variables());
  int expect = 0;
  for (int v : seen) EXPECT_EQ(v, expect++);
}

TEST(DecisionLayoutTest, RejectsBadPhases) {
  EXPECT_THROW(validate_phases(make_phases(1, 5, 5)), Error);
  EXPECT_THROW(build_min_effort(kSteady, kParams, make_phases(5, 1, 5)), Error);
  PhaseSet swapped = default_phases();
  std::swap(swapped[0], swapped[1]);
  EXPECT_THROW(validate_phases(swapped), Error);
}

TEST(BuildMinEffortTest, RejectsApexBelowLowestSetPoint) {
  try {
    build_min_effort({0.45, 0.8, 1.1, 0.8}, kParams);
    FAIL() << "expected InfeasibleBounds";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleBounds);
  }
}

TEST(BuildMinEffortTest, BoxBounds) {
  const CollocationProblem prob = build_min_effort(kSteady, kParams);
  const auto& L = prob.layout();
  for (int ph = 0; ph < 3; ++ph) {
    EXPECT_DOUBLE_EQ(prob.variable_lower()[L.state_index(0, ph, 0, kR0)], 0.5);
    EXPECT_DOUBLE_EQ(prob.variable_upper()[L.state_index(0, ph, 0, kR0)], 1.0);
    EXPECT_DOUBLE_EQ(prob.variable_lower()[L.input_index(0, ph, 1)], -5.0);
    EXPECT_DOUBLE_EQ(prob.variable_upper()[L.input_index(0, ph, 1)], 5.0);
    EXPECT_DOUBLE_EQ(prob.variable_lower()[L.duration_index(0, ph)], kMinNodeSpacing * (L.nodes(ph) - 1));
  }
}

// --- trapezoid defect ------------------------------------------------------

TEST(TrapezoidDefectTest, ZeroAtTrapezoidUpdate) {
  std::mt19937_64 rng(3);
  for (Mode mode : {Mode::FlightDescent, Mode::Stance}) {
    for (int trial = 0; trial < 5; ++trial) {
      const State s0 = random_state(rng, mode == Mode::Stance);
      const double h = 0.01;
      // Fixed point of the implicit update (a contraction for this h).
      State s1 = s0;
      for (int it = 0; it < 200; ++it) {
        const auto a0 = s0.to_array(), d0 = mode_deriv(mode, s0, 0.7, kParams).to_array();
        const auto d1 = mode_deriv(mode, s1, -0.4, kParams).to_array();
        std::array<double, kStateDim> a1;
        for (int i = 0; i < kStateDim; ++i) a1[i] = a0[i] + h / 2 * (d0[i] + d1[i]);
        s1 = State::from_array(a1);
      }
      const TrapezoidDefect D = trapezoid_defect(s0, 0.7, s1, -0.4, h, mode, kParams);
      for (double r : D.residual) EXPECT_NEAR(r, 0.0, 1e-14);
    }
  }
}

TEST(TrapezoidDefectTest, BallisticArcIsExact) {
  const double g = kParams.gravity, h = 0.05;
  auto at = [&](double t) {
    return State{0.3 + 0.8 * t, 1.2 + 0.4 * t - g * t * t / 2, 0.8, 0.4 - g * t, 0.9 + 0.1 * t, 0.1, 0.0};
  };
  for (double t : {0.0, 0.2, 0.61}) {
    const TrapezoidDefect D = trapezoid_defect(at(t), 0.0, at(t + h), 0.0, h, Mode::FlightDescent, kParams);
    for (double r : D.residual) EXPECT_NEAR(r, 0.0, 1e-15);
  }
}

TEST(TrapezoidDefectTest, PartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (Mode mode : {Mode::FlightDescent, Mode::Stance, Mode::FlightAscent}) {
    for (int trial = 0; trial < 10; ++trial) {
      const State s0 = random_state(rng, mode == Mode::Stance), s1 = random_state(rng, mode == Mode::Stance);
      const double u0 = 0.3, u1 = -1.1, h = 0.04;
      const TrapezoidDefect D = trapezoid_defect(s0, u0, s1, u1, h, mode, kParams);
      auto vars = [&](int side) {
        auto a = (side == 0 ? s0 : s1).to_array();
        std::array<double, kNodeVars> v;
        std::copy(a.begin(), a.end(), v.begin());
        v[kU] = side == 0 ? u0 : u1;
        return v;
      };
      auto eval = [&](const std::array<double, kNodeVars>& l, const std::array<double, kNodeVars>& r, double hh) {
        State a = State::from_array({l[0], l[1], l[2], l[3], l[4], l[5], l[6]});
        State b = State::from_array({r[0], r[1], r[2], r[3], r[4], r[5], r[6]});
        return trapezoid_defect(a, l[kU], b, r[kU], hh, mode, kParams).residual;
      };
      const double eps = 1e-6;
      for (int side = 0; side < 2; ++side) {
        for (int j = 0; j < kNodeVars; ++j) {
          auto lp = vars(0), lm = vars(0), rp = vars(1), rm = vars(1);
          (side == 0 ? lp : rp)[j] += eps;
          (side == 0 ? lm : rm)[j] -= eps;
          const auto fp = eval(lp, rp, h), fm = eval(lm, rm, h);
          for (int i = 0; i < kStateDim; ++i) {
            const double num = (fp[i] - fm[i]) / (2 * eps);
            const double ana = side == 0 ? D.d_left[i][j] : D.d_right[i][j];
            EXPECT_LE(std::abs(ana - num), 1e-6 * std::max({std::abs(ana), std::abs(num), 1e-2}))
                << "mode " << to_string(mode) << " side " << side << " row " << i << " col " << j;
          }
        }
      }
      const auto fp = eval(vars(0), vars(1), h + eps), fm = eval(vars(0), vars(1), h - eps);
      for (int i = 0; i < kStateDim; ++i) {
        const double num = (fp[i] - fm[i]) / (2 * eps);
        EXPECT_LE(std::abs(D.d_h[i] - num), 1e-6 * std::max({std::abs(D.d_h[i]), std::abs(num), 1e-2}));
      }
    }
  }
}

// --- effort objective ------------------------------------------------------

TEST(ObjectiveEffortTest, ConstantInput) {
  // Three phases of total duration 0.5 with u = 2 everywhere.
  const std::vector<std::vector<double>> u{{2, 2, 2}, {2, 2, 2, 2, 2}, {2, 2}};
  const std::vector<double> h{0.1 / 2, 0.3 / 4, 0.1};
  EXPECT_NEAR(objective_effort(u, h).value, 2.0, 1e-15);
  const std::vector<std::vector<double>> zero{{0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0}};
  EXPECT_EQ(objective_effort(zero, h).value, 0.0);
}

TEST(ObjectiveEffortTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  std::vector<std::vector<double>> u{std::vector<double>(4), std::vector<double>(6), std::vector<double>(3)};
  for (auto& ph : u)
    for (auto& v : ph) v = U(rng);
  std::vector<double> h{0.07, 0.03, 0.11};
  const EffortValue E = objective_effort(u, h);
  const double eps = 1e-6;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-2}); };
  for (int ph = 0; ph < 3; ++ph) {
    for (std::size_t k = 0; k < u[ph].size(); ++k) {
      auto up = u, um = u;
      up[ph][k] += eps;
      um[ph][k] -= eps;
      const double num = (objective_effort(up, h).value - objective_effort(um, h).value) / (2 * eps);
      EXPECT_LE(rel(E.d_inputs[ph][k], num), 1e-8);
    }
    auto hp = h, hm = h;
    hp[ph] += eps;
    hm[ph] -= eps;
    const double num = (objective_effort(u, hp).value - objective_effort(u, hm).value) / (2 * eps);
    EXPECT_LE(rel(E.d_spacings[ph], num), 1e-8);
  }
}

TEST(ObjectiveEffortTest, NonnegativeAndZeroOnlyForZeroInputs) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  const std::vector<double> h{0.05, 0.02, 0.04};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> u{std::vector<double>(3, 0.0), std::vector<double>(4, 0.0),
                                       std::vector<double>(3, 0.0)};
    const int ph = trial % 3, k = trial % static_cast<int>(u[ph].size());
    u[ph][k] = U(rng);
    const double J = objective_effort(u, h).value;
    EXPECT_GE(J, 0.0);
    EXPECT_GT(J, 0.0) << "a single nonzero input must give positive effort";
  }
}

// --- full problem ----------------------------------------------------------

TEST(CollocationJacobianTest, RandomInteriorPointsMinEffort) {
  const CollocationProblem prob = build_min_effort(kSteady, kParams);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = testing::random_interior(prob, seed);
    const JacobianCheck jc = check_jacobian(prob, x);
    EXPECT_TRUE(jc.passed(1e-6)) << "seed " << seed << " error " << jc.max_error << " at (" << jc.worst_row << ", "
                                 << jc.worst_col << ") outside " << jc.outside_pattern.size();
  }
}

TEST(CollocationJacobianTest, GriddedMultiCaseProblem) {
  TranscriptionSpec spec;
  spec.bc = kSteady;
  spec.phases = make_phases(5, 8, 5);
  spec.ground_offsets = {0.0, 0.05, -0.05};
  spec.grid_points = 7;
  spec.input_continuity = false;
  spec.effort_weight = 0.3;
  CollocationProblem prob(spec);
  // Start from a plausible point so node times span the grid.
  const CollocationProblem single = build_min_effort(kSteady, kParams, spec.phases);
  std::vector<double> x0(prob.num_variables(), 0.0);
  const auto guess = single.initial_point();
  for (int c = 0; c < 3; ++c) std::copy(guess.begin(), guess.end(), x0.begin() + c * prob.layout().case_size());
  for (int j = 0; j < 7; ++j) x0[prob.layout().grid_value_index(j)] = std::sin(j);
  x0[prob.layout().horizon_index()] = 2.2;
  prob.set_initial_point(x0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const JacobianCheck jc = check_jacobian(prob, testing::random_interior(prob, seed));
    EXPECT_TRUE(jc.passed(1e-6)) << "error " << jc.max_error << " at (" << jc.worst_row << ", " << jc.worst_col << ")";
  }
}

TEST(FeasibilityOracleTest, SimulationSeededArcSatisfiesConstraints) {
  for (const auto& phases : {default_phases(), make_phases(6, 30, 9)}) {
    const testing::DiscreteArc arc = testing::make_arc(phases, kParams);
    const CollocationProblem prob = build_min_effort(arc.bc, kParams, phases);
    std::vector<double> x(prob.num_variables(), 0.0);
    testing::write_arc(prob, arc, x);
    EXPECT_LE(constraint_violation(prob, x), 1e-6);
    EXPECT_EQ(prob.objective(x), 0.0);
  }
}

TEST(FeasibilityOracleTest, PerturbedArcIsInfeasible) {
  const testing::DiscreteArc arc = testing::make_arc(default_phases(), kParams);
  const CollocationProblem prob = build_min_effort(arc.bc, kParams);
  std::vector<double> x(prob.num_variables(), 0.0);
  testing::write_arc(prob, arc, x);
  x[prob.layout().state_index(0, 1, 10, kY)] += 1e-3;
  EXPECT_GT(constraint_violation(prob, x), 1e-4);
}

TEST(MinEffortGuessTest, Deterministic) {
  const CollocationProblem prob = build_min_effort(kSteady, kParams);
  EXPECT_EQ(min_effort_guess(prob), min_effort_guess(prob));
}

class SolvedSteady : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    problem_ = new CollocationProblem(build_min_effort(kSteady, kParams, kFine));
    result_ = new SolveResult(solve(*problem_));
  }
  static void TearDownTestSuite() {
    delete problem_;
    delete result_;
  }
  static CollocationProblem* problem_;
  static SolveResult* result_;
};
CollocationProblem* SolvedSteady::problem_ = nullptr;
SolveResult* SolvedSteady::result_ = nullptr;

TEST_F(SolvedSteady, ConvergesWithinTolerance) {
  EXPECT_EQ(result_->status, SolveStatus::Optimal) << result_->message;
  EXPECT_LE(result_->violation, 1e-6);
  EXPECT_GE(result_->objective, 0.0);
}

TEST_F(SolvedSteady, GuardsHoldAtOptimum) {
  const auto& x = result_->x;
  const State td = problem_->node_state(x, 0, 0, problem_->layout().nodes(0) - 1);
  const State lo = problem_->node_state(x, 0, 1, problem_->layout().nodes(1) - 1);
  EXPECT_LE(std::abs(td.leg_radius() - td.r0 - td.rp), 1e-6);
  EXPECT_LE(std::abs(leg_force(lo, kParams)), 1e-6);
}

TEST_F(SolvedSteady, SimulatedApexMatchesTarget) {
  const MotionPlan plan = extract_plan(*problem_, result_->x);
  const SimOutcome out = simulate_step(plan, apex_state(plan, kSteady.y0, kSteady.xd0), 0.0);
  ASSERT_EQ(out.status, SimStatus::ApexReached);
  EXPECT_LT(std::abs(out.apex->y - kSteady.yf), 1e-3);
  EXPECT_LT(std::abs(out.apex->xdot - kSteady.xdf), 1e-3);
}

TEST_F(SolvedSteady, ExtractedPlanBookkeeping) {
  const auto& x = result_->x;
  const MotionPlan plan = extract_plan(*problem_, x);
  EXPECT_NEAR(plan.horizon, problem_->total_duration(x, 0), 1e-12);
  EXPECT_DOUBLE_EQ(std::get<FixedTarget>(plan.policy).target_x, -problem_->node_state(x, 0, 0, 0).x);
  ASSERT_TRUE(plan.task.has_value());
  EXPECT_EQ(*plan.task, kSteady);
  double worst = 0.0;
  for (int ph = 0; ph < 3; ++ph)
    for (int k = 0; k < problem_->layout().nodes(ph); ++k) {
      const double t = std::min(problem_->node_time(x, 0, ph, k), plan.horizon);
      worst = std::max(worst, std::abs(eval_setpoint(plan, t).r0 - problem_->node_state(x, 0, ph, k).r0));
    }
  EXPECT_LE(worst, 1e-4);
  EXPECT_NO_THROW(plan.validate(1e-3));
}

TEST_F(SolvedSteady, ExtractionRefusesInfeasiblePoint) {
  auto x = result_->x;
  x[problem_->layout().state_index(0, 1, 3, kX)] += 0.01;
  try {
    extract_plan(*problem_, x);
    FAIL() << "expected InfeasibleSolution";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleSolution);
  }
}

TEST(RefinementTest, DoublingNodesKeepsObjective) {
  // Steady tasks are passive (zero effort); a speed change needs actuation.
  const BoundaryConditions change{1.1, 0.6, 1.15, 0.8};
  const PlanSolve coarse = plan_min_effort(change, kParams, make_phases(15, 40, 15));
  const PlanSolve fine = plan_min_effort(change, kParams, make_phases(30, 80, 30));
  ASSERT_TRUE(coarse.result.success()) << coarse.result.message;
  ASSERT_TRUE(fine.result.success()) << fine.result.message;
  ASSERT_GT(coarse.result.objective, 0.0);
  EXPECT_LT(std::abs(fine.result.objective - coarse.result.objective), 0.01 * coarse.result.objective)
      << coarse.result.objective << " vs " << fine.result.objective;

  const PlanSolve s1 = plan_min_effort(kSteady, kParams, make_phases(15, 25, 15));
  const PlanSolve s2 = plan_min_effort(kSteady, kParams, make_phases(30, 50, 30));
  ASSERT_TRUE(s1.result.success() && s2.result.success());
  EXPECT_LE(s1.result.objective, 1e-8);
  EXPECT_LE(s2.result.objective, 1e-8);
}

TEST(PlanMinEffortTest, SpeedChangeConvergesAndTracks) {
  const BoundaryConditions change{1.05, 0.6, 1.15, 0.8};
  const PlanSolve out = plan_min_effort(change, kParams, kFine);
  ASSERT_TRUE(out.plan.has_value()) << out.result.message;
  const SimOutcome sim = simulate_step(*out.plan, apex_state(*out.plan, change.y0, change.xd0), 0.0);
  ASSERT_EQ(sim.status, SimStatus::ApexReached);
  EXPECT_LT(std::abs(sim.apex->y - change.yf), 1e-3);
  EXPECT_LT(std::abs(sim.apex->xdot - change.xdf), 1e-3);
}

TEST(ExtractPlanTest, RejectsGriddedProblem) {
  TranscriptionSpec spec;
  spec.bc = kSteady;
  spec.grid_points = 5;
  spec.input_continuity = false;
  const CollocationProblem prob(spec);
  EXPECT_THROW(extract_plan(prob, prob.initial_point()), Error);
}

}  // namespace
}  // namespace aslip

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "aslip/linking.hpp"
#include "aslip/plan.hpp"

namespace aslip {
namespace {

MotionPlan constant_plan(double accel, double horizon = 1.0) {
  MotionPlan p;
  p.times = {0.0, horizon};
  p.accels = {accel, accel};
  p.horizon = horizon;
  p.r0_init = 0.9;
  p.r0dot_init = 0.0;
  return p;
}

MotionPlan random_plan(std::mt19937& rng, int knots) {
  std::uniform_real_distribution<double> ua(-5.0, 5.0), dt(0.02, 0.2);
  MotionPlan p;
  p.times = {0.0};
  p.accels = {ua(rng)};
  for (int i = 1; i < knots; ++i) {
    p.times.push_back(p.times.back() + dt(rng));
    p.accels.push_back(ua(rng));
  }
  p.horizon = p.times.back();
  p.r0_init = 0.8;
  p.r0dot_init = 0.1;
  return p;
}

TEST(EvalSetpointTest, ZeroAccelerationIsLinear) {
  MotionPlan p = constant_plan(0.0);
  p.r0dot_init = -0.3;
  for (double t : {0.0, 0.1, 0.5, 1.0}) {
    const auto sp = eval_setpoint(p, t);
    EXPECT_NEAR(sp.r0, 0.9 - 0.3 * t, 1e-15);
    EXPECT_NEAR(sp.r0dot, -0.3, 1e-15);
  }
}

TEST(EvalSetpointTest, ConstantAcceleration) {
  const auto sp = eval_setpoint(constant_plan(1.0), 0.2);
  EXPECT_NEAR(sp.r0, 0.92, 1e-15);
  EXPECT_NEAR(sp.r0dot, 0.2, 1e-15);
}

// r0(t) = r0(0) + v0 t + integral_0^t (t - s) a(s) ds by composite Simpson on
// each knot interval, where the integrand is a polynomial of degree two.
TEST(EvalSetpointTest, MatchesQuadratureOracle) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const MotionPlan p = random_plan(rng, 12);
    std::uniform_real_distribution<double> ut(0.0, p.horizon);
    for (int q = 0; q < 10; ++q) {
      const double t = ut(rng);
      auto a = [&](double s) { return lin_interp(p.times, p.accels, s); };
      std::vector<double> cuts{0.0};
      for (double k : p.times)
        if (k > 0.0 && k < t) cuts.push_back(k);
      cuts.push_back(t);
      double pos = 0.0, vel = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const int n = 200;
        const double h = (cuts[i + 1] - cuts[i]) / n;
        for (int j = 0; j < n; ++j) {
          const double s0 = cuts[i] + j * h, s1 = s0 + h / 2, s2 = s0 + h;
          pos += h / 6 * ((t - s0) * a(s0) + 4 * (t - s1) * a(s1) + (t - s2) * a(s2));
          vel += h / 6 * (a(s0) + 4 * a(s1) + a(s2));
        }
      }
      const auto sp = eval_setpoint(p, t);
      EXPECT_NEAR(sp.r0, p.r0_init + p.r0dot_init * t + pos, 1e-10);
      EXPECT_NEAR(sp.r0dot, p.r0dot_init + vel, 1e-10);
    }
  }
}

TEST(EvalSetpointTest, ContinuousAcrossKnots) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MotionPlan p = random_plan(rng, 8);
    for (std::size_t i = 1; i + 1 < p.times.size(); ++i) {
      const double k = p.times[i];
      const auto left = eval_setpoint(p, std::nextafter(k, -1e9));
      const auto right = eval_setpoint(p, std::nextafter(k, 1e9));
      EXPECT_NEAR(left.r0, right.r0, 1e-12);
      EXPECT_NEAR(left.r0dot, right.r0dot, 1e-12);
    }
  }
}

TEST(EvalSetpointTest, ExtrapolatesEndSegments) {
  const MotionPlan p = constant_plan(1.0);
  const auto sp = eval_setpoint(p, 1.5);
  EXPECT_NEAR(sp.r0, 0.9 + 0.5 * 1.5 * 1.5, 1e-14);
  EXPECT_NEAR(sp.r0dot, 1.5, 1e-14);
}

TEST(LegAngleTest, FixedTarget) {
  const State body{2.0, 1.0, 0.8, -0.2, 0.9, 0.0, 0.0};
  EXPECT_EQ(*leg_angle(FixedTarget{2.0}, body, 0.1, 0.0), 0.0);
  EXPECT_NEAR(*leg_angle(FixedTarget{2.3}, body, 0.1, 0.1), std::atan2(0.3, 0.9), 1e-15);
  EXPECT_NEAR(*leg_angle(FixedTarget{2.3}, body, 0.1, 0.1), 0.32175, 1e-5);
  EXPECT_FALSE(leg_angle(FixedTarget{2.3}, body, 0.1, 1.0).has_value());
}

TEST(LegAngleTest, ScheduleInterpolatesAndClamps) {
  const AngleSchedule s{{0.3, 0.5}, {0.10, 0.20}};
  const State body{0.0, 1.0, 0.8, -0.2, 0.9, 0.0, 0.0};
  EXPECT_NEAR(*leg_angle(s, body, 0.4, 0.0), 0.15, 1e-15);
  EXPECT_EQ(*leg_angle(s, body, 0.0, 0.0), 0.10);
  EXPECT_EQ(*leg_angle(s, body, 0.9, 0.0), 0.20);
  EXPECT_EQ(*leg_angle(AngleSchedule{{0.4}, {0.3}}, body, 0.1, 0.0), 0.3);
}

TEST(PlanValidateTest, RejectsBadPlans) {
  MotionPlan p = constant_plan(0.0);
  EXPECT_NO_THROW(p.validate());
  p.accels = {0.0, 6.0};
  EXPECT_THROW(p.validate(), Error);
  p = constant_plan(0.0);
  p.times = {0.0, 0.0};
  EXPECT_THROW(p.validate(), Error);
  p = constant_plan(0.0);
  p.horizon = 2.0;
  EXPECT_THROW(p.validate(), Error);
  p = constant_plan(1.0, 1.0);  // r0 reaches 1.4
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidPlan);
  }
}

TEST(PlanJsonTest, RoundTripIsExact) {
  std::mt19937 rng(9);
  MotionPlan p = random_plan(rng, 9);
  p.policy = AngleSchedule{{0.31, 0.42, 0.55}, {0.123456789012345678, 0.2, 0.3}};
  p.task = ApexTask{1.1, 0.8, 1.15, 0.6};
  p.params.stiffness = 21.5;
  const MotionPlan q = plan_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(q.times, p.times);
  EXPECT_EQ(q.accels, p.accels);
  EXPECT_EQ(q.r0_init, p.r0_init);
  EXPECT_EQ(q.r0dot_init, p.r0dot_init);
  EXPECT_EQ(q.horizon, p.horizon);
  EXPECT_EQ(q.params.stiffness, 21.5);
  EXPECT_EQ(std::get<AngleSchedule>(q.policy).angles, std::get<AngleSchedule>(p.policy).angles);
  EXPECT_EQ(q.task, p.task);

  p.policy = FixedTarget{0.3141592653589793};
  const auto path = std::filesystem::temp_directory_path() / "aslip_plan_test.json";
  save_plan(p, path);
  const MotionPlan r = load_plan(path);
  EXPECT_EQ(std::get<FixedTarget>(r.policy).target_x, 0.3141592653589793);
  std::filesystem::remove(path);
}

TEST(PlanJsonTest, RejectsWrongVersionAndCorruptDocuments) {
  auto doc = to_json(constant_plan(0.0));
  doc["version"] = 99;
  EXPECT_THROW(plan_from_json(doc), Error);
  doc = to_json(constant_plan(0.0));
  doc["policy"]["type"] = "teleport";
  EXPECT_THROW(plan_from_json(doc), Error);
  doc.erase("times");
  EXPECT_THROW(plan_from_json(doc), Error);
  const auto path = std::filesystem::temp_directory_path() / "aslip_corrupt.json";
  { std::ofstream(path) << "{ not json"; }
  try {
    load_plan(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidPlan);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace aslip

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>

#include "aslip/error.hpp"
#include "aslip/nlp.hpp"

namespace aslip {
namespace {

using Vecd = std::vector<double>;
using X = std::span<const double>;

// Small problem assembled from lambdas. The Jacobian is evaluated densely by
// `jac` and scattered into the declared pattern.
struct LambdaProblem : NlpProblem {
  Vecd xl, xu, gl, gu, x0;
  std::function<double(X)> f;
  std::function<void(X, std::span<double>)> df;
  std::function<void(X, std::span<double>)> g;
  std::function<void(X, std::vector<Vecd>&)> jac;  // jac[row][col]
  std::vector<JacobianEntry> pattern;

  int num_variables() const override { return static_cast<int>(xl.size()); }
  int num_constraints() const override { return static_cast<int>(gl.size()); }
  std::span<const double> variable_lower() const override { return xl; }
  std::span<const double> variable_upper() const override { return xu; }
  std::span<const double> constraint_lower() const override { return gl; }
  std::span<const double> constraint_upper() const override { return gu; }
  Vecd initial_point() const override { return x0; }
  double objective(X x) const override { return f(x); }
  void objective_gradient(X x, std::span<double> out) const override { df(x, out); }
  void constraints(X x, std::span<double> out) const override {
    if (g) g(x, out);
  }
  const std::vector<JacobianEntry>& jacobian_pattern() const override { return pattern; }
  void jacobian_values(X x, std::span<double> v) const override {
    std::vector<Vecd> J(gl.size(), Vecd(xl.size(), 0.0));
    jac(x, J);
    for (std::size_t k = 0; k < pattern.size(); ++k) v[k] = J[pattern[k].row][pattern[k].col];
  }

  void dense_pattern() {
    pattern.clear();
    for (int i = 0; i < num_constraints(); ++i)
      for (int j = 0; j < num_variables(); ++j) pattern.push_back({i, j});
  }
};

LambdaProblem shifted_square() {
  LambdaProblem p;
  p.xl = {0.0};
  p.xu = {kInf};
  p.x0 = {0.5};
  p.f = [](X x) { return (x[0] - 3) * (x[0] - 3); };
  p.df = [](X x, std::span<double> d) { d[0] = 2 * (x[0] - 3); };
  p.jac = [](X, std::vector<Vecd>&) {};
  return p;
}

LambdaProblem active_bound() {
  LambdaProblem p;
  p.xl = {2.0};
  p.xu = {kInf};
  p.x0 = {5.0};
  p.f = [](X x) { return x[0]; };
  p.df = [](X, std::span<double> d) { d[0] = 1.0; };
  p.jac = [](X, std::vector<Vecd>&) {};
  return p;
}

// Projection of (1, 2) onto {x + y = 1, x - y >= 0}: (0.5, 0.5).
LambdaProblem linear_rows() {
  LambdaProblem p;
  p.xl = {-kInf, -kInf};
  p.xu = {kInf, kInf};
  p.gl = {1.0, 0.0};
  p.gu = {1.0, kInf};
  p.x0 = {3.0, -1.0};
  p.f = [](X x) { return (x[0] - 1) * (x[0] - 1) + (x[1] - 2) * (x[1] - 2); };
  p.df = [](X x, std::span<double> d) {
    d[0] = 2 * (x[0] - 1);
    d[1] = 2 * (x[1] - 2);
  };
  p.g = [](X x, std::span<double> c) {
    c[0] = x[0] + x[1];
    c[1] = x[0] - x[1];
  };
  p.jac = [](X, std::vector<Vecd>& J) { J = {{1.0, 1.0}, {1.0, -1.0}}; };
  p.dense_pattern();
  return p;
}

// Hock-Schittkowski problem 71.
LambdaProblem hs071() {
  LambdaProblem p;
  p.xl = Vecd(4, 1.0);
  p.xu = Vecd(4, 5.0);
  p.gl = {25.0, 40.0};
  p.gu = {kInf, 40.0};
  p.x0 = {1.0, 5.0, 5.0, 1.0};
  p.f = [](X x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; };
  p.df = [](X x, std::span<double> d) {
    d[0] = x[3] * (2 * x[0] + x[1] + x[2]);
    d[1] = x[0] * x[3];
    d[2] = x[0] * x[3] + 1;
    d[3] = x[0] * (x[0] + x[1] + x[2]);
  };
  p.g = [](X x, std::span<double> c) {
    c[0] = x[0] * x[1] * x[2] * x[3];
    c[1] = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
  };
  p.jac = [](X x, std::vector<Vecd>& J) {
    J[0] = {x[1] * x[2] * x[3], x[0] * x[2] * x[3], x[0] * x[1] * x[3], x[0] * x[1] * x[2]};
    J[1] = {2 * x[0], 2 * x[1], 2 * x[2], 2 * x[3]};
  };
  p.dense_pattern();
  return p;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::Builtin};
  if (backend_available(Backend::Ipopt)) out.push_back(Backend::Ipopt);
  return out;
}

class BackendTest : public ::testing::TestWithParam<Backend> {
 protected:
  SolverOptions options() const {
    SolverOptions o;
    o.backend = GetParam();
    o.optimality_tol = 1e-8;
    return o;
  }
};

TEST_P(BackendTest, InteriorMinimum) {
  const auto r = solve(shifted_square(), options());
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_NEAR(r.x[0], 3.0, 1e-6);
  EXPECT_EQ(r.backend, GetParam());
}

TEST_P(BackendTest, ActiveBound) {
  const auto r = solve(active_bound(), options());
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_NEAR(r.x[0], 2.0, 1e-6);
}

TEST_P(BackendTest, LinearEqualityAndInequality) {
  const auto r = solve(linear_rows(), options());
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_NEAR(r.x[0], 0.5, 1e-6);
  EXPECT_NEAR(r.x[1], 0.5, 1e-6);
  EXPECT_LE(r.violation, 1e-6);
}

TEST_P(BackendTest, HockSchittkowski71) {
  const auto r = solve(hs071(), options());
  ASSERT_EQ(r.status, SolveStatus::Optimal) << r.message;
  EXPECT_NEAR(r.objective, 17.0140173, 1e-5);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 4.7429994, 1e-4);
  EXPECT_NEAR(r.x[2], 3.8211503, 1e-4);
  EXPECT_NEAR(r.x[3], 1.3794082, 1e-4);
  // Independent re-check of the returned point.
  EXPECT_LE(constraint_violation(hs071(), r.x), 1e-6);
}

TEST_P(BackendTest, InfeasibleProblemIsReportedHonestly) {
  LambdaProblem p = shifted_square();
  p.gl = {-1.0};
  p.gu = {-1.0};
  p.g = [](X x, std::span<double> c) { c[0] = x[0] * x[0]; };
  p.jac = [](X x, std::vector<Vecd>& J) { J[0][0] = 2 * x[0]; };
  p.dense_pattern();
  SolverOptions o = options();
  o.max_iterations = 500;
  const auto r = solve(p, o);
  EXPECT_FALSE(r.success());
  EXPECT_GT(r.violation, 1e-6);
}

TEST_P(BackendTest, NanObjectiveSurfacesAsError) {
  LambdaProblem p = shifted_square();
  p.f = [](X) { return std::nan(""); };
  const auto r = solve(p, options());
  EXPECT_EQ(r.status, SolveStatus::Error);
  EXPECT_NE(r.message.find("not finite"), std::string::npos) << r.message;
}

TEST_P(BackendTest, ThrowingConstraintSurfacesAsError) {
  LambdaProblem p = linear_rows();
  p.g = [](X, std::span<double>) { throw Error(ErrorCode::SingularState, "leg length collapsed"); };
  const auto r = solve(p, options());
  EXPECT_EQ(r.status, SolveStatus::Error);
  EXPECT_NE(r.message.find("leg length collapsed"), std::string::npos) << r.message;
}

TEST_P(BackendTest, DeterministicAcrossRuns) {
  const auto a = solve(hs071(), options());
  const auto b = solve(hs071(), options());
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.x, b.x);
}

INSTANTIATE_TEST_SUITE_P(Backends, BackendTest, ::testing::ValuesIn(available_backends()),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(SolverOptionsTest, RejectsNonPositiveTolerances) {
  SolverOptions o;
  o.constraint_tol = 0.0;
  EXPECT_THROW(solve(shifted_square(), o), Error);
}

TEST(SolverOptionsTest, InconsistentBoundsRejected) {
  LambdaProblem p = shifted_square();
  p.xl = {2.0};
  p.xu = {1.0};
  try {
    solve(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleBounds);
  }
}

TEST(BackendSelectionTest, EnvironmentVariable) {
  ::setenv("ASLIP_NLP_BACKEND", "builtin", 1);
  EXPECT_EQ(resolve_backend(Backend::Default), Backend::Builtin);
  EXPECT_EQ(resolve_backend(Backend::Ipopt), Backend::Ipopt);
  ::setenv("ASLIP_NLP_BACKEND", "simplex", 1);
  EXPECT_THROW(resolve_backend(Backend::Default), Error);
  ::unsetenv("ASLIP_NLP_BACKEND");
  EXPECT_EQ(resolve_backend(Backend::Default),
            backend_available(Backend::Ipopt) ? Backend::Ipopt : Backend::Builtin);
  EXPECT_EQ(parse_backend("ipopt"), Backend::Ipopt);
  EXPECT_FALSE(parse_backend("cplex").has_value());
}

TEST(CheckJacobianTest, LinearRowsAreExact) {
  const LambdaProblem p = linear_rows();
  const Vecd x{0.5, 0.25};
  const auto c = check_jacobian(p, x);
  EXPECT_LE(c.max_constraint_error, 1e-10);
  EXPECT_LE(c.max_gradient_error, 1e-8);
  EXPECT_EQ(c.max_error, std::max(c.max_constraint_error, c.max_gradient_error));
  EXPECT_TRUE(c.outside_pattern.empty());
  EXPECT_EQ(c.entries_checked, 6);  // 4 Jacobian + 2 gradient
}

TEST(CheckJacobianTest, NonlinearRowsPass) {
  const LambdaProblem p = hs071();
  const Vecd x{1.3, 4.1, 3.7, 1.9};
  EXPECT_TRUE(check_jacobian(p, x).passed(1e-6));
}

TEST(CheckJacobianTest, CorruptedEntryIsLocalized) {
  LambdaProblem p = hs071();
  auto good = p.jac;
  p.jac = [good](X x, std::vector<Vecd>& J) {
    good(x, J);
    J[1][2] *= 1.001;
  };
  const auto c = check_jacobian(p, Vecd{1.3, 4.1, 3.7, 1.9});
  EXPECT_FALSE(c.passed(1e-6));
  EXPECT_EQ(c.worst_row, 1);
  EXPECT_EQ(c.worst_col, 2);
  EXPECT_NEAR(c.worst_numeric, 2 * 3.7, 1e-6);
}

TEST(CheckJacobianTest, CorruptedGradientIsLocalized) {
  LambdaProblem p = hs071();
  auto good = p.df;
  p.df = [good](X x, std::span<double> d) {
    good(x, d);
    d[3] += 0.01;
  };
  const auto c = check_jacobian(p, Vecd{1.3, 4.1, 3.7, 1.9});
  EXPECT_EQ(c.worst_row, -1);
  EXPECT_EQ(c.worst_col, 3);
}

TEST(CheckJacobianTest, MissingPatternEntryIsReported) {
  LambdaProblem p = hs071();
  p.pattern.erase(p.pattern.begin() + 5);  // row 1, col 1
  const auto c = check_jacobian(p, Vecd{1.3, 4.1, 3.7, 1.9});
  ASSERT_EQ(c.outside_pattern.size(), 1u);
  EXPECT_EQ(c.outside_pattern[0].row, 1);
  EXPECT_EQ(c.outside_pattern[0].col, 1);
  EXPECT_FALSE(c.passed(1.0));
}

}  // namespace
}  // namespace aslip

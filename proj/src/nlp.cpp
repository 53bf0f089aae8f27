#include "aslip/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>

#include "aslip/error.hpp"

namespace aslip {

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::Default:
      return "default";
    case Backend::Ipopt:
      return "ipopt";
    case Backend::Builtin:
      return "builtin";
  }
  return "?";
}

std::optional<Backend> parse_backend(std::string_view name) {
  if (name == "ipopt") return Backend::Ipopt;
  if (name == "builtin") return Backend::Builtin;
  if (name == "default") return Backend::Default;
  return std::nullopt;
}

bool backend_available(Backend backend) {
#ifdef ASLIP_HAVE_IPOPT
  (void)backend;
  return true;
#else
  return backend != Backend::Ipopt;
#endif
}

Backend resolve_backend(Backend requested) {
  if (requested != Backend::Default) return requested;
  if (const char* env = std::getenv("ASLIP_NLP_BACKEND"); env && *env) {
    const auto b = parse_backend(env);
    if (!b) throw Error(ErrorCode::InvalidParameters, std::string("unknown ASLIP_NLP_BACKEND: ") + env);
    if (*b != Backend::Default) return *b;
  }
  return backend_available(Backend::Ipopt) ? Backend::Ipopt : Backend::Builtin;
}

void SolverOptions::validate() const {
  if (!(constraint_tol > 0.0) || !(optimality_tol > 0.0))
    throw Error(ErrorCode::InvalidParameters, "solver tolerances must be positive");
  if (max_iterations <= 0) throw Error(ErrorCode::InvalidParameters, "max_iterations must be positive");
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Feasible:
      return "feasible";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::IterationLimit:
      return "iteration-limit";
    case SolveStatus::Error:
      return "error";
  }
  return "?";
}

double constraint_violation(const NlpProblem& problem, std::span<const double> x) {
  const auto xl = problem.variable_lower(), xu = problem.variable_upper();
  double v = 0.0;
  for (int i = 0; i < problem.num_variables(); ++i) {
    v = std::max({v, xl[i] - x[i], x[i] - xu[i]});
    if (!std::isfinite(x[i])) return kInf;
  }
  std::vector<double> g(problem.num_constraints());
  problem.constraints(x, g);
  const auto gl = problem.constraint_lower(), gu = problem.constraint_upper();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) return kInf;
    v = std::max({v, gl[i] - g[i], g[i] - gu[i]});
  }
  return v;
}

namespace {

void check_shape(const NlpProblem& p) {
  const auto n = static_cast<std::size_t>(p.num_variables());
  const auto m = static_cast<std::size_t>(p.num_constraints());
  if (p.variable_lower().size() != n || p.variable_upper().size() != n || p.constraint_lower().size() != m ||
      p.constraint_upper().size() != m)
    throw Error(ErrorCode::InvalidParameters, "bound vectors do not match problem dimensions");
  for (std::size_t i = 0; i < n; ++i)
    if (p.variable_lower()[i] > p.variable_upper()[i])
      throw Error(ErrorCode::InfeasibleBounds, "variable " + std::to_string(i) + " has lower > upper");
  for (std::size_t i = 0; i < m; ++i)
    if (p.constraint_lower()[i] > p.constraint_upper()[i])
      throw Error(ErrorCode::InfeasibleBounds, "constraint " + std::to_string(i) + " has lower > upper");
  for (const auto& e : p.jacobian_pattern())
    if (e.row < 0 || e.row >= static_cast<int>(m) || e.col < 0 || e.col >= static_cast<int>(n))
      throw Error(ErrorCode::InvalidParameters, "Jacobian pattern entry out of range");
}

}  // namespace

SolveResult solve(const NlpProblem& problem, const SolverOptions& options) {
  options.validate();
  check_shape(problem);
  const Backend backend = resolve_backend(options.backend);
  if (!backend_available(backend))
    throw Error(ErrorCode::InvalidParameters, "solver backend not compiled in: " + std::string(to_string(backend)));

  SolveResult r =
      backend == Backend::Ipopt ? detail::solve_ipopt(problem, options) : detail::solve_builtin(problem, options);
  r.backend = backend;
  if (r.x.size() != static_cast<std::size_t>(problem.num_variables())) {
    r.status = SolveStatus::Error;
    if (r.message.empty()) r.message = "backend returned no iterate";
    return r;
  }
  // Independent re-check; never trust the backend's own feasibility claim.
  try {
    r.violation = constraint_violation(problem, r.x);
    r.objective = problem.objective(r.x);
  } catch (const std::exception& e) {
    r.status = SolveStatus::Error;
    r.message = std::string("evaluation at the returned point failed: ") + e.what();
    return r;
  }
  if (r.success() && !(r.violation <= options.constraint_tol)) {
    r.message = "backend reported " + std::string(to_string(r.status)) + " but the constraint violation is " +
                std::to_string(r.violation);
    r.status = SolveStatus::Infeasible;
  }
  return r;
}

JacobianCheck check_jacobian(const NlpProblem& problem, std::span<const double> x0, const JacobianCheckOptions& opt) {
  const int n = problem.num_variables(), m = problem.num_constraints();
  const auto& pattern = problem.jacobian_pattern();
  std::vector<double> values(pattern.size());
  problem.jacobian_values(x0, values);
  std::vector<double> grad(n);
  problem.objective_gradient(x0, grad);

  // Analytic Jacobian by column.
  std::vector<std::vector<std::pair<int, double>>> columns(n);
  for (std::size_t k = 0; k < pattern.size(); ++k) columns[pattern[k].col].push_back({pattern[k].row, values[k]});

  JacobianCheck out;
  out.worst_row = -2;
  auto record = [&](int row, int col, double a, double num) {
    const double err = std::abs(a - num) / std::max({std::abs(a), std::abs(num), opt.scale_floor});
    ++out.entries_checked;
    double& part = row < 0 ? out.max_gradient_error : out.max_constraint_error;
    part = std::max(part, err);
    if (out.worst_row == -2 || err > out.max_error) {
      out.max_error = err;
      out.worst_row = row;
      out.worst_col = col;
      out.worst_analytic = a;
      out.worst_numeric = num;
    }
  };

  std::vector<double> x(x0.begin(), x0.end()), gp(m), gm(m);
  std::vector<char> in_pattern(m);
  for (int j = 0; j < n; ++j) {
    // Power-of-two step so that x +- h is exact for short-mantissa points.
    const double step = std::max(opt.rel_step * std::abs(x0[j]), opt.step_floor);
    const double xp = x0[j] + std::exp2(std::round(std::log2(step)));
    const double xm = 2 * x0[j] - xp;
    const double h = 0.5 * (xp - xm);
    x[j] = xp;
    problem.constraints(x, gp);
    const double fp = problem.objective(x);
    x[j] = xm;
    problem.constraints(x, gm);
    const double fm = problem.objective(x);
    x[j] = x0[j];

    record(-1, j, grad[j], (fp - fm) / (2 * h));
    std::fill(in_pattern.begin(), in_pattern.end(), 0);
    for (const auto& [row, a] : columns[j]) {
      in_pattern[row] = 1;
      record(row, j, a, (gp[row] - gm[row]) / (2 * h));
    }
    for (int i = 0; i < m; ++i) {
      if (in_pattern[i]) continue;
      const double num = (gp[i] - gm[i]) / (2 * h);
      if (std::abs(num) > opt.pattern_threshold) out.outside_pattern.push_back({i, j});
    }
  }
  return out;
}

std::vector<double> random_interior_point(const NlpProblem& problem, std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> x = problem.initial_point();
  const auto lo = problem.variable_lower(), hi = problem.variable_upper();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] * (1.0 + spread * unit(rng)) + spread * unit(rng);
    const double margin = std::isfinite(hi[i] - lo[i]) ? 1e-3 * (hi[i] - lo[i]) : 1e-3;
    x[i] = std::clamp(v, lo[i] + margin, hi[i] - margin);
  }
  return x;
}

}  // namespace aslip

#pragma once

// Generic sparse NLP interface and solver front end.
//
//   minimize f(x)  subject to  xl <= x <= xu,  gl <= g(x) <= gu
//
// Equality rows have gl == gu. Infinite bounds use +-kInf.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aslip {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct JacobianEntry {
  int row = 0;
  int col = 0;
};

class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_variables() const = 0;
  virtual int num_constraints() const = 0;
  virtual std::span<const double> variable_lower() const = 0;
  virtual std::span<const double> variable_upper() const = 0;
  virtual std::span<const double> constraint_lower() const = 0;
  virtual std::span<const double> constraint_upper() const = 0;
  virtual std::vector<double> initial_point() const = 0;

  virtual double objective(std::span<const double> x) const = 0;
  virtual void objective_gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual void constraints(std::span<const double> x, std::span<double> g) const = 0;
  /// Fixed for the lifetime of the problem. Entries are unique.
  virtual const std::vector<JacobianEntry>& jacobian_pattern() const = 0;
  /// Values in the order of jacobian_pattern().
  virtual void jacobian_values(std::span<const double> x, std::span<double> values) const = 0;
};

enum class Backend { Default, Ipopt, Builtin };

std::string_view to_string(Backend backend);
/// Parses "ipopt" or "builtin"; nullopt otherwise.
std::optional<Backend> parse_backend(std::string_view name);
bool backend_available(Backend backend);
/// Resolves Default using ASLIP_NLP_BACKEND, then Ipopt if compiled in, then Builtin.
Backend resolve_backend(Backend requested);

struct SolverOptions {
  double constraint_tol = 1e-6;
  double optimality_tol = 1e-6;
  int max_iterations = 3000;
  int verbosity = 0;
  Backend backend = Backend::Default;

  void validate() const;
};

enum class SolveStatus { Optimal, Feasible, Infeasible, IterationLimit, Error };

std::string_view to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::Error;
  std::vector<double> x;
  double objective = 0.0;
  double violation = kInf;  // max bound/constraint violation at x
  int iterations = 0;
  Backend backend = Backend::Builtin;
  std::string message;

  bool success() const { return status == SolveStatus::Optimal || status == SolveStatus::Feasible; }
};

SolveResult solve(const NlpProblem& problem, const SolverOptions& options = {});

/// Largest violation of variable bounds and constraint bounds at x.
double constraint_violation(const NlpProblem& problem, std::span<const double> x);

struct JacobianCheckOptions {
  double rel_step = 1e-6;
  double step_floor = 1e-8;
  /// Errors are |a - n| / max(|a|, |n|, scale_floor); the default makes an
  /// absolute error of 1e-8 count as 1e-6.
  double scale_floor = 1e-2;
  /// Finite-difference magnitude above which an entry outside the pattern is reported.
  double pattern_threshold = 1e-7;
};

struct JacobianCheck {
  double max_error = 0.0;  // max of the two below
  double max_constraint_error = 0.0;
  double max_gradient_error = 0.0;
  int worst_row = -2;  // -1 = objective gradient, -2 = nothing compared
  int worst_col = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<JacobianEntry> outside_pattern;
  int entries_checked = 0;

  bool passed(double tol) const { return max_error <= tol && outside_pattern.empty(); }
};

JacobianCheck check_jacobian(const NlpProblem& problem, std::span<const double> x,
                             const JacobianCheckOptions& options = {});

/// Reproducible point strictly inside the variable box, scattered around the
/// initial point by a relative and an absolute perturbation of size `spread`.
std::vector<double> random_interior_point(const NlpProblem& problem, std::uint64_t seed, double spread = 0.05);

namespace detail {
SolveResult solve_builtin(const NlpProblem& problem, const SolverOptions& options);
SolveResult solve_ipopt(const NlpProblem& problem, const SolverOptions& options);
}  // namespace detail

}  // namespace aslip

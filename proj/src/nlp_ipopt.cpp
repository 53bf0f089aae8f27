// Ipopt backend (limited-memory Hessian, first derivatives only).

#include <IpIpoptApplication.hpp>
#include <IpSolveStatistics.hpp>
#include <IpTNLP.hpp>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "aslip/error.hpp"
#include "aslip/nlp.hpp"

namespace aslip::detail {
namespace {

using Ipopt::Index;
using Ipopt::Number;

class Adapter : public Ipopt::TNLP {
 public:
  explicit Adapter(const NlpProblem& p) : p_(p), n_(p.num_variables()) {}

  bool get_nlp_info(Index& n, Index& m, Index& nnz_jac, Index& nnz_h, IndexStyleEnum& style) override {
    n = n_;
    m = p_.num_constraints();
    nnz_jac = static_cast<Index>(p_.jacobian_pattern().size());
    nnz_h = 0;
    style = C_STYLE;
    return true;
  }

  bool get_bounds_info(Index n, Number* xl, Number* xu, Index m, Number* gl, Number* gu) override {
    auto big = [](double v) { return std::clamp(v, -1e19, 1e19); };
    for (Index i = 0; i < n; ++i) {
      xl[i] = big(p_.variable_lower()[i]);
      xu[i] = big(p_.variable_upper()[i]);
    }
    for (Index i = 0; i < m; ++i) {
      gl[i] = big(p_.constraint_lower()[i]);
      gu[i] = big(p_.constraint_upper()[i]);
    }
    return true;
  }

  bool get_starting_point(Index n, bool init_x, Number* x, bool init_z, Number*, Number*, Index, bool init_lambda,
                          Number*) override {
    if (!init_x || init_z || init_lambda) return false;
    const auto x0 = p_.initial_point();
    if (static_cast<Index>(x0.size()) != n) return false;
    std::copy(x0.begin(), x0.end(), x);
    return true;
  }

  bool eval_f(Index n, const Number* x, bool, Number& f) override {
    return guarded([&] {
      f = p_.objective(span(x, n));
      return std::isfinite(f) || fault("objective is not finite");
    });
  }

  bool eval_grad_f(Index n, const Number* x, bool, Number* g) override {
    return guarded([&] {
      p_.objective_gradient(span(x, n), std::span<double>(g, n));
      return finite(g, n, "objective gradient");
    });
  }

  bool eval_g(Index n, const Number* x, bool, Index m, Number* g) override {
    return guarded([&] {
      p_.constraints(span(x, n), std::span<double>(g, m));
      return finite(g, m, "constraint row");
    });
  }

  bool eval_jac_g(Index n, const Number* x, bool, Index, Index nele, Index* rows, Index* cols,
                  Number* values) override {
    if (!values) {
      const auto& pat = p_.jacobian_pattern();
      for (Index k = 0; k < nele; ++k) {
        rows[k] = pat[k].row;
        cols[k] = pat[k].col;
      }
      return true;
    }
    return guarded([&] {
      p_.jacobian_values(span(x, n), std::span<double>(values, nele));
      return finite(values, nele, "Jacobian entry");
    });
  }

  void finalize_solution(Ipopt::SolverReturn, Index n, const Number* x, const Number*, const Number*, Index,
                         const Number*, const Number*, Number, const Ipopt::IpoptData*,
                         Ipopt::IpoptCalculatedQuantities*) override {
    solution_.assign(x, x + n);
  }

  std::vector<double> solution_;
  std::string last_fault_;

 private:
  static std::span<const double> span(const Number* x, Index n) { return {x, static_cast<std::size_t>(n)}; }

  bool fault(std::string what) {
    last_fault_ = std::move(what);
    return false;
  }

  bool finite(const Number* v, Index count, const char* what) {
    for (Index i = 0; i < count; ++i)
      if (!std::isfinite(v[i])) return fault(std::string(what) + " " + std::to_string(i) + " is not finite");
    return true;
  }

  template <class F>
  bool guarded(F&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return fault(std::string("evaluator threw: ") + e.what());
    }
  }

  const NlpProblem& p_;
  Index n_;
};

}  // namespace

SolveResult solve_ipopt(const NlpProblem& problem, const SolverOptions& options) {
  // The bundled MUMPS keeps global state; one Ipopt solve at a time per process.
  static std::mutex mumps_lock;
  const std::lock_guard<std::mutex> hold(mumps_lock);
  Ipopt::SmartPtr<Adapter> nlp = new Adapter(problem);
  Ipopt::SmartPtr<Ipopt::IpoptApplication> app = IpoptApplicationFactory();
  auto& o = *app->Options();
  o.SetIntegerValue("print_level", options.verbosity > 0 ? 5 : 0);
  o.SetStringValue("sb", "yes");
  o.SetStringValue("hessian_approximation", "limited-memory");
  o.SetNumericValue("tol", options.optimality_tol);
  o.SetNumericValue("constr_viol_tol", options.constraint_tol);
  o.SetNumericValue("acceptable_constr_viol_tol", options.constraint_tol);
  o.SetIntegerValue("max_iter", options.max_iterations);
  o.SetStringValue("mu_strategy", "adaptive");

  SolveResult res;
  if (app->Initialize() != Ipopt::Solve_Succeeded) {
    res.message = "Ipopt initialization failed";
    return res;
  }
  const Ipopt::ApplicationReturnStatus st = app->OptimizeTNLP(Ipopt::SmartPtr<Ipopt::TNLP>(GetRawPtr(nlp)));
  res.x = nlp->solution_;
  if (auto stats = app->Statistics(); Ipopt::IsValid(stats)) res.iterations = stats->IterationCount();

  switch (st) {
    case Ipopt::Solve_Succeeded:
      res.status = SolveStatus::Optimal;
      break;
    case Ipopt::Solved_To_Acceptable_Level:
      res.status = SolveStatus::Feasible;
      res.message = "solved to acceptable level";
      break;
    case Ipopt::Infeasible_Problem_Detected:
    case Ipopt::Restoration_Failed:
    case Ipopt::Search_Direction_Becomes_Too_Small:
      res.status = SolveStatus::Infeasible;
      res.message = "Ipopt return status " + std::to_string(static_cast<int>(st));
      break;
    case Ipopt::Maximum_Iterations_Exceeded:
    case Ipopt::Maximum_CpuTime_Exceeded:
    case Ipopt::Maximum_WallTime_Exceeded:
      res.status = SolveStatus::IterationLimit;
      res.message = "iteration limit reached";
      break;
    default:
      res.status = SolveStatus::Error;
      res.message = "Ipopt return status " + std::to_string(static_cast<int>(st));
      if (!nlp->last_fault_.empty()) res.message += ": " + nlp->last_fault_;
      break;
  }
  // An iteration-limited iterate that happens to be feasible is still usable.
  if (res.status == SolveStatus::IterationLimit && !res.x.empty() &&
      constraint_violation(problem, res.x) <= options.constraint_tol)
    res.status = SolveStatus::Feasible;
  return res;
}

}  // namespace aslip::detail

// Built-in backend: bound-constrained augmented Lagrangian.
//
// Inequality rows get a bounded slack so every row becomes r(z) = 0 over a
// box. Each subproblem minimizes
//   f(x) + lambda' r + rho/2 |r|^2
// over the box with a projected Gauss-Newton method: the model Hessian is a
// finite-difference Hessian of f plus rho J'J plus a Levenberg damping term,
// factored on the free variables with a sparse LDL'.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "aslip/error.hpp"
#include "aslip/nlp.hpp"

namespace aslip::detail {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

struct EvalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NlpProblem& p, const SolverOptions& o) : p_(p), opt_(o) {
    n_ = p.num_variables();
    m_ = p.num_constraints();
    const auto gl = p.constraint_lower(), gu = p.constraint_upper();
    slack_of_.assign(m_, -1);
    for (int i = 0; i < m_; ++i)
      if (gl[i] != gu[i]) slack_of_[i] = n_ + ns_++;
    nz_ = n_ + ns_;
    lo_.resize(nz_);
    hi_.resize(nz_);
    for (int i = 0; i < n_; ++i) {
      lo_[i] = p.variable_lower()[i];
      hi_[i] = p.variable_upper()[i];
    }
    for (int i = 0; i < m_; ++i)
      if (slack_of_[i] >= 0) {
        lo_[slack_of_[i]] = gl[i];
        hi_[slack_of_[i]] = gu[i];
      }
    g_.resize(m_);
    jac_.resize(p.jacobian_pattern().size());
  }

  SolveResult run() {
    SolveResult res;
    Vec z(nz_);
    {
      const auto x0 = p_.initial_point();
      if (static_cast<int>(x0.size()) != n_) throw Error(ErrorCode::InvalidParameters, "initial point has wrong size");
      for (int i = 0; i < n_; ++i) z[i] = std::clamp(x0[i], lo_[i], hi_[i]);
      eval_constraints(z);
      for (int i = 0; i < m_; ++i)
        if (slack_of_[i] >= 0) z[slack_of_[i]] = std::clamp(g_[i], lo_[slack_of_[i]], hi_[slack_of_[i]]);
    }

    Vec lambda = Vec::Zero(m_);
    double rho = 10.0;
    double omega = 1.0 / rho, eta = 1.0 / std::pow(rho, 0.1);
    int iterations = 0;

    for (int outer = 0;; ++outer) {
      const InnerResult inner = minimize(z, lambda, rho, std::max(omega, 0.1 * opt_.optimality_tol), iterations);
      const Vec r = residual(z);
      const double viol = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
      if (opt_.verbosity > 0)
        std::fprintf(stderr, "al %3d  iters %5d  rho %.1e  viol %.3e  pgrad %.3e  f %.6e\n", outer, iterations, rho,
                     viol, inner.pgrad, objective(z));

      if (viol <= eta || viol <= opt_.constraint_tol) {
        lambda += rho * r;
        const double kkt = lagrangian_pgrad(z, lambda);
        if (viol <= opt_.constraint_tol && kkt <= opt_.optimality_tol) return finish(z, SolveStatus::Optimal, iterations, "");
        eta = std::max(eta / std::pow(rho, 0.9), 0.1 * opt_.constraint_tol);
        omega = std::max(omega / rho, 0.1 * opt_.optimality_tol);
      } else {
        rho *= 10.0;
        eta = std::max(1.0 / std::pow(rho, 0.1), 0.1 * opt_.constraint_tol);
        omega = 1.0 / rho;
      }
      if (inner.stalled && rho > 1e12) {
        const SolveStatus s = viol <= opt_.constraint_tol ? SolveStatus::Feasible : SolveStatus::Infeasible;
        return finish(z, s, iterations, "penalty parameter limit reached");
      }
      if (iterations >= opt_.max_iterations) {
        const SolveStatus s = viol <= opt_.constraint_tol ? SolveStatus::Feasible : SolveStatus::IterationLimit;
        return finish(z, s, iterations, "iteration limit reached");
      }
    }
  }

 private:
  struct InnerResult {
    double pgrad = 0.0;
    bool stalled = false;
  };

  std::span<const double> xspan(const Vec& z) const { return {z.data(), static_cast<std::size_t>(n_)}; }

  double objective(const Vec& z) const {
    const double f = p_.objective(xspan(z));
    if (!std::isfinite(f)) throw EvalFailure("objective is not finite");
    return f;
  }

  void eval_constraints(const Vec& z) {
    p_.constraints(xspan(z), g_);
    for (int i = 0; i < m_; ++i)
      if (!std::isfinite(g_[i])) throw EvalFailure("constraint row " + std::to_string(i) + " is not finite");
  }

  Vec residual(const Vec& z) {
    eval_constraints(z);
    Vec r(m_);
    const auto gl = p_.constraint_lower();
    for (int i = 0; i < m_; ++i) r[i] = slack_of_[i] >= 0 ? g_[i] - z[slack_of_[i]] : g_[i] - gl[i];
    return r;
  }

  SpMat jacobian(const Vec& z) {
    p_.jacobian_values(xspan(z), jac_);
    std::vector<Triplet> t;
    t.reserve(jac_.size() + ns_);
    const auto& pat = p_.jacobian_pattern();
    for (std::size_t k = 0; k < pat.size(); ++k) {
      if (!std::isfinite(jac_[k]))
        throw EvalFailure("Jacobian entry (" + std::to_string(pat[k].row) + ", " + std::to_string(pat[k].col) +
                          ") is not finite");
      t.emplace_back(pat[k].row, pat[k].col, jac_[k]);
    }
    for (int i = 0; i < m_; ++i)
      if (slack_of_[i] >= 0) t.emplace_back(i, slack_of_[i], -1.0);
    SpMat J(m_, nz_);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

  Vec objective_gradient(const Vec& z) const {
    Vec grad = Vec::Zero(nz_);
    p_.objective_gradient(xspan(z), std::span<double>(grad.data(), n_));
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(grad[i])) throw EvalFailure("objective gradient entry " + std::to_string(i) + " is not finite");
    return grad;
  }

  // Forward-difference Hessian of f, symmetrized; columns whose gradient does
  // not move are skipped cheaply.
  std::vector<Triplet> objective_hessian(const Vec& z, const Vec& grad) const {
    std::vector<Triplet> t;
    Vec zz = z;
    for (int j = 0; j < n_; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
      zz[j] = z[j] + h;
      const Vec gp = objective_gradient(zz);
      zz[j] = z[j];
      for (int i = 0; i < n_; ++i) {
        const double d = (gp[i] - grad[i]) / h;
        if (std::abs(d) > 1e-9) {
          t.emplace_back(i, j, 0.5 * d);
          t.emplace_back(j, i, 0.5 * d);
        }
      }
    }
    return t;
  }

  Vec project(const Vec& z) const { return z.cwiseMax(lo_).cwiseMin(hi_); }

  double pgrad_norm(const Vec& z, const Vec& grad) const {
    return nz_ ? (project(z - grad) - z).cwiseAbs().maxCoeff() : 0.0;
  }

  double lagrangian_pgrad(const Vec& z, const Vec& y) {
    const Vec grad = objective_gradient(z) + jacobian(z).transpose() * y;
    return pgrad_norm(z, grad);
  }

  InnerResult minimize(Vec& z, const Vec& lambda, double rho, double tol, int& iterations) {
    double damping = 1e-8;
    InnerResult out;
    Vec r = residual(z);
    double merit = objective(z) + lambda.dot(r) + 0.5 * rho * r.squaredNorm();

    while (iterations < opt_.max_iterations) {
      const SpMat J = jacobian(z);
      const Vec fgrad = objective_gradient(z);
      const Vec grad = fgrad + J.transpose() * (lambda + rho * r);
      out.pgrad = pgrad_norm(z, grad);
      if (out.pgrad <= tol) return out;
      ++iterations;

      // Variables held at a bound by the gradient.
      const double eps = std::min(1e-8, out.pgrad);
      std::vector<char> active(nz_, 0);
      for (int i = 0; i < nz_; ++i)
        active[i] = (z[i] <= lo_[i] + eps && grad[i] > 0) || (z[i] >= hi_[i] - eps && grad[i] < 0);

      SpMat B = SpMat(J.transpose()) * J * rho;
      {
        const auto th = objective_hessian(z, fgrad);
        if (!th.empty()) {
          SpMat H(nz_, nz_);
          H.setFromTriplets(th.begin(), th.end());
          B += H;
        }
      }

      bool accepted = false;
      for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
        std::vector<Triplet> t;
        t.reserve(B.nonZeros() + nz_);
        for (int k = 0; k < B.outerSize(); ++k)
          for (SpMat::InnerIterator it(B, k); it; ++it)
            if (!active[it.row()] && !active[it.col()]) t.emplace_back(it.row(), it.col(), it.value());
        for (int i = 0; i < nz_; ++i) t.emplace_back(i, i, active[i] ? 1.0 : damping * (1.0 + B.coeff(i, i)));
        SpMat K(nz_, nz_);
        K.setFromTriplets(t.begin(), t.end());
        Vec rhs = -grad;
        for (int i = 0; i < nz_; ++i)
          if (active[i]) rhs[i] = 0.0;

        Eigen::SimplicialLDLT<SpMat> ldlt(K);
        if (ldlt.info() != Eigen::Success) {
          damping *= 100.0;
          continue;
        }
        const Vec d = ldlt.solve(rhs);
        if (!d.allFinite()) {
          damping *= 100.0;
          continue;
        }

        double alpha = 1.0;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
          const Vec trial = project(z + alpha * d);
          const Vec step = trial - z;
          const double decrease = grad.dot(step);
          if (!(decrease < 0.0)) break;
          double trial_merit;
          Vec trial_r;
          try {
            trial_r = residual(trial);
            trial_merit = objective(trial) + lambda.dot(trial_r) + 0.5 * rho * trial_r.squaredNorm();
          } catch (const EvalFailure&) {
            continue;
          }
          if (trial_merit <= merit + 1e-4 * decrease) {
            z = trial;
            r = trial_r;
            merit = trial_merit;
            accepted = true;
            break;
          }
        }
        if (accepted) {
          damping = std::max(damping * (alpha == 1.0 ? 0.1 : 1.0), 1e-12);
        } else {
          damping *= 100.0;
        }
      }
      if (!accepted) {
        out.stalled = true;
        r = residual(z);  // restore evaluation state
        return out;
      }
    }
    return out;
  }

  SolveResult finish(const Vec& z, SolveStatus status, int iterations, std::string message) const {
    SolveResult res;
    res.status = status;
    res.x.assign(z.data(), z.data() + n_);
    res.iterations = iterations;
    res.message = std::move(message);
    return res;
  }

  const NlpProblem& p_;
  const SolverOptions& opt_;
  int n_ = 0, m_ = 0, ns_ = 0, nz_ = 0;
  std::vector<int> slack_of_;
  Vec lo_, hi_;
  std::vector<double> g_, jac_;
};

}  // namespace

SolveResult solve_builtin(const NlpProblem& problem, const SolverOptions& options) {
  try {
    return AugmentedLagrangian(problem, options).run();
  } catch (const EvalFailure& e) {
    SolveResult r;
    r.status = SolveStatus::Error;
    r.message = std::string("evaluator fault: ") + e.what();
    return r;
  } catch (const std::exception& e) {
    SolveResult r;
    r.status = SolveStatus::Error;
    r.message = std::string("evaluator threw: ") + e.what();
    return r;
  }
}

#ifndef ASLIP_HAVE_IPOPT
SolveResult solve_ipopt(const NlpProblem&, const SolverOptions&) {
  throw Error(ErrorCode::InvalidParameters, "Ipopt backend not compiled in");
}
#endif

}  // namespace aslip::detail

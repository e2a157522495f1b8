#pragma once

#include <stdexcept>
#include <vector>

#include "jerkctl/linalg.hpp"
#include "jerkctl/wrench_param.hpp"

namespace jerkctl {

// Thrown when a map that a law needs to invert drops rank at the working
// tolerance. Carries the residual actually achieved by the least-squares
// fallback so callers can decide whether to keep going.
class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Snapshot of the floating-base constrained dynamics
//   M nu_dot + h = J^T f + B tau
// n is the actuated joint count; M is (n+6)x(n+6) SPD, J is 6n_c x (n+6)
// full row rank, B = [0_{6xn}; I_n].
struct DynamicsSample {
  Mat M;
  Vec h;
  Mat J;
  Vec Jdot_nu;
  Mat B;
  int n = 0;
  int n_c = 0;
};

// Equality-constrained least squares at jerk level over u = (nu_ddot, xi_dot,
// tau_dot):
//   min_u  || A_task_dot y + A_task P u - a_star_dot ||
//   s.t.   D_dot y + D P u = beta_dot
// y is the current (acceleration-level) stacked state (nu_dot, f, tau).
// D_dot, A_task_dot and beta_dot may be left zero when derivative estimates
// are unavailable.
struct SotProblem {
  Mat D;
  Mat D_dot;
  Vec beta_dot;
  Mat A_task;
  Mat A_task_dot;
  Vec a_star_dot;
  Vec y;
  Mat P;
};

// P = blockdiag(I_{n+6}, Phi(xi), I_n); maps u = (nu_ddot, xi_dot, tau_dot)
// onto the derivative (nu_ddot, f_dot, tau_dot) of y.
Mat build_P(const Vec& xis, const std::vector<ContactGeometry>& geoms, int n);

// Minimal-norm solution u = u_p + N u_z with u_p = pinv(DP)(beta_dot - D_dot
// y) and u_z the least-squares minimizer of the task over the constraint
// null space. Throws RankDeficiencyError when DP loses row rank at tol.
Vec solve_jerk_sot(const SotProblem& p, double tol = 1e-8);

}  // namespace jerkctl

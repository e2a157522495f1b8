#include "jerkctl/jerk_sot.hpp"

namespace jerkctl {

Mat build_P(const Vec& xis, const std::vector<ContactGeometry>& geoms, int n) {
  const auto n_c = static_cast<Eigen::Index>(geoms.size());
  const Eigen::Index dim = (n + 6) + 6 * n_c + n;
  Mat P = Mat::Identity(dim, dim);
  P.block(n + 6, n + 6, 6 * n_c, 6 * n_c) = stack_gradient(xis, geoms);
  return P;
}

Vec solve_jerk_sot(const SotProblem& p, double tol) {
  const Mat DP = p.D * p.P;
  const Vec rhs_c = p.beta_dot - p.D_dot * p.y;
  const Vec u_p = pinv(DP, tol) * rhs_c;

  const double c_res = (DP * u_p - rhs_c).norm();
  if (c_res > 1e-8 * (1.0 + rhs_c.norm()))
    throw RankDeficiencyError("solve_jerk_sot: constraint rows are rank deficient",
                              c_res);

  const Mat N = nullspace_projector(DP, tol);
  const Mat AP = p.A_task * p.P;
  const Vec task_rhs = p.a_star_dot - p.A_task_dot * p.y - AP * u_p;
  // pinv output lives in the row space of AP*N, itself inside range(N), so
  // the projection is already folded in and u stays minimal-norm.
  const Vec u_z = pinv(AP * N, tol) * task_rhs;
  return u_p + N * u_z;
}

}  // namespace jerkctl

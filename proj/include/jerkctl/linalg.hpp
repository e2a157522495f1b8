#pragma once
// Small dense linear algebra shared by the control and simulation layers:
// rank-tolerant pseudoinverse, null-space projector, skew operator,
// block-diagonal assembly.

#include <Eigen/Dense>
#include <vector>

namespace jerkctl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Default relative rank tolerance: singular values <= tol * sigma_max are
// treated as zero. Controllers divide by possibly ill-conditioned maps far
// from equilibrium; truncation degrades gracefully where a direct inverse
// would blow up.
inline constexpr double kDefaultPinvTol = 1e-10;

Mat pinv(const Mat& m, double tol = kDefaultPinvTol);

// N = I - pinv(m) * m. Symmetric, idempotent, m * N = 0.
Mat nullspace_projector(const Mat& m, double tol = kDefaultPinvTol);

// Rank at the same relative tolerance convention as pinv.
int rank_at_tol(const Mat& m, double tol);

// S(x) y = x cross y; S(x)^T = -S(x).
Mat3 skew(const Vec3& x);

Mat block_diag(const std::vector<Mat>& blocks);

}  // namespace jerkctl

#include "jerkctl/linalg.hpp"

#include <stdexcept>

namespace jerkctl {

Mat pinv(const Mat& m, double tol) {
  if (!m.allFinite())
    throw std::invalid_argument("pinv: input has non-finite entries");
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return Mat::Zero(m.cols(), m.rows());
  const double cut = tol * sv(0);
  Vec inv = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat nullspace_projector(const Mat& m, double tol) {
  return Mat::Identity(m.cols(), m.cols()) - pinv(m, tol) * m;
}

int rank_at_tol(const Mat& m, double tol) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cut = tol * sv(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++r;
  return r;
}

Mat3 skew(const Vec3& x) {
  Mat3 s;
  s << 0.0, -x(2), x(1),
       x(2), 0.0, -x(0),
      -x(1), x(0), 0.0;
  return s;
}

Mat block_diag(const std::vector<Mat>& blocks) {
  if (blocks.empty())
    throw std::invalid_argument("block_diag: needs at least one block");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) { rows += b.rows(); cols += b.cols(); }
  Mat out = Mat::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace jerkctl

#include "jerkctl/momentum.hpp"

#include <stdexcept>

namespace jerkctl {

Mat contact_map(const std::vector<ContactFrame>& frames, const Vec3& com) {
  const auto n_c = static_cast<Eigen::Index>(frames.size());
  Mat A = Mat::Zero(6, 6 * n_c);
  for (Eigen::Index k = 0; k < n_c; ++k) {
    A.block<3, 3>(0, 6 * k) = Mat3::Identity();
    A.block<3, 3>(3, 6 * k) = skew(frames[k].origin - com);
    A.block<3, 3>(3, 6 * k + 3) = Mat3::Identity();
  }
  return A;
}

Mat contact_map_dot(const std::vector<ContactFrame>& frames,
                    const Vec3& com_velocity) {
  const auto n_c = static_cast<Eigen::Index>(frames.size());
  Mat Ad = Mat::Zero(6, 6 * n_c);
  for (Eigen::Index k = 0; k < n_c; ++k)
    Ad.block<3, 3>(3, 6 * k) = skew(frames[k].origin_velocity - com_velocity);
  return Ad;
}

Vec6 hdot(const Mat& A, const Vec& f, double m, double g) {
  Vec6 d = A * f;
  d(2) -= m * g;
  return d;
}

Vec6 hddot(const Vec& xi, const Vec& xi_dot, const Vec& f, const Mat& A,
           const Mat& A_dot, const std::vector<ContactGeometry>& geoms) {
  const auto dim = static_cast<Eigen::Index>(6 * geoms.size());
  if (xi.size() != dim || xi_dot.size() != dim || f.size() != dim ||
      A.cols() != dim || A_dot.cols() != dim)
    throw std::invalid_argument("hddot: stacked dimensions disagree");
  const Mat P = stack_gradient(xi, geoms);
  return A * (P * xi_dot) + A_dot * f;
}

MomentumState plant_step(const MomentumState& state,
                         const std::vector<ContactFrame>& frames, const Vec& f,
                         double dt, const Vec6& disturbance) {
  if (f.size() != static_cast<Eigen::Index>(6 * frames.size()))
    throw std::invalid_argument("plant_step: wrench stack does not match contacts");

  const double m = state.m;
  const double g = state.g;
  auto deriv = [&](const Vec6& H, const Vec3& com, Vec6& Hd, Vec3& cd) {
    Hd = hdot(contact_map(frames, com), f, m, g) + disturbance;
    cd = H.head<3>() / m;
  };

  Vec6 k1H, k2H, k3H, k4H;
  Vec3 k1c, k2c, k3c, k4c;
  deriv(state.H, state.com, k1H, k1c);
  deriv(state.H + 0.5 * dt * k1H, state.com + 0.5 * dt * k1c, k2H, k2c);
  deriv(state.H + 0.5 * dt * k2H, state.com + 0.5 * dt * k2c, k3H, k3c);
  deriv(state.H + dt * k3H, state.com + dt * k3c, k4H, k4c);

  MomentumState next = state;
  next.H += (dt / 6.0) * (k1H + 2.0 * k2H + 2.0 * k3H + k4H);
  next.com += (dt / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
  return next;
}

}  // namespace jerkctl

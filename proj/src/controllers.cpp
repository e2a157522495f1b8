#include "jerkctl/controllers.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace jerkctl {

namespace {

void require_spd(const Mat& G, const std::string& name) {
  if (G.rows() != G.cols())
    throw std::invalid_argument("GainSet: " + name + " must be square");
  const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("GainSet: " + name + " must be symmetric");
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("GainSet: " + name + " must be positive definite");
}

// Everything the momentum laws share: the contact map and its derivative at
// the current CoM, the stacked gradient, and the measured error signals.
struct LawContext {
  Mat A;
  Mat A_dot;
  Mat Phi;
  Mat APhi;
  Vec6 Herr;
  Vec6 Herr_dot;
  Vec f_meas;
};

LawContext make_context(const MomentumState& state,
                        const std::vector<ContactFrame>& frames, const Vec& xi,
                        const Vec& f_meas, const RefSample& ref) {
  LawContext c;
  std::vector<ContactGeometry> geoms;
  geoms.reserve(frames.size());
  for (const auto& fr : frames) geoms.push_back(fr.geometry);
  c.A = contact_map(frames, state.com);
  c.A_dot = contact_map_dot(frames, state.H.head<3>() / state.m);
  c.Phi = stack_gradient(xi, geoms);
  c.APhi = c.A * c.Phi;
  c.Herr = state.H - ref.H;
  c.Herr_dot = hdot(c.A, f_meas, state.m, state.g) - ref.H_dot;
  c.f_meas = f_meas;
  return c;
}

XidotResult solve_rate(const LawContext& c, const Vec6& target_hddot,
                       const Vec* xi0) {
  XidotResult r;
  const Vec rhs = target_hddot - c.A_dot * c.f_meas;
  const Mat APhi_pinv = pinv(c.APhi, kRankTol);
  r.xi_dot = APhi_pinv * rhs;
  r.residual = (c.APhi * r.xi_dot - rhs).norm() / (1.0 + rhs.norm());
  r.N = Mat::Identity(c.APhi.cols(), c.APhi.cols()) - APhi_pinv * c.APhi;
  if (rank_at_tol(c.APhi, kRankTol) < c.APhi.rows())
    throw RankDeficiencyError(
        "momentum law: A*Phi lost row rank, control authority degraded",
        r.residual);
  if (xi0 && xi0->size() == r.xi_dot.size()) r.xi_dot += r.N * (*xi0);
  return r;
}

}  // namespace

GainSet GainSet::make(const Mat6& Kp, const Mat6& Kd, const Mat6& Ko,
                      const Mat6& Ki, double k_e, const Mat& K_tau) {
  require_spd(Kp, "Kp");
  require_spd(Kd, "Kd");
  require_spd(Ko, "Ko");
  if (!Ki.isZero(0.0)) require_spd(Ki, "Ki");
  if (K_tau.size() > 0) require_spd(K_tau, "K_tau");
  if (!(k_e >= 0.0))
    throw std::invalid_argument("GainSet: k_e must be >= 0");
  GainSet g;
  g.Kp = Kp;
  g.Kd = Kd;
  g.Ko = Ko;
  g.Ki = Ki;
  g.k_e = k_e;
  g.K_tau = K_tau;
  return g;
}

XidotResult fb_lin_xidot(const MomentumState& state,
                         const std::vector<ContactFrame>& frames,
                         const Vec& xi, const Vec& f_meas, const RefSample& ref,
                         const GainSet& gains, bool with_integral,
                         const Vec* xi0) {
  const LawContext c = make_context(state, frames, xi, f_meas, ref);
  Vec6 hddot_star = ref.H_ddot - gains.Kd * c.Herr_dot - gains.Kp * c.Herr;
  if (with_integral) hddot_star -= gains.Ki * state.I_err;
  return solve_rate(c, hddot_star, xi0);
}

XidotResult momentum_jerk_xidot(const MomentumState& state,
                                const std::vector<ContactFrame>& frames,
                                const Vec& xi, const Vec& f_meas,
                                const RefSample& ref, const GainSet& gains,
                                const Vec* xi0) {
  const LawContext c = make_context(state, frames, xi, f_meas, ref);
  const Vec6 Ko_inv_Herr = gains.Ko.llt().solve(c.Herr);
  const Vec6 target = ref.H_ddot - (gains.Kd * c.Herr_dot + c.Herr_dot) -
                      (gains.Kd * c.Herr + Ko_inv_Herr + gains.Kp * c.Herr) -
                      gains.Kp * state.I_err;
  return solve_rate(c, target, xi0);
}

XidotResult regularized_xidot(const MomentumState& state,
                              const std::vector<ContactFrame>& frames,
                              const Vec& xi, const Vec& f_meas,
                              const RefSample& ref, const GainSet& gains,
                              const Vec& xi_d, const Vec* xi0) {
  XidotResult r = momentum_jerk_xidot(state, frames, xi, f_meas, ref, gains, xi0);
  r.xi_dot -= gains.k_e * (xi - xi_d);
  return r;
}

XiTarget compute_xi_d(const Vec6& H_dot_d,
                      const std::vector<ContactFrame>& frames, const Vec3& com,
                      double m, double g) {
  const Mat A = contact_map(frames, com);
  Vec6 b = H_dot_d;
  b(2) += m * g;
  XiTarget out;
  out.f_d = pinv(A) * b;
  out.xi_d.resize(out.f_d.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const InverseResult inv = phi_inverse(
        out.f_d.segment<6>(6 * static_cast<Eigen::Index>(k)),
        frames[k].geometry);
    out.xi_d.segment<6>(6 * static_cast<Eigen::Index>(k)) = inv.xi;
    out.saturated = out.saturated || inv.saturated;
  }
  return out;
}

namespace {

struct TorqueSystem {
  Mat Lambda;
  Vec rhs;
};

TorqueSystem torque_system(const DynamicsSample& sample, const Vec& f) {
  const Eigen::LLT<Mat> Mllt(sample.M);
  TorqueSystem t;
  t.Lambda = sample.J * Mllt.solve(sample.B);
  t.rhs = sample.J * Mllt.solve(sample.h - sample.J.transpose() * f) -
          sample.Jdot_nu;
  return t;
}

}  // namespace

Vec torque_from_wrench(const DynamicsSample& sample, const Vec& f,
                       const Vec& tau0) {
  const auto [Lambda, rhs] = torque_system(sample, f);
  const Mat Lp = pinv(Lambda, kRankTol);
  Vec tau = Lp * rhs;
  const double residual = (Lambda * tau - rhs).norm() / (1.0 + rhs.norm());
  if (residual > 1e-8)
    throw RankDeficiencyError(
        "torque_from_wrench: requested wrench outside actuation range",
        residual);
  if (tau0.size() == tau.size() && tau0.size() > 0)
    tau += (Mat::Identity(Lambda.cols(), Lambda.cols()) - Lp * Lambda) * tau0;
  return tau;
}

Vec torque_readout(const DynamicsSample& sample, const Vec& f) {
  const auto [Lambda, rhs] = torque_system(sample, f);
  return pinv(Lambda, kRankTol) * rhs;
}

Vec xi0_torque_min(const DynamicsSample& sample, const Vec& f, const Vec& xis,
                   const std::vector<ContactGeometry>& geoms, const Mat& N_aphi,
                   const Vec& xi_dot_1, const Vec& tau, const Mat& K_tau,
                   ThetaDotMode mode, const DynamicsSample* prev, double dt,
                   double rank_tol) {
  const Eigen::LLT<Mat> Mllt(sample.M);
  const Mat Lp = pinv(sample.J * Mllt.solve(sample.B), kRankTol);
  const Mat Theta = -Lp * (sample.J * Mllt.solve(sample.J.transpose()));

  const Mat ThetaPhi = Theta * stack_gradient(xis, geoms);
  const Mat G = ThetaPhi * N_aphi;
  if (G.norm() <= 1e-10 * std::max(1.0, ThetaPhi.norm()))
    return Vec::Zero(xis.size());

  Vec drive = ThetaPhi * xi_dot_1;
  if (K_tau.size() > 0) drive += K_tau * tau;
  if (mode == ThetaDotMode::kFiniteDifference) {
    if (!prev || !(dt > 0.0))
      throw std::invalid_argument(
          "xi0_torque_min: finite-difference mode needs a previous sample and dt");
    const Eigen::LLT<Mat> Mllt_p(prev->M);
    const Mat Lp_p = pinv(prev->J * Mllt_p.solve(prev->B), kRankTol);
    const Mat Theta_p = -Lp_p * (prev->J * Mllt_p.solve(prev->J.transpose()));
    const Vec theta =
        Lp * (sample.J * Mllt.solve(sample.h) - sample.Jdot_nu);
    const Vec theta_p =
        Lp_p * (prev->J * Mllt_p.solve(prev->h) - prev->Jdot_nu);
    drive += ((Theta - Theta_p) / dt) * f + (theta - theta_p) / dt;
  }
  return -pinv(G, rank_tol) * drive;
}

}  // namespace jerkctl

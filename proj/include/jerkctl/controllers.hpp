#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "jerkctl/jerk_sot.hpp"
#include "jerkctl/linalg.hpp"
#include "jerkctl/momentum.hpp"
#include "jerkctl/wrench_param.hpp"

namespace jerkctl {

// Relative rank tolerance for the A*Phi and Lambda pseudoinverses.
inline constexpr double kRankTol = 1e-8;

// Truncation tolerance for the torque-descent direction. The map from
// null-space xi rates to torque rates is structurally rank deficient, so the
// pseudoinverse keeps only directions with real authority; 1e-1 bounds the
// amplification of the retained directions at 10x.
inline constexpr double kXi0RankTol = 1e-1;

// An episode is declared diverged when ||H_err|| exceeds this factor times
// its initial value, or any state goes non-finite.
inline constexpr double kDivergenceFactor = 1e3;

struct GainSet {
  Mat6 Kp = Mat6::Identity();
  Mat6 Kd = Mat6::Identity();
  Mat6 Ko = Mat6::Identity();
  Mat6 Ki = Mat6::Zero();  // zero: third-order integral term disabled
  double k_e = 0.0;
  Mat K_tau;  // n x n, empty when the torque-decay term is unused

  // Validates symmetry and positive definiteness (Ki and K_tau only when
  // nonzero/nonempty); throws std::invalid_argument naming the offender.
  static GainSet make(const Mat6& Kp, const Mat6& Kd, const Mat6& Ko,
                      const Mat6& Ki = Mat6::Zero(), double k_e = 0.0,
                      const Mat& K_tau = Mat());
};

struct RefSample {
  Vec6 H = Vec6::Zero();
  Vec6 H_dot = Vec6::Zero();
  Vec6 H_ddot = Vec6::Zero();
};

// Momentum reference trajectory; defaults to rest at the origin.
struct Reference {
  std::function<RefSample(double)> eval;
  RefSample at(double t) const { return eval ? eval(t) : RefSample{}; }
};

// One law evaluation. N is the null-space projector of A*Phi so callers can
// add internal-motion terms without refactoring the pseudoinverse.
struct XidotResult {
  Vec xi_dot;
  Mat N;
  bool rank_degraded = false;
  double residual = 0.0;
};

// PD(+optional integral) feedback-linearizing law: solves
//   A Phi xi_dot + Adot f = Hddot_d - Kd Herr_dot - Kp Herr [- Ki I]
// for the minimal-norm xi_dot. Herr_dot comes from the measured wrench stack
// through hdot (force feedback path). Throws RankDeficiencyError when A*Phi
// drops row rank at kRankTol.
XidotResult fb_lin_xidot(const MomentumState& state,
                         const std::vector<ContactFrame>& frames,
                         const Vec& xi, const Vec& f_meas, const RefSample& ref,
                         const GainSet& gains, bool with_integral,
                         const Vec* xi0 = nullptr);

// Integral-augmented law:
//   xi_dot = pinv(A Phi) [Hddot_d - (Kd+I) Herr_dot
//                         - (Kd + Ko^-1 + Kp) Herr - Kp I - Adot f]
//            + N xi0
XidotResult momentum_jerk_xidot(const MomentumState& state,
                                const std::vector<ContactFrame>& frames,
                                const Vec& xi, const Vec& f_meas,
                                const RefSample& ref, const GainSet& gains,
                                const Vec* xi0 = nullptr);

// momentum_jerk_xidot plus the drift anchor -k_e (xi - xi_d).
XidotResult regularized_xidot(const MomentumState& state,
                              const std::vector<ContactFrame>& frames,
                              const Vec& xi, const Vec& f_meas,
                              const RefSample& ref, const GainSet& gains,
                              const Vec& xi_d, const Vec* xi0 = nullptr);

struct XiTarget {
  Vec xi_d;
  Vec f_d;
  bool saturated = false;  // true: reference needed wrenches outside the cone
};

// Minimum-norm wrench distribution for a momentum-rate reference, then the
// saturated per-contact inversion. saturated flags an infeasible reference.
XiTarget compute_xi_d(const Vec6& H_dot_d,
                      const std::vector<ContactFrame>& frames, const Vec3& com,
                      double m, double g);

// tau = pinv(Lambda) (J M^-1 (h - J^T f) - Jdot_nu) + N_Lambda tau0,
// Lambda = J M^-1 B. Throws RankDeficiencyError when the relation cannot be
// met at 1e-8 scaled (the wrench is outside what the actuation reaches).
Vec torque_from_wrench(const DynamicsSample& sample, const Vec& f,
                       const Vec& tau0 = Vec());

// Same least-squares formula without the reachability gate: the closest
// realizable torque. This is the telemetry/descent-objective quantity
// (tau = Theta f + theta); a low-DoF synthetic sample cannot realize an
// arbitrary wrench stack exactly, which for the readout is not an error.
Vec torque_readout(const DynamicsSample& sample, const Vec& f);

enum class ThetaDotMode {
  kZero,            // derivative terms set to zero
  kFiniteDifference // estimated from the previous DynamicsSample
};

// Null-space direction that descends ||tau||^2:
//   xi0 = -pinv(Theta Phi N) (Theta_dot f + Theta Phi xi_dot_1 + theta_dot
//                             + K_tau tau)
// with Theta = -pinv(Lambda) J M^-1 J^T and
// theta = pinv(Lambda) (J M^-1 h - Jdot_nu). Returns an exact zero vector
// when the effective null space is empty (always for n_c = 1).
Vec xi0_torque_min(const DynamicsSample& sample, const Vec& f, const Vec& xis,
                   const std::vector<ContactGeometry>& geoms, const Mat& N_aphi,
                   const Vec& xi_dot_1, const Vec& tau, const Mat& K_tau,
                   ThetaDotMode mode = ThetaDotMode::kZero,
                   const DynamicsSample* prev = nullptr, double dt = 0.0,
                   double rank_tol = kXi0RankTol);

}  // namespace jerkctl

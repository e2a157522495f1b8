#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "jerkctl/controllers.hpp"
#include "jerkctl/linalg.hpp"
#include "jerkctl/momentum.hpp"
#include "jerkctl/rng.hpp"
#include "jerkctl/wrench_param.hpp"
#include "oracles.hpp"

using namespace jerkctl;
using testutil::consistent_sample;
using testutil::random_geometry;
using testutil::random_spd;
using testutil::symmetric_geometry;

namespace {

template <typename Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

struct World {
  std::vector<ContactFrame> frames;
  std::vector<ContactGeometry> geoms;
  MomentumState state;
  Vec xi;
  Vec f_meas;
};

// Two-contact world with a randomized but well-conditioned configuration:
// moderate xi keeps the wrench gradient far from saturation so A*Phi stays
// full row rank.
World random_world(Rng& rng) {
  World w;
  for (int k = 0; k < 2; ++k) {
    ContactFrame fr;
    fr.origin = rng.uniform_vec(3, -0.3, 0.3);
    fr.origin_velocity = rng.uniform_vec(3, -0.2, 0.2);
    fr.geometry = random_geometry(rng);
    w.frames.push_back(fr);
    w.geoms.push_back(fr.geometry);
  }
  w.state.H = rng.gaussian_vec(6);
  w.state.com = rng.uniform_vec(3, -0.2, 0.2);
  w.state.I_err = 0.5 * rng.gaussian_vec(6);
  w.state.m = rng.uniform_in(1.0, 5.0);
  w.xi = rng.uniform_vec(12, -2.5, 2.5);
  w.f_meas = stack_phi(w.xi, w.geoms) + 0.1 * rng.gaussian_vec(12);
  return w;
}

RefSample random_ref(Rng& rng) {
  RefSample ref;
  ref.H = rng.gaussian_vec(6);
  ref.H_dot = rng.gaussian_vec(6);
  ref.H_ddot = rng.gaussian_vec(6);
  return ref;
}

}  // namespace

TEST_CASE("gain validation names the offending matrix") {
  const Mat6 I6 = Mat6::Identity();
  CHECK_NOTHROW(GainSet::make(2.0 * I6, 3.0 * I6, I6));
  CHECK_NOTHROW(GainSet::make(I6, I6, I6, 0.5 * I6, 1.0,
                              Mat::Identity(4, 4)));

  Mat6 skewed = I6;
  skewed(0, 1) = 0.3;
  CHECK(thrown_message([&] { GainSet::make(skewed, I6, I6); })
            .find("Kp") != std::string::npos);
  CHECK(thrown_message([&] { GainSet::make(I6, -I6, I6); })
            .find("Kd") != std::string::npos);
  CHECK(thrown_message([&] { GainSet::make(I6, I6, -I6); })
            .find("Ko") != std::string::npos);
  CHECK(thrown_message([&] { GainSet::make(I6, I6, I6, skewed); })
            .find("Ki") != std::string::npos);
  CHECK(thrown_message([&] {
          GainSet::make(I6, I6, I6, Mat6::Zero(), 0.0, Mat::Ones(2, 3));
        }).find("K_tau") != std::string::npos);
  CHECK(thrown_message([&] { GainSet::make(I6, I6, I6, Mat6::Zero(), -0.1); })
            .find("k_e") != std::string::npos);
  // A zero Ki means "integral term off" and must not be rejected.
  CHECK_NOTHROW(GainSet::make(I6, I6, I6, Mat6::Zero()));
}

TEST_CASE("feedback linearizing law is quiet at equilibrium") {
  std::vector<ContactFrame> frames(2);
  frames[0].origin = Vec3(0.1, 0.0, 0.0);
  frames[1].origin = Vec3(-0.1, 0.0, 0.0);
  frames[0].geometry = symmetric_geometry();
  frames[1].geometry = frames[0].geometry;

  MomentumState state;
  state.com = Vec3(0.0, 0.0, 0.8);
  state.m = 3.0;

  const XiTarget eq = compute_xi_d(Vec6::Zero(), frames, state.com, state.m,
                                   state.g);
  REQUIRE_FALSE(eq.saturated);
  const Vec f_eq = stack_phi(eq.xi_d, {frames[0].geometry,
                                       frames[1].geometry});

  const GainSet gains = GainSet::make(4.0 * Mat6::Identity(),
                                      4.0 * Mat6::Identity(),
                                      Mat6::Identity());
  const XidotResult r =
      fb_lin_xidot(state, frames, eq.xi_d, f_eq, RefSample{}, gains, false);
  CHECK(r.xi_dot.norm() < 1e-8);
  CHECK(r.residual < 1e-10);
}

TEST_CASE("feedback linearizing law realizes the commanded momentum snap") {
  Rng rng(501);
  for (int trial = 0; trial < 30; ++trial) {
    const World w = random_world(rng);
    const RefSample ref = random_ref(rng);
    const GainSet gains =
        GainSet::make(random_spd(rng, 1.0, 5.0), random_spd(rng, 1.0, 5.0),
                      random_spd(rng, 0.5, 2.0), random_spd(rng, 0.1, 1.0));

    const Mat A = contact_map(w.frames, w.state.com);
    const Mat A_dot =
        contact_map_dot(w.frames, w.state.H.head<3>() / w.state.m);
    const Vec6 herr = w.state.H - ref.H;
    const Vec6 herr_dot = hdot(A, w.f_meas, w.state.m, w.state.g) - ref.H_dot;

    const bool with_integral = trial % 2 == 1;
    const XidotResult r = fb_lin_xidot(w.state, w.frames, w.xi, w.f_meas, ref,
                                       gains, with_integral);
    Vec6 want = ref.H_ddot - gains.Kd * herr_dot - gains.Kp * herr;
    if (with_integral) want -= gains.Ki * w.state.I_err;
    const Vec6 got = hddot(w.xi, r.xi_dot, w.f_meas, A, A_dot, w.geoms);
    CHECK((got - want).norm() < 1e-9 * (1.0 + want.norm()));
    CHECK(r.residual < 1e-10);
  }
}

TEST_CASE("integral law closes the error chain it advertises") {
  // With full row rank the solved rate satisfies, identically in the state,
  //   A Phi xi_dot + Adot f - Hddot_d + Kd Herr_dot + Kp Herr
  //     = -(Herr_dot + Kd Herr + Kp I) - Ko^-1 Herr
  // which is what makes zeta = Herr_dot + Kd Herr + Kp I a strict Lyapunov
  // coordinate for the closed loop.
  Rng rng(502);
  for (int trial = 0; trial < 100; ++trial) {
    const World w = random_world(rng);
    const RefSample ref = random_ref(rng);
    const GainSet gains =
        GainSet::make(random_spd(rng, 1.0, 6.0), random_spd(rng, 1.0, 6.0),
                      random_spd(rng, 0.5, 3.0));

    const XidotResult r =
        momentum_jerk_xidot(w.state, w.frames, w.xi, w.f_meas, ref, gains);

    const Mat A = contact_map(w.frames, w.state.com);
    const Mat A_dot =
        contact_map_dot(w.frames, w.state.H.head<3>() / w.state.m);
    const Mat APhi = A * stack_gradient(w.xi, w.geoms);
    const Vec6 herr = w.state.H - ref.H;
    const Vec6 herr_dot = hdot(A, w.f_meas, w.state.m, w.state.g) - ref.H_dot;
    const Vec6 zeta = herr_dot + gains.Kd * herr + gains.Kp * w.state.I_err;

    const Vec6 lhs = APhi * r.xi_dot + A_dot * w.f_meas - ref.H_ddot +
                     gains.Kd * herr_dot + gains.Kp * herr;
    const Vec6 rhs = -zeta - gains.Ko.llt().solve(herr);
    CHECK((lhs - rhs).norm() < 1e-8 * (1.0 + rhs.norm() + lhs.norm()));
  }
}

TEST_CASE("null space injection moves xi without touching the task") {
  Rng rng(503);
  const World w = random_world(rng);
  const RefSample ref = random_ref(rng);
  const GainSet gains = GainSet::make(2.0 * Mat6::Identity(),
                                      3.0 * Mat6::Identity(),
                                      Mat6::Identity());
  const Vec xi0 = rng.gaussian_vec(12);

  const XidotResult base =
      momentum_jerk_xidot(w.state, w.frames, w.xi, w.f_meas, ref, gains);
  const XidotResult shifted =
      momentum_jerk_xidot(w.state, w.frames, w.xi, w.f_meas, ref, gains, &xi0);

  const Vec delta = shifted.xi_dot - base.xi_dot;
  CHECK((delta - base.N * xi0).norm() <
        1e-10 * (1.0 + xi0.norm() + base.xi_dot.norm()));

  const Mat A = contact_map(w.frames, w.state.com);
  const Mat APhi = A * stack_gradient(w.xi, w.geoms);
  CHECK((APhi * delta).norm() <
        1e-10 * (1.0 + APhi.norm() * (1.0 + delta.norm())));
  // Projector sanity: N is idempotent and annihilated by the task map.
  CHECK((base.N * base.N - base.N).norm() < 1e-10);
  CHECK((APhi * base.N).norm() < 1e-10 * (1.0 + APhi.norm()));
}

TEST_CASE("drift anchor adds exactly the tracking spring and nothing else") {
  Rng rng(504);
  const World w = random_world(rng);
  const RefSample ref = random_ref(rng);
  const Vec xi_d = rng.uniform_vec(12, -1.0, 1.0);

  const GainSet plain = GainSet::make(2.0 * Mat6::Identity(),
                                      3.0 * Mat6::Identity(),
                                      Mat6::Identity());
  GainSet anchored = plain;
  anchored.k_e = 0.7;

  const XidotResult base =
      momentum_jerk_xidot(w.state, w.frames, w.xi, w.f_meas, ref, plain);
  const XidotResult off =
      regularized_xidot(w.state, w.frames, w.xi, w.f_meas, ref, plain, xi_d);
  const XidotResult on =
      regularized_xidot(w.state, w.frames, w.xi, w.f_meas, ref, anchored, xi_d);

  CHECK((off.xi_dot - base.xi_dot).norm() == 0.0);  // k_e = 0 is a no-op
  CHECK((on.xi_dot - base.xi_dot + 0.7 * (w.xi - xi_d)).norm() <
        1e-12 * (1.0 + base.xi_dot.norm()));
  CHECK((on.N - base.N).norm() == 0.0);
  CHECK(on.residual == base.residual);
}

TEST_CASE("deep tanh saturation starves the law of authority") {
  // sech^2 underflows long before tanh reaches 1, so a single saturated
  // channel zeroes a gradient column and A*Phi drops below row rank.
  std::vector<ContactFrame> frames(1);
  frames[0].geometry = symmetric_geometry();
  MomentumState state;
  state.com = Vec3(0.0, 0.0, 0.5);
  Vec xi(6);
  xi << 50.0, 0.0, 1.0, 0.0, 0.0, 0.0;
  const Vec f = stack_phi(xi, {frames[0].geometry});
  const GainSet gains = GainSet::make(Mat6::Identity(), Mat6::Identity(),
                                      Mat6::Identity());
  CHECK_THROWS_AS(
      (void)fb_lin_xidot(state, frames, xi, f, RefSample{}, gains, false),
      RankDeficiencyError);
}

TEST_CASE("wrench distribution for a momentum rate target") {
  const double m = 2.0, g = 9.81;

  SUBCASE("single support holds weight straight down the normal") {
    std::vector<ContactFrame> frames(1);
    frames[0].geometry = symmetric_geometry();
    const XiTarget t = compute_xi_d(Vec6::Zero(), frames, Vec3(0, 0, 1), m, g);
    REQUIRE_FALSE(t.saturated);
    CHECK(t.f_d(2) == doctest::Approx(m * g).epsilon(1e-12));
    for (int i : {0, 1, 3, 4, 5}) CHECK(std::abs(t.f_d(i)) < 1e-10);
    CHECK(t.xi_d(2) == doctest::Approx(std::log(m * g)).epsilon(1e-12));
    for (int i : {0, 1, 3, 4, 5}) CHECK(std::abs(t.xi_d(i)) < 1e-10);
  }

  SUBCASE("offset center of mass shows up as a pitch moment") {
    std::vector<ContactFrame> frames(1);
    frames[0].geometry = symmetric_geometry();
    const XiTarget t =
        compute_xi_d(Vec6::Zero(), frames, Vec3(0.05, 0.0, 1.0), m, g);
    REQUIRE_FALSE(t.saturated);
    CHECK(t.f_d(2) == doctest::Approx(m * g).epsilon(1e-12));
    // Center of pressure sits under the CoM: x_cop = -My/fz = 0.05.
    CHECK(t.f_d(4) == doctest::Approx(-0.05 * m * g).epsilon(1e-10));
    CHECK(-t.f_d(4) / t.f_d(2) == doctest::Approx(0.05).epsilon(1e-10));
  }

  SUBCASE("double support splits the weight evenly") {
    std::vector<ContactFrame> frames(2);
    frames[0].origin = Vec3(0.1, 0.0, 0.0);
    frames[1].origin = Vec3(-0.1, 0.0, 0.0);
    frames[0].geometry = symmetric_geometry();
    frames[1].geometry = frames[0].geometry;
    const XiTarget t =
        compute_xi_d(Vec6::Zero(), frames, Vec3(0, 0, 0.8), m, g);
    REQUIRE_FALSE(t.saturated);
    for (int k = 0; k < 2; ++k) {
      CHECK(t.f_d(6 * k + 2) == doctest::Approx(0.5 * m * g).epsilon(1e-9));
      for (int i : {0, 1, 3, 4, 5})
        CHECK(std::abs(t.f_d(6 * k + i)) < 1e-9);
    }
    // The parametrization reproduces the distributed wrench.
    const Vec back = stack_phi(t.xi_d, {frames[0].geometry,
                                        frames[1].geometry});
    CHECK((back - t.f_d).norm() < 1e-8 * (1.0 + t.f_d.norm()));
    // pinv distributes minimum norm: any other feasible stack is longer.
    const Mat A = contact_map(frames, Vec3(0, 0, 0.8));
    Rng rng(505);
    const Vec other = t.f_d + nullspace_projector(A) * rng.gaussian_vec(12);
    CHECK((A * other - A * t.f_d).norm() < 1e-9 * (1.0 + t.f_d.norm()));
    CHECK(other.norm() >= t.f_d.norm() - 1e-12);
  }

  SUBCASE("a reference that needs pulling on the ground saturates") {
    std::vector<ContactFrame> frames(2);
    frames[0].origin = Vec3(0.1, 0.0, 0.0);
    frames[1].origin = Vec3(-0.1, 0.0, 0.0);
    frames[0].geometry = symmetric_geometry();
    frames[1].geometry = frames[0].geometry;
    Vec6 pull = Vec6::Zero();
    pull(2) = -3.0 * m * g;  // demands fz = -mg per contact
    const XiTarget t = compute_xi_d(pull, frames, Vec3(0, 0, 0.8), m, g);
    CHECK(t.saturated);
    CHECK(t.f_d(2) == doctest::Approx(-m * g).epsilon(1e-9));
    // The stored xi clamps the normal channel at the wrench floor.
    CHECK(t.xi_d(2) == doctest::Approx(std::log(1e-6)).epsilon(1e-9));
  }
}

TEST_CASE("torque resolution against the constrained dynamics") {
  Rng rng(506);

  SUBCASE("a consistent sample reproduces its generating torque") {
    for (int trial = 0; trial < 20; ++trial) {
      const testutil::ConsistentSample cs = consistent_sample(rng, 10, 1);
      const Vec tau = torque_from_wrench(cs.s, cs.f);
      // Minimum-norm resolution can only shorten the generator.
      CHECK(tau.norm() <= cs.tau_src.norm() + 1e-12);
      const Eigen::LLT<Mat> Mllt(cs.s.M);
      const Mat Lambda = cs.s.J * Mllt.solve(cs.s.B);
      const Vec rhs = cs.s.J * Mllt.solve(cs.s.h - cs.s.J.transpose() * cs.f) -
                      cs.s.Jdot_nu;
      CHECK((Lambda * tau - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
      // Seeding the null space with the generator recovers it exactly.
      const Vec tau_full = torque_from_wrench(cs.s, cs.f, cs.tau_src);
      CHECK((tau_full - cs.tau_src).norm() <
            1e-9 * (1.0 + cs.tau_src.norm()));
    }
  }

  SUBCASE("the posture argument only moves inside the torque null space") {
    const testutil::ConsistentSample cs = consistent_sample(rng, 10, 1);
    const Vec tau0 = rng.gaussian_vec(10);
    const Vec base = torque_from_wrench(cs.s, cs.f);
    const Vec shifted = torque_from_wrench(cs.s, cs.f, tau0);
    const Eigen::LLT<Mat> Mllt(cs.s.M);
    const Mat Lambda = cs.s.J * Mllt.solve(cs.s.B);
    const Vec delta = shifted - base;
    CHECK((Lambda * delta).norm() <
          1e-10 * (1.0 + Lambda.norm() * (1.0 + delta.norm())));
    CHECK((delta - nullspace_projector(Lambda) * tau0).norm() <
          1e-9 * (1.0 + tau0.norm()));
  }

  SUBCASE("the telemetry readout is the gate-free projection") {
    const testutil::ConsistentSample cs = consistent_sample(rng, 10, 1);
    CHECK((torque_readout(cs.s, cs.f) - torque_from_wrench(cs.s, cs.f))
              .norm() == 0.0);
    // Off the reachable range the readout still answers with the
    // least-squares minimizer: the normal equations hold.
    testutil::ConsistentSample off = consistent_sample(rng, 4, 2);
    off.s.h = rng.gaussian_vec(10);
    const Vec tau = torque_readout(off.s, off.f);
    CHECK(tau.allFinite());
    const Eigen::LLT<Mat> Mllt(off.s.M);
    const Mat Lambda = off.s.J * Mllt.solve(off.s.B);
    const Vec rhs = off.s.J * Mllt.solve(off.s.h -
                                         off.s.J.transpose() * off.f) -
                    off.s.Jdot_nu;
    CHECK((Lambda.transpose() * (Lambda * tau - rhs)).norm() <
          1e-9 * (1.0 + rhs.norm()) * (1.0 + Lambda.norm()));
  }

  SUBCASE("an unreachable wrench request is an error, not a bad answer") {
    // Four actuators cannot span twelve contact rows; a generic right-hand
    // side leaves a large residual.
    testutil::ConsistentSample cs = consistent_sample(rng, 4, 2);
    cs.s.h = rng.gaussian_vec(10);
    bool threw = false;
    try {
      (void)torque_from_wrench(cs.s, cs.f);
    } catch (const RankDeficiencyError& e) {
      threw = true;
      CHECK(e.residual() > 1e-8);
    }
    CHECK(threw);
  }
}

TEST_CASE("torque descent direction in the contact null space") {
  Rng rng(507);
  const testutil::ConsistentSample cs = consistent_sample(rng, 4, 2);
  const std::vector<ContactGeometry> geoms = {random_geometry(rng),
                                              random_geometry(rng)};
  const Vec xi = rng.uniform_vec(12, -2.0, 2.0);

  std::vector<ContactFrame> frames(2);
  frames[0].origin = Vec3(0.0, 0.09, 0.0);
  frames[1].origin = Vec3(0.0, -0.09, 0.0);
  frames[0].geometry = geoms[0];
  frames[1].geometry = geoms[1];
  const Mat A = contact_map(frames, Vec3(0.0, 0.0, 0.45));
  const Mat APhi = A * stack_gradient(xi, geoms);
  const Mat N = nullspace_projector(APhi, kRankTol);

  const Mat K_tau = 0.5 * Mat::Identity(4, 4);
  const Vec tau = cs.tau_src;

  SUBCASE("the injected rate never increases the torque norm rate") {
    const Vec xi0 = xi0_torque_min(cs.s, cs.f, xi, geoms, N, Vec::Zero(12),
                                   tau, K_tau);
    REQUIRE(xi0.size() == 12);
    const Eigen::LLT<Mat> Mllt(cs.s.M);
    const Mat Lambda = cs.s.J * Mllt.solve(cs.s.B);
    const Mat Theta =
        -pinv(Lambda, kRankTol) * (cs.s.J * Mllt.solve(cs.s.J.transpose()));
    const Mat G = Theta * stack_gradient(xi, geoms) * N;
    // d||tau||^2/dt contribution: tau^T G xi0 = -tau^T G G^+ K tau <= 0.
    CHECK(tau.dot(G * xi0) < 1e-12 * (1.0 + tau.squaredNorm()));
    CHECK(G.norm() > 0.0);  // the direction is not trivially zero
  }

  SUBCASE("no drive terms means no motion") {
    const Vec xi0 =
        xi0_torque_min(cs.s, cs.f, xi, geoms, N, Vec::Zero(12), tau, Mat());
    CHECK(xi0.norm() == 0.0);
  }

  SUBCASE("finite difference mode with a frozen sample matches kZero") {
    const Vec a = xi0_torque_min(cs.s, cs.f, xi, geoms, N, Vec::Zero(12), tau,
                                 K_tau, ThetaDotMode::kZero);
    const Vec b = xi0_torque_min(cs.s, cs.f, xi, geoms, N, Vec::Zero(12), tau,
                                 K_tau, ThetaDotMode::kFiniteDifference, &cs.s,
                                 0.01);
    CHECK((a - b).norm() < 1e-14 * (1.0 + a.norm()));
  }

  SUBCASE("finite difference mode demands a previous sample") {
    CHECK_THROWS_AS(
        (void)xi0_torque_min(cs.s, cs.f, xi, geoms, N, Vec::Zero(12), tau,
                             K_tau, ThetaDotMode::kFiniteDifference),
        std::invalid_argument);
  }

  SUBCASE("single support has no null space to exploit") {
    const testutil::ConsistentSample one = consistent_sample(rng, 4, 1);
    const std::vector<ContactGeometry> g1 = {geoms[0]};
    const Vec xi1 = xi.head(6);
    std::vector<ContactFrame> fr1(1);
    fr1[0].geometry = g1[0];
    const Mat A1 = contact_map(fr1, Vec3(0.0, 0.0, 0.45));
    const Mat N1 = nullspace_projector(A1 * stack_gradient(xi1, g1), kRankTol);
    const Vec xi0 = xi0_torque_min(one.s, one.f, xi1, g1, N1, Vec::Zero(6),
                                   one.tau_src, K_tau);
    CHECK(xi0.size() == 6);
    CHECK(xi0.norm() == 0.0);
  }
}

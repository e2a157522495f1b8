#include "jerkctl/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include "jerkctl/rng.hpp"

namespace jerkctl {

namespace {

// Synthetic dynamics snapshot anchored at the episode's equilibrium wrench:
// h = J^T f_eq + B tau_src keeps the torque-descent objective's minimum at a
// small interior torque instead of somewhere outside the wrench image.
DynamicsSample build_anchored_sample(const TorqueModelSpec& tm, int n_c,
                                     const Vec& f_eq) {
  const int n = tm.joints;
  const int total = n + 6;
  Rng g(tm.seed);
  DynamicsSample s;
  s.n = n;
  s.n_c = n_c;
  const Mat Mh = g.gaussian_mat(total, total);
  s.M = Mh * Mh.transpose() +
        static_cast<double>(total) * Mat::Identity(total, total);
  s.J = g.gaussian_mat(6 * n_c, total);
  s.B = Mat::Zero(total, n);
  s.B.bottomRows(n).setIdentity();
  const Vec tau_src = tm.tau_src_scale * g.gaussian_vec(n);
  s.h = s.J.transpose() * f_eq + s.B * tau_src;
  s.Jdot_nu = Vec::Zero(6 * n_c);
  return s;
}

Vec6 disturbance_at(const std::vector<DisturbancePulse>& pulses, double t) {
  Vec6 d = Vec6::Zero();
  for (const auto& p : pulses)
    if (t >= p.start_s && t < p.stop_s) d += p.wrench;
  return d;
}

void fill_margins(const Vec& f, const std::vector<ContactGeometry>& geoms,
                  Vec& margins) {
  const auto n_c = static_cast<Eigen::Index>(geoms.size());
  margins.resize(5 * n_c);
  for (Eigen::Index k = 0; k < n_c; ++k) {
    const ConstraintReport rep = check_constraints(f.segment<6>(6 * k), geoms[k]);
    margins(5 * k + 0) = rep.normal_force.margin;
    margins(5 * k + 1) = rep.friction.margin;
    margins(5 * k + 2) = rep.cop_x.margin;
    margins(5 * k + 3) = rep.cop_y.margin;
    margins(5 * k + 4) = rep.torsion.margin;
  }
}

}  // namespace

EpisodeResult run_episode(const Scenario& s) {
  {
    const auto errs = validate(s);
    if (!errs.empty()) throw ScenarioError(errs);
  }

  EpisodeResult out;
  Summary& sum = out.summary;
  sum.name = s.name;
  sum.law = to_string(s.law);
  sum.seed = s.measurement.seed;
  sum.min_margin = std::numeric_limits<double>::infinity();

  const auto n_c = static_cast<Eigen::Index>(s.frames.size());
  out.log.n_c = static_cast<int>(n_c);
  std::vector<ContactGeometry> geoms;
  geoms.reserve(s.frames.size());
  for (const auto& fr : s.frames) geoms.push_back(fr.geometry);

  const Reference ref = build_reference(s.reference);
  const RefSample ref0 = ref.at(0.0);
  const double dtc = s.controller_dt_s;
  const double dtp = s.plant_dt_s;
  const auto n_sub = static_cast<int>(std::llround(dtc / dtp));
  const auto n_cycles = static_cast<long>(std::llround(s.horizon_s / dtc));

  MomentumState state = s.initial;
  const XiTarget target =
      compute_xi_d(ref0.H_dot, s.frames, state.com, state.m, state.g);
  sum.reference_saturated = target.saturated;
  Vec xi = s.initial_xi.size() ? s.initial_xi : target.xi_d;

  DynamicsSample sample;
  Mat K_tau;
  if (s.torque_model.enabled) {
    sample = build_anchored_sample(s.torque_model, static_cast<int>(n_c),
                                   target.f_d);
    K_tau = s.torque_model.k_tau *
            Mat::Identity(s.torque_model.joints, s.torque_model.joints);
  }

  Rng noise(s.measurement.seed);
  const Vec bias = s.measurement.bias.size()
                       ? s.measurement.bias
                       : Vec(Vec::Zero(6 * n_c));

  const double herr0 = (state.H - ref0.H).norm();
  const double div_threshold = kDivergenceFactor * std::max(herr0, 1e-12);

  Vec6 herr_prev = Vec6::Zero();
  bool have_prev = false;

  for (long k = 0; k <= n_cycles; ++k) {
    const double t = static_cast<double>(k) * dtc;
    const Mat A = contact_map(s.frames, state.com);

    Vec f_meas = stack_phi(xi, geoms) + bias;
    if (s.measurement.noise_std > 0.0)
      f_meas += s.measurement.noise_std * noise.gaussian_vec(6 * n_c);

    bool resync_saturated = false;
    if (s.resync_every_cycles > 0 && k > 0 &&
        k % s.resync_every_cycles == 0) {
      for (Eigen::Index c = 0; c < n_c; ++c) {
        const InverseResult inv =
            phi_inverse(f_meas.segment<6>(6 * c), geoms[c]);
        xi.segment<6>(6 * c) = inv.xi;
        resync_saturated = resync_saturated || inv.saturated;
      }
    }

    const RefSample rs = ref.at(t);
    const Vec6 herr = state.H - rs.H;
    const Vec6 herr_dot = hdot(A, f_meas, state.m, state.g) - rs.H_dot;
    state.zeta = herr_dot + s.gains.Kd * herr + s.gains.Kp * state.I_err;

    LogRow row;
    row.t = t;
    row.H = state.H;
    row.H_d = rs.H;
    row.H_err = herr;
    row.H_err_dot = herr_dot;
    row.I_err = state.I_err;
    row.zeta = state.zeta;
    row.V = 0.5 * (state.I_err.dot(s.gains.Kp * state.I_err) +
                   herr.squaredNorm() + state.zeta.dot(s.gains.Ko * state.zeta));
    row.com = state.com;
    row.xi = xi;
    row.f = stack_phi(xi, geoms);
    fill_margins(row.f, geoms, row.margins);
    row.sat_active = resync_saturated;

    Vec tau;
    if (s.torque_model.enabled) {
      tau = torque_readout(sample, row.f);
      row.tau_norm = tau.norm();
    }

    sum.max_xi_abs = std::max(sum.max_xi_abs, xi.cwiseAbs().maxCoeff());
    sum.min_margin = std::min(sum.min_margin, row.margins.minCoeff());

    const bool finite = herr.allFinite() && xi.allFinite() &&
                        state.com.allFinite();
    if (!finite || herr.norm() > div_threshold) {
      row.diverged = true;
      out.log.rows.push_back(std::move(row));
      sum.diverged = true;
      sum.divergence_time_s = t;
      break;
    }
    out.log.rows.push_back(std::move(row));
    if (k == n_cycles) break;

    XidotResult law;
    try {
      switch (s.law) {
        case ControlLaw::kJerkPd:
          law = fb_lin_xidot(state, s.frames, xi, f_meas, rs, s.gains, false);
          break;
        case ControlLaw::kJerkPdKi:
          law = fb_lin_xidot(state, s.frames, xi, f_meas, rs, s.gains, true);
          break;
        case ControlLaw::kJerkIntegral:
          law = momentum_jerk_xidot(state, s.frames, xi, f_meas, rs, s.gains);
          break;
        case ControlLaw::kJerkIntegralReg:
          law = regularized_xidot(state, s.frames, xi, f_meas, rs, s.gains,
                                  target.xi_d);
          break;
      }
    } catch (const RankDeficiencyError&) {
      out.log.rows.back().rank_degraded = true;
      sum.rank_degraded = true;
      sum.diverged = true;
      sum.divergence_time_s = t;
      break;
    }

    Vec xi_dot = law.xi_dot;
    if (s.torque_model.enabled && s.torque_model.xi0_active) {
      const Vec xi0 = xi0_torque_min(sample, out.log.rows.back().f, xi, geoms,
                                     law.N, law.xi_dot, tau, K_tau);
      xi_dot += law.N * xi0;
    }

    if (!have_prev) {
      herr_prev = herr;
      have_prev = true;
    }
    state.I_err += (dtc / 2.0) * (herr_prev + herr);
    herr_prev = herr;

    for (int j = 0; j < n_sub; ++j) {
      const double ts = t + j * dtp;
      const Vec xij = xi + xi_dot * (j * dtp);
      state = plant_step(state, s.frames, stack_phi(xij, geoms), dtp,
                         disturbance_at(s.disturbances, ts));
    }
    xi += dtc * xi_dot;
  }

  const LogRow& last = out.log.rows.back();
  sum.cycles = out.log.rows.size();
  sum.completed = !sum.diverged && !sum.rank_degraded;
  sum.final_herr_norm = last.H_err.norm();
  sum.final_ierr_norm = last.I_err.norm();
  sum.final_zeta_norm = last.zeta.norm();
  sum.final_tau_norm = last.tau_norm;
  return out;
}

std::vector<EpisodeResult> run_suite(const std::vector<Scenario>& scenarios,
                                     int parallelism) {
  std::vector<EpisodeResult> results(scenarios.size());
  if (scenarios.empty()) return results;
  const int workers = std::max(
      1, std::min<int>(parallelism, static_cast<int>(scenarios.size())));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        results[i] = run_episode(scenarios[i]);
      } catch (const std::exception& e) {
        results[i] = EpisodeResult{};
        results[i].summary.name = scenarios[i].name;
        results[i].error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return results;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  out << ',' << buf;
}

}  // namespace

void write_csv(const EpisodeLog& log, std::ostream& out) {
  out << "t_s";
  const char* groups[] = {"H", "H_d", "H_err", "H_err_dot", "I_err", "zeta"};
  for (const char* g : groups)
    for (int i = 0; i < 6; ++i) out << ',' << g << '_' << i;
  out << ",V,com_0,com_1,com_2";
  for (int c = 1; c <= log.n_c; ++c) {
    for (int i = 0; i < 6; ++i) out << ",xi_" << c << '_' << i;
    for (int i = 0; i < 6; ++i) out << ",f_" << c << '_' << i;
    out << ",margin_normal_" << c << ",margin_friction_" << c
        << ",margin_cop_x_" << c << ",margin_cop_y_" << c
        << ",margin_torsion_" << c;
  }
  out << ",tau_norm,sat_active,rank_degraded,diverged\n";

  for (const LogRow& r : log.rows) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", r.t);
    out << buf;
    for (int i = 0; i < 6; ++i) put(out, r.H(i));
    for (int i = 0; i < 6; ++i) put(out, r.H_d(i));
    for (int i = 0; i < 6; ++i) put(out, r.H_err(i));
    for (int i = 0; i < 6; ++i) put(out, r.H_err_dot(i));
    for (int i = 0; i < 6; ++i) put(out, r.I_err(i));
    for (int i = 0; i < 6; ++i) put(out, r.zeta(i));
    put(out, r.V);
    for (int i = 0; i < 3; ++i) put(out, r.com(i));
    for (int c = 0; c < log.n_c; ++c) {
      for (int i = 0; i < 6; ++i) put(out, r.xi(6 * c + i));
      for (int i = 0; i < 6; ++i) put(out, r.f(6 * c + i));
      for (int i = 0; i < 5; ++i) put(out, r.margins(5 * c + i));
    }
    put(out, r.tau_norm);
    out << ',' << (r.sat_active ? 1 : 0) << ',' << (r.rank_degraded ? 1 : 0)
        << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_summary(const Summary& s, std::ostream& out) {
  auto num = [&out](const char* key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  out << "name = " << s.name << '\n';
  out << "law = " << s.law << '\n';
  out << "seed = " << s.seed << '\n';
  out << "cycles = " << s.cycles << '\n';
  out << "completed = " << (s.completed ? "true" : "false") << '\n';
  out << "diverged = " << (s.diverged ? "true" : "false") << '\n';
  out << "rank_degraded = " << (s.rank_degraded ? "true" : "false") << '\n';
  out << "reference_saturated = " << (s.reference_saturated ? "true" : "false")
      << '\n';
  num("divergence_time_s", s.divergence_time_s);
  num("final_herr_norm", s.final_herr_norm);
  num("final_ierr_norm", s.final_ierr_norm);
  num("final_zeta_norm", s.final_zeta_norm);
  num("final_tau_norm", s.final_tau_norm);
  num("max_xi_abs", s.max_xi_abs);
  num("min_margin", s.min_margin);
}

}  // namespace jerkctl

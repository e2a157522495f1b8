#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jerkctl/scenario.hpp"

namespace jerkctl {

// One controller cycle of telemetry. Everything the audit needs: errors,
// Lyapunov value, per-contact state/wrench/margins, and health flags.
struct LogRow {
  double t = 0.0;
  Vec6 H = Vec6::Zero();
  Vec6 H_d = Vec6::Zero();
  Vec6 H_err = Vec6::Zero();
  Vec6 H_err_dot = Vec6::Zero();
  Vec6 I_err = Vec6::Zero();
  Vec6 zeta = Vec6::Zero();
  double V = 0.0;
  Vec3 com = Vec3::Zero();
  Vec xi;       // 6 per contact
  Vec f;        // 6 per contact
  Vec margins;  // 5 per contact: normal, friction, cop_x, cop_y, torsion
  double tau_norm = 0.0;
  bool sat_active = false;
  bool rank_degraded = false;
  bool diverged = false;
};

struct EpisodeLog {
  int n_c = 0;
  std::vector<LogRow> rows;
};

struct Summary {
  std::string name;
  std::string law;
  std::uint64_t seed = 0;
  std::size_t cycles = 0;
  bool completed = false;
  bool diverged = false;
  bool rank_degraded = false;
  bool reference_saturated = false;
  double divergence_time_s = -1.0;
  double final_herr_norm = 0.0;
  double final_ierr_norm = 0.0;
  double final_zeta_norm = 0.0;
  double final_tau_norm = 0.0;
  double max_xi_abs = 0.0;   // max over cycles of ||xi||_inf
  double min_margin = 0.0;   // worst constraint margin seen
};

struct EpisodeResult {
  EpisodeLog log;
  Summary summary;
  std::string error;  // non-empty when the episode aborted on an exception
};

// Deterministic given the scenario (all randomness flows from
// measurement.seed and torque_model.seed). Diverged episodes keep the
// partial log with the last row flagged.
EpisodeResult run_episode(const Scenario& s);

// Independent episodes; per-episode failures are captured in the result so
// the suite always completes. Output order matches input order regardless
// of parallelism.
std::vector<EpisodeResult> run_suite(const std::vector<Scenario>& scenarios,
                                     int parallelism);

// Fixed column order, 17 significant digits, flags as 0/1.
void write_csv(const EpisodeLog& log, std::ostream& out);
void write_summary(const Summary& s, std::ostream& out);

}  // namespace jerkctl

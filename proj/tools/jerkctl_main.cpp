// Command-line front end: run scenarios and suites, verify the library's
// analytic properties, estimate friction-disk coverage, and inspect single
// parametrization points.
//
// Exit codes: 0 success, 1 configuration error (every offending field is
// named), 2 episode divergence.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "jerkctl/controllers.hpp"
#include "jerkctl/rng.hpp"
#include "jerkctl/scenario.hpp"
#include "jerkctl/sim.hpp"
#include "jerkctl/wrench_param.hpp"

namespace fs = std::filesystem;
using namespace jerkctl;

namespace {

struct GeometryFlags {
  double mu_c = 0.5;
  double mu_z = 0.1;
  double fz_min = 0.0;
  double x_min = -0.1, x_max = 0.1;
  double y_min = -0.05, y_max = 0.05;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mu-c", mu_c, "friction coefficient");
    cmd->add_option("--mu-z", mu_z, "torsional friction coefficient");
    cmd->add_option("--fz-min", fz_min, "minimum normal force [N]");
    cmd->add_option("--x-min", x_min, "support rectangle x min [m]");
    cmd->add_option("--x-max", x_max, "support rectangle x max [m]");
    cmd->add_option("--y-min", y_min, "support rectangle y min [m]");
    cmd->add_option("--y-max", y_max, "support rectangle y max [m]");
  }

  ContactGeometry make() const {
    return ContactGeometry::make(mu_c, mu_z, fz_min, x_min, x_max, y_min,
                                 y_max);
  }
};

int report_config_error(const ScenarioError& e) {
  for (const auto& f : e.fields()) std::cerr << "config error: " << f << '\n';
  return 1;
}

void write_episode_files(const EpisodeResult& r, const fs::path& dir,
                         const std::string& stem) {
  std::ofstream csv(dir / (stem + ".csv"));
  write_csv(r.log, csv);
  std::ofstream sum(dir / (stem + "_summary.txt"));
  write_summary(r.summary, sum);
}

void write_plot_script(const fs::path& dir, const std::string& csv_name) {
  std::ofstream gp(dir / "plot.gp");
  gp << "# gnuplot script: momentum error norm and Lyapunov value\n"
     << "set datafile separator ','\n"
     << "set xlabel 't [s]'\n"
     << "set logscale y\n"
     << "plot '" << csv_name
     << "' using 1:(sqrt($14**2+$15**2+$16**2+$17**2+$18**2+$19**2)) "
        "with lines title '|H err|', \\\n"
     << "     '' using 1:38 with lines title 'V'\n";
}

int cmd_run(const std::string& config, const std::string& out_dir,
            std::optional<std::uint64_t> seed, bool plot) {
  Scenario s;
  try {
    s = load_scenario(config);
  } catch (const ScenarioError& e) {
    return report_config_error(e);
  }
  if (seed) s.measurement.seed = *seed;
  fs::create_directories(out_dir);
  const EpisodeResult r = run_episode(s);
  write_episode_files(r, out_dir, "episode");
  if (plot) write_plot_script(out_dir, "episode.csv");
  write_summary(r.summary, std::cout);
  if (r.summary.diverged) {
    std::cerr << "episode diverged at t = " << r.summary.divergence_time_s
              << " s (partial log kept)\n";
    return 2;
  }
  return 0;
}

int cmd_suite(const std::string& config, const std::string& out_dir,
              std::optional<std::uint64_t> seed, int parallel) {
  std::ifstream in(config);
  if (!in) {
    std::cerr << "config error: cannot open '" << config << "'\n";
    return 1;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "config error: json: " << e.what() << '\n';
    return 1;
  }
  const nlohmann::json episodes =
      j.is_array() ? j : j.value("episodes", nlohmann::json::array());
  if (!episodes.is_array() || episodes.empty()) {
    std::cerr << "config error: episodes: must be a non-empty array\n";
    return 1;
  }

  std::vector<Scenario> scenarios;
  bool config_ok = true;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    try {
      scenarios.push_back(scenario_from_string(episodes[i].dump()));
    } catch (const ScenarioError& e) {
      for (const auto& f : e.fields())
        std::cerr << "config error: episodes[" << i << "]." << f << '\n';
      config_ok = false;
    }
  }
  if (!config_ok) return 1;
  if (seed)
    for (auto& s : scenarios) s.measurement.seed = *seed;

  fs::create_directories(out_dir);
  const auto results = run_suite(scenarios, parallel);

  std::ofstream table(fs::path(out_dir) / "suite_summary.txt");
  bool any_diverged = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "episode_%03zu", i);
    if (results[i].error.empty()) {
      write_episode_files(results[i], out_dir, stem);
    }
    const Summary& s = results[i].summary;
    std::ostringstream line;
    line << stem << "  name=" << s.name << "  law=" << s.law
         << "  seed=" << s.seed
         << "  completed=" << (s.completed ? "true" : "false")
         << "  diverged=" << (s.diverged ? "true" : "false")
         << "  final_herr=" << s.final_herr_norm;
    if (!results[i].error.empty()) line << "  error=" << results[i].error;
    table << line.str() << '\n';
    std::cout << line.str() << '\n';
    any_diverged = any_diverged || s.diverged || !results[i].error.empty();
  }
  return any_diverged ? 2 : 0;
}

int cmd_coverage(std::size_t samples, std::uint64_t seed,
                 const GeometryFlags& gf) {
  ContactGeometry geom;
  try {
    geom = gf.make();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  const double p = cone_coverage_estimate(geom, samples, seed);
  const double half =
      1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  std::printf("samples             %zu\n", samples);
  std::printf("seed                %llu\n",
              static_cast<unsigned long long>(seed));
  std::printf("coverage estimate   %.6f\n", p);
  std::printf("95%% interval        [%.6f, %.6f]\n", p - half, p + half);
  return 0;
}

// ---------------------------------------------------------------------------
// verify: self-contained property suites over randomized inputs.

ContactGeometry random_geometry(Rng& rng) {
  const double mu_c = rng.uniform_in(0.2, 1.5);
  const double mu_z = rng.uniform_in(0.02, 0.3);
  const double fz_min = rng.uniform() < 0.5 ? 0.0 : rng.uniform_in(0.0, 5.0);
  const double x_min = rng.uniform_in(-0.3, -0.02);
  const double x_max = rng.uniform_in(0.02, 0.3);
  const double y_min = rng.uniform_in(-0.2, -0.02);
  const double y_max = rng.uniform_in(0.02, 0.2);
  return ContactGeometry::make(mu_c, mu_z, fz_min, x_min, x_max, y_min, y_max);
}

struct PropertyRow {
  std::string name;
  std::size_t samples;
  double worst;
  bool pass;
};

PropertyRow verify_roundtrip(std::size_t n) {
  Rng rng(11);
  double worst = 0.0;
  const int n_geoms = 8;
  std::vector<ContactGeometry> geoms;
  for (int i = 0; i < n_geoms; ++i) geoms.push_back(random_geometry(rng));
  for (std::size_t i = 0; i < n; ++i) {
    const Xi xi = rng.uniform_vec(6, -5.0, 5.0);
    const ContactGeometry& g = geoms[i % n_geoms];
    const InverseResult inv = phi_inverse(phi(xi, g), g);
    worst = std::max(worst, (inv.xi - xi).cwiseAbs().maxCoeff());
  }
  return {"round-trip xi -> wrench -> xi (inf norm)", n, worst, worst < 1e-8};
}

PropertyRow verify_gradient(std::size_t n) {
  Rng rng(12);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < n; ++i) {
    const ContactGeometry g = random_geometry(rng);
    const Xi xi = rng.uniform_vec(6, -5.0, 5.0);
    const Mat6 P = phi_gradient(xi, g);
    for (int c = 0; c < 6; ++c) {
      Xi hi = xi, lo = xi;
      hi(c) += h;
      lo(c) -= h;
      const Vec6 fd = (phi(hi, g) - phi(lo, g)) / (2.0 * h);
      for (int r = 0; r < 6; ++r) {
        const double err =
            std::abs(fd(r) - P(r, c)) / (1.0 + std::abs(P(r, c)));
        worst = std::max(worst, err);
      }
    }
  }
  return {"gradient vs central differences (mixed rel)", n, worst,
          worst < 1e-5};
}

PropertyRow verify_constraints(std::size_t n) {
  Rng rng(13);
  double worst = std::numeric_limits<double>::infinity();
  const int n_geoms = 10;
  std::vector<ContactGeometry> geoms;
  for (int i = 0; i < n_geoms; ++i) geoms.push_back(random_geometry(rng));
  for (std::size_t i = 0; i < n; ++i) {
    const Xi xi = rng.uniform_vec(6, -10.0, 10.0);
    const ContactGeometry& g = geoms[i % n_geoms];
    worst = std::min(worst, check_constraints(phi(xi, g), g).min_margin());
  }
  return {"constraint margins strictly positive (min)", n, worst, worst > 0.0};
}

PropertyRow verify_lyapunov(std::size_t draws) {
  double worst = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    Scenario s;
    s.name = "verify-lyapunov";
    ContactFrame fr;
    fr.geometry = ContactGeometry::make(0.5, 0.1, 0.0, -0.1, 0.1, -0.05, 0.05);
    s.frames = {fr};
    s.initial.m = 10.0;
    s.initial.com = Vec3(0.0, 0.0, 1.0);
    Rng rng(100 + d);
    s.initial.H = 0.05 * rng.gaussian_vec(6);
    s.initial.I_err = 0.02 * rng.gaussian_vec(6);
    s.law = ControlLaw::kJerkIntegral;
    s.gains = GainSet::make(4.0 * Mat6::Identity(), 3.0 * Mat6::Identity(),
                            Mat6::Identity());
    s.horizon_s = 20.0;
    s.plant_dt_s = 1e-3;
    s.controller_dt_s = 1e-2;
    const EpisodeResult r = run_episode(s);
    const double V0 = r.log.rows.front().V;
    for (std::size_t i = 1; i < r.log.rows.size(); ++i) {
      const double rise = r.log.rows[i].V - r.log.rows[i - 1].V;
      worst = std::max(worst, rise / std::max(V0, 1e-300));
    }
  }
  return {"Lyapunov value non-increasing (max rise / V0)", draws, worst,
          worst <= 1e-6};
}

PropertyRow verify_torque_map(std::size_t n) {
  Rng rng(14);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int joints = rng.uniform() < 0.5 ? 6 : 10;
    const int n_c = rng.uniform() < 0.5 ? 1 : 2;
    const int total = joints + 6;
    DynamicsSample smp;
    smp.n = joints;
    smp.n_c = n_c;
    const Mat Mh = rng.gaussian_mat(total, total);
    smp.M = Mh * Mh.transpose() + total * Mat::Identity(total, total);
    smp.J = rng.gaussian_mat(6 * n_c, total);
    smp.B = Mat::Zero(total, joints);
    smp.B.bottomRows(joints).setIdentity();
    const Vec nu_dot = rng.gaussian_vec(total);
    const Vec f = rng.gaussian_vec(6 * n_c);
    const Vec tau_src = rng.gaussian_vec(joints);
    smp.h = smp.J.transpose() * f + smp.B * tau_src - smp.M * nu_dot;
    smp.Jdot_nu = -smp.J * nu_dot;

    const Vec tau = torque_from_wrench(smp, f);
    const Mat Minv = smp.M.llt().solve(Mat::Identity(total, total));
    const Vec res = smp.J * Minv * (smp.J.transpose() * f - smp.h) +
                    (smp.J * Minv * smp.B) * tau + smp.Jdot_nu;
    worst = std::max(worst, res.norm() / (1.0 + f.norm()));
  }
  return {"torque map dynamics residual (scaled)", n, worst, worst < 1e-8};
}

int cmd_verify(const std::string& profile) {
  const bool full = profile == "full";
  std::vector<PropertyRow> rows;
  rows.push_back(verify_roundtrip(full ? 100000 : 2000));
  rows.push_back(verify_gradient(full ? 5000 : 500));
  rows.push_back(verify_constraints(full ? 100000 : 20000));
  rows.push_back(verify_lyapunov(full ? 5 : 2));
  rows.push_back(verify_torque_map(full ? 1000 : 100));

  bool all = true;
  std::printf("%-48s %10s %14s %6s\n", "property", "samples", "worst", "pass");
  for (const auto& r : rows) {
    std::printf("%-48s %10zu %14.3e %6s\n", r.name.c_str(), r.samples, r.worst,
                r.pass ? "yes" : "NO");
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

std::optional<Vec6> parse_six(const std::string& text) {
  std::stringstream ss(text);
  Vec6 v;
  std::string tok;
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(ss, tok, ',')) return std::nullopt;
    try {
      v(i) = std::stod(tok);
    } catch (...) {
      return std::nullopt;
    }
  }
  return std::getline(ss, tok, ',') ? std::nullopt : std::optional<Vec6>(v);
}

void print_margins(const Wrench& w, const ContactGeometry& g) {
  const ConstraintReport rep = check_constraints(w, g);
  auto line = [](const char* name, const ConstraintReport::Entry& e) {
    std::printf("  %-14s margin %+.6e  %s\n", name, e.margin,
                e.satisfied ? "ok" : "VIOLATED");
  };
  line("normal force", rep.normal_force);
  line("friction", rep.friction);
  line("cop x", rep.cop_x);
  line("cop y", rep.cop_y);
  line("torsion", rep.torsion);
}

int cmd_inspect(const std::string& xi_text, const std::string& wrench_text,
                const GeometryFlags& gf) {
  ContactGeometry geom;
  try {
    geom = gf.make();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  if (xi_text.empty() == wrench_text.empty()) {
    std::cerr << "config error: pass exactly one of --xi or --wrench\n";
    return 1;
  }
  Eigen::IOFormat fmt(9, 0, ", ", "\n", "  [", "]");
  if (!xi_text.empty()) {
    const auto xi = parse_six(xi_text);
    if (!xi) {
      std::cerr << "config error: --xi: expected 6 comma-separated numbers\n";
      return 1;
    }
    const Wrench w = phi(*xi, geom);
    std::cout << "wrench = phi(xi):\n" << w.transpose().format(fmt) << '\n';
    std::cout << "gradient:\n" << phi_gradient(*xi, geom).format(fmt) << '\n';
    std::cout << "constraints:\n";
    print_margins(w, geom);
  } else {
    const auto w = parse_six(wrench_text);
    if (!w) {
      std::cerr
          << "config error: --wrench: expected 6 comma-separated numbers\n";
      return 1;
    }
    const InverseResult inv = phi_inverse(*w, geom);
    std::cout << "xi = inverse(wrench):\n"
              << inv.xi.transpose().format(fmt) << '\n';
    std::cout << "saturated: " << (inv.saturated ? "yes" : "no") << '\n';
    std::cout << "wrench reproduced by phi(xi):\n"
              << phi(inv.xi, geom).transpose().format(fmt) << '\n';
    std::cout << "constraints of the requested wrench:\n";
    print_margins(*w, geom);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contact-stable wrench parametrization and momentum jerk control"};
  app.require_subcommand(1);

  std::string config, out_dir = ".";
  std::optional<std::uint64_t> seed;
  int parallel = 1;
  bool plot = false;
  std::string profile = "quick";
  std::size_t samples = 1000000;
  std::uint64_t cov_seed = 1;
  std::string xi_text, wrench_text;
  GeometryFlags geom_flags;

  CLI::App* run = app.add_subcommand("run", "run one episode from a config");
  run->add_option("--config", config, "scenario JSON path")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override the measurement seed");
  run->add_flag("--plot", plot, "emit a gnuplot script next to the CSV");

  CLI::App* suite = app.add_subcommand("suite", "run a list of episodes");
  suite->add_option("--config", config, "suite JSON path")->required();
  suite->add_option("--out", out_dir, "output directory");
  suite->add_option("--seed", seed, "override every measurement seed");
  suite->add_option("--parallel", parallel, "worker threads");

  CLI::App* verify = app.add_subcommand("verify", "run the property suites");
  verify->add_option("--profile", profile, "quick|full")
      ->check(CLI::IsMember({"quick", "full"}));

  CLI::App* coverage =
      app.add_subcommand("coverage", "estimate friction-disk coverage");
  coverage->add_option("--samples", samples, "Monte Carlo samples");
  coverage->add_option("--seed", cov_seed, "random seed");
  geom_flags.attach(coverage);

  CLI::App* inspect =
      app.add_subcommand("inspect", "evaluate one xi or wrench point");
  inspect->add_option("--xi", xi_text, "6 comma-separated xi values");
  inspect->add_option("--wrench", wrench_text,
                      "6 comma-separated wrench values");
  GeometryFlags inspect_geom;
  inspect_geom.attach(inspect);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config, out_dir, seed, plot);
    if (suite->parsed()) return cmd_suite(config, out_dir, seed, parallel);
    if (verify->parsed()) return cmd_verify(profile);
    if (coverage->parsed()) return cmd_coverage(samples, cov_seed, geom_flags);
    if (inspect->parsed())
      return cmd_inspect(xi_text, wrench_text, inspect_geom);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

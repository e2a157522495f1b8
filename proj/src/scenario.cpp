#include "jerkctl/scenario.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace jerkctl {

using nlohmann::json;

std::string to_string(ControlLaw law) {
  switch (law) {
    case ControlLaw::kJerkPd: return "jerk-pd";
    case ControlLaw::kJerkPdKi: return "jerk-pd-ki";
    case ControlLaw::kJerkIntegral: return "jerk-integral";
    case ControlLaw::kJerkIntegralReg: return "jerk-integral-reg";
  }
  return "unknown";
}

ControlLaw law_from_string(const std::string& name) {
  if (name == "jerk-pd") return ControlLaw::kJerkPd;
  if (name == "jerk-pd-ki") return ControlLaw::kJerkPdKi;
  if (name == "jerk-integral") return ControlLaw::kJerkIntegral;
  if (name == "jerk-integral-reg") return ControlLaw::kJerkIntegralReg;
  throw std::invalid_argument("law: unknown name '" + name + "'");
}

namespace {

// Natural cubic spline with per-segment Vec6 coefficients; linear when only
// two knots are given.
class Spline {
 public:
  Spline(std::vector<double> t, std::vector<Vec6> y)
      : t_(std::move(t)), y_(std::move(y)), m_(t_.size(), Vec6::Zero()) {
    const std::size_t n = t_.size();
    if (n < 3) return;  // natural ends: second derivatives stay zero
    // Thomas solve of the tridiagonal system for interior second derivatives.
    const std::size_t ni = n - 2;
    std::vector<double> diag(ni), upper(ni), lower(ni);
    std::vector<Vec6> rhs(ni);
    for (std::size_t i = 0; i < ni; ++i) {
      const double h0 = t_[i + 1] - t_[i];
      const double h1 = t_[i + 2] - t_[i + 1];
      lower[i] = h0 / 6.0;
      diag[i] = (h0 + h1) / 3.0;
      upper[i] = h1 / 6.0;
      rhs[i] = (y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0;
    }
    for (std::size_t i = 1; i < ni; ++i) {
      const double w = lower[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[ni] = rhs[ni - 1] / diag[ni - 1];
    for (std::size_t i = ni - 1; i-- > 0;)
      m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
  }

  RefSample eval(double t) const {
    RefSample s;
    if (t <= t_.front()) {
      s.H = y_.front();
      return s;
    }
    if (t >= t_.back()) {
      s.H = y_.back();
      return s;
    }
    std::size_t i = 1;
    while (t_[i] < t) ++i;
    const double h = t_[i] - t_[i - 1];
    const double a = (t_[i] - t) / h;
    const double b = (t - t_[i - 1]) / h;
    s.H = a * y_[i - 1] + b * y_[i] +
          ((a * a * a - a) * m_[i - 1] + (b * b * b - b) * m_[i]) *
              (h * h / 6.0);
    s.H_dot = (y_[i] - y_[i - 1]) / h +
              ((1.0 - 3.0 * a * a) * m_[i - 1] + (3.0 * b * b - 1.0) * m_[i]) *
                  (h / 6.0);
    s.H_ddot = a * m_[i - 1] + b * m_[i];
    return s;
  }

 private:
  std::vector<double> t_;
  std::vector<Vec6> y_;
  std::vector<Vec6> m_;
};

}  // namespace

Reference build_reference(const ReferenceSpec& spec) {
  Reference ref;
  switch (spec.type) {
    case ReferenceSpec::Type::kConstant: {
      const Vec6 H = spec.offset;
      ref.eval = [H](double) {
        RefSample s;
        s.H = H;
        return s;
      };
      break;
    }
    case ReferenceSpec::Type::kSinusoid: {
      const Vec6 off = spec.offset;
      const Vec6 amp = spec.amplitude;
      const double w = 2.0 * M_PI * spec.frequency_hz;
      ref.eval = [off, amp, w](double t) {
        RefSample s;
        s.H = off + amp * std::sin(w * t);
        s.H_dot = amp * (w * std::cos(w * t));
        s.H_ddot = amp * (-w * w * std::sin(w * t));
        return s;
      };
      break;
    }
    case ReferenceSpec::Type::kSpline: {
      auto sp = std::make_shared<Spline>(spec.knot_t_s, spec.knot_H);
      ref.eval = [sp](double t) { return sp->eval(t); };
      break;
    }
  }
  return ref;
}

ScenarioError::ScenarioError(std::vector<std::string> fields)
    : std::runtime_error([&fields] {
        std::string msg = "scenario config invalid:";
        for (const auto& f : fields) msg += "\n  " + f;
        return msg;
      }()),
      fields_(std::move(fields)) {}

std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> errs;
  auto bad = [&errs](const std::string& field, const std::string& why) {
    errs.push_back(field + ": " + why);
  };

  if (s.frames.empty()) bad("contacts", "at least one contact is required");
  const auto n_c = static_cast<Eigen::Index>(s.frames.size());
  if (!(s.initial.m > 0.0)) bad("mass_kg", "must be > 0");
  if (!(s.initial.g > 0.0)) bad("gravity_mps2", "must be > 0");
  if (!(s.horizon_s > 0.0)) bad("horizon_s", "must be > 0");
  if (!(s.plant_dt_s > 0.0)) bad("plant_dt_s", "must be > 0");
  if (!(s.controller_dt_s > 0.0)) {
    bad("controller_dt_s", "must be > 0");
  } else if (s.plant_dt_s > 0.0) {
    const double ratio = s.controller_dt_s / s.plant_dt_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 0.5)
      bad("controller_dt_s", "must be an integer multiple of plant_dt_s");
  }
  if (s.resync_every_cycles < 0)
    bad("resync_every_cycles", "must be >= 0");
  if (s.initial_xi.size() != 0 && s.initial_xi.size() != 6 * n_c)
    bad("initial_xi", "must have 6 entries per contact");
  if (s.measurement.bias.size() != 0 && s.measurement.bias.size() != 6 * n_c)
    bad("measurement.bias_n_nm", "must have 6 entries per contact");
  if (!(s.measurement.noise_std >= 0.0))
    bad("measurement.noise_std_n", "must be >= 0");
  for (std::size_t i = 0; i < s.disturbances.size(); ++i) {
    const auto& d = s.disturbances[i];
    if (!(d.stop_s > d.start_s) || d.start_s < 0.0)
      bad("disturbances[" + std::to_string(i) + "]",
          "needs 0 <= start_s < stop_s");
  }
  if (s.torque_model.enabled) {
    if (s.torque_model.joints < 1) bad("torque_model.joints", "must be >= 1");
    if (!(s.torque_model.k_tau >= 0.0))
      bad("torque_model.k_tau", "must be >= 0");
  }
  return errs;
}

namespace {

struct Collector {
  std::vector<std::string> errs;
  void add(const std::string& field, const std::string& why) {
    errs.push_back(field + ": " + why);
  }
};

double get_num(const json& j, const std::string& key, double fallback,
               bool required, Collector& c, const std::string& scope) {
  const std::string label = scope.empty() ? key : scope + "." + key;
  if (!j.contains(key)) {
    if (required) c.add(label, "missing required field");
    return fallback;
  }
  if (!j.at(key).is_number()) {
    c.add(label, "must be a number");
    return fallback;
  }
  return j.at(key).get<double>();
}

bool get_vec_fixed(const json& j, const std::string& key, Eigen::Index n,
                   Vec& out, bool required, Collector& c,
                   const std::string& scope) {
  const std::string label = scope.empty() ? key : scope + "." + key;
  if (!j.contains(key)) {
    if (required) c.add(label, "missing required field");
    return false;
  }
  const json& a = j.at(key);
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != n) {
    c.add(label, "must be an array of " + std::to_string(n) + " numbers");
    return false;
  }
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!a[static_cast<std::size_t>(i)].is_number()) {
      c.add(label, "must be an array of " + std::to_string(n) + " numbers");
      return false;
    }
    out(i) = a[static_cast<std::size_t>(i)].get<double>();
  }
  return true;
}

// A gain entry is a scalar (s * I), a 6-array (diagonal), or a 36-array
// (row-major full matrix).
Mat6 get_gain(const json& j, const std::string& key, const Mat6& fallback,
              Collector& c) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number()) return v.get<double>() * Mat6::Identity();
  if (v.is_array() && v.size() == 6) {
    Vec6 d;
    for (int i = 0; i < 6; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) {
        c.add("gains." + key, "entries must be numbers");
        return fallback;
      }
      d(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    return d.asDiagonal();
  }
  if (v.is_array() && v.size() == 36) {
    Mat6 m;
    for (int r = 0; r < 6; ++r)
      for (int col = 0; col < 6; ++col) {
        const auto& e = v[static_cast<std::size_t>(6 * r + col)];
        if (!e.is_number()) {
          c.add("gains." + key, "entries must be numbers");
          return fallback;
        }
        m(r, col) = e.get<double>();
      }
    return m;
  }
  c.add("gains." + key, "must be a scalar, 6-array, or 36-array");
  return fallback;
}

}  // namespace

Scenario scenario_from_string(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError({std::string("json: ") + e.what()});
  }
  Collector c;
  Scenario s;

  if (j.contains("name")) {
    if (j.at("name").is_string())
      s.name = j.at("name").get<std::string>();
    else
      c.add("name", "must be a string");
  }

  s.initial.m = get_num(j, "mass_kg", 1.0, true, c, "");
  s.initial.g = get_num(j, "gravity_mps2", 9.81, false, c, "");
  Vec tmp;
  if (get_vec_fixed(j, "com_m", 3, tmp, true, c, "")) s.initial.com = tmp;
  if (get_vec_fixed(j, "initial_momentum", 6, tmp, false, c, ""))
    s.initial.H = tmp;
  if (get_vec_fixed(j, "initial_integral_error", 6, tmp, false, c, ""))
    s.initial.I_err = tmp;

  if (!j.contains("contacts") || !j.at("contacts").is_array() ||
      j.at("contacts").empty()) {
    c.add("contacts", "must be a non-empty array");
  } else {
    std::size_t idx = 0;
    for (const auto& cj : j.at("contacts")) {
      const std::string scope = "contacts[" + std::to_string(idx) + "]";
      ContactFrame fr;
      if (get_vec_fixed(cj, "origin_m", 3, tmp, true, c, scope))
        fr.origin = tmp;
      if (get_vec_fixed(cj, "origin_velocity_mps", 3, tmp, false, c, scope))
        fr.origin_velocity = tmp;
      if (!cj.contains("geometry")) {
        c.add(scope + ".geometry", "missing required field");
      } else {
        const json& gj = cj.at("geometry");
        const double mu_c = get_num(gj, "mu_c", 1.0, true, c, scope + ".geometry");
        const double mu_z = get_num(gj, "mu_z", 1.0, true, c, scope + ".geometry");
        const double fz_min = get_num(gj, "fz_min_n", 0.0, false, c, scope + ".geometry");
        const double x_min = get_num(gj, "x_min_m", -1.0, true, c, scope + ".geometry");
        const double x_max = get_num(gj, "x_max_m", 1.0, true, c, scope + ".geometry");
        const double y_min = get_num(gj, "y_min_m", -1.0, true, c, scope + ".geometry");
        const double y_max = get_num(gj, "y_max_m", 1.0, true, c, scope + ".geometry");
        try {
          fr.geometry = ContactGeometry::make(mu_c, mu_z, fz_min, x_min, x_max,
                                              y_min, y_max);
        } catch (const std::invalid_argument& e) {
          c.add(scope + ".geometry", e.what());
        }
      }
      s.frames.push_back(fr);
      ++idx;
    }
  }
  const auto n_c = static_cast<Eigen::Index>(s.frames.size());

  if (j.contains("law")) {
    if (!j.at("law").is_string()) {
      c.add("law", "must be a string");
    } else {
      try {
        s.law = law_from_string(j.at("law").get<std::string>());
      } catch (const std::invalid_argument&) {
        c.add("law",
              "must be one of jerk-pd, jerk-pd-ki, jerk-integral, "
              "jerk-integral-reg");
      }
    }
  }

  {
    const json gj = j.contains("gains") && j.at("gains").is_object()
                        ? j.at("gains")
                        : json::object();
    if (j.contains("gains") && !j.at("gains").is_object())
      c.add("gains", "must be an object");
    const Mat6 Kp = get_gain(gj, "kp", Mat6::Identity(), c);
    const Mat6 Kd = get_gain(gj, "kd", Mat6::Identity(), c);
    const Mat6 Ko = get_gain(gj, "ko", Mat6::Identity(), c);
    const Mat6 Ki = get_gain(gj, "ki", Mat6::Zero(), c);
    const double k_e = get_num(gj, "k_e", 0.0, false, c, "gains");
    try {
      s.gains = GainSet::make(Kp, Kd, Ko, Ki, k_e);
    } catch (const std::invalid_argument& e) {
      c.add("gains", e.what());
    }
  }

  if (j.contains("reference")) {
    const json& rj = j.at("reference");
    const std::string type =
        rj.contains("type") && rj.at("type").is_string()
            ? rj.at("type").get<std::string>()
            : "constant";
    if (type == "constant") {
      s.reference.type = ReferenceSpec::Type::kConstant;
      if (get_vec_fixed(rj, "H", 6, tmp, false, c, "reference"))
        s.reference.offset = tmp;
    } else if (type == "sinusoid") {
      s.reference.type = ReferenceSpec::Type::kSinusoid;
      if (get_vec_fixed(rj, "offset", 6, tmp, false, c, "reference"))
        s.reference.offset = tmp;
      if (get_vec_fixed(rj, "amplitude", 6, tmp, true, c, "reference"))
        s.reference.amplitude = tmp;
      s.reference.frequency_hz =
          get_num(rj, "frequency_hz", 0.0, true, c, "reference");
      if (!(s.reference.frequency_hz >= 0.0))
        c.add("reference.frequency_hz", "must be >= 0");
    } else if (type == "spline") {
      s.reference.type = ReferenceSpec::Type::kSpline;
      if (!rj.contains("knots") || !rj.at("knots").is_array() ||
          rj.at("knots").size() < 2) {
        c.add("reference.knots", "must be an array of at least 2 knots");
      } else {
        double prev_t = -std::numeric_limits<double>::infinity();
        std::size_t ki = 0;
        for (const auto& kj : rj.at("knots")) {
          const std::string scope = "reference.knots[" + std::to_string(ki) + "]";
          const double t = get_num(kj, "t_s", 0.0, true, c, scope);
          if (!(t > prev_t)) c.add(scope + ".t_s", "must be strictly increasing");
          prev_t = t;
          s.reference.knot_t_s.push_back(t);
          Vec hk;
          if (get_vec_fixed(kj, "H", 6, hk, true, c, scope))
            s.reference.knot_H.push_back(hk);
          else
            s.reference.knot_H.push_back(Vec6::Zero());
          ++ki;
        }
      }
    } else {
      c.add("reference.type", "must be constant, sinusoid, or spline");
    }
  }

  if (j.contains("measurement")) {
    const json& mj = j.at("measurement");
    if (n_c > 0 && get_vec_fixed(mj, "bias_n_nm", 6 * n_c, tmp, false, c,
                                 "measurement"))
      s.measurement.bias = tmp;
    s.measurement.noise_std =
        get_num(mj, "noise_std_n", 0.0, false, c, "measurement");
    if (mj.contains("seed")) {
      if (mj.at("seed").is_number_unsigned() || mj.at("seed").is_number_integer())
        s.measurement.seed = mj.at("seed").get<std::uint64_t>();
      else
        c.add("measurement.seed", "must be an unsigned integer");
    } else if (s.measurement.noise_std > 0.0) {
      c.add("measurement.seed", "required when noise_std_n > 0");
    }
  }

  if (j.contains("disturbances")) {
    if (!j.at("disturbances").is_array()) {
      c.add("disturbances", "must be an array");
    } else {
      std::size_t di = 0;
      for (const auto& dj : j.at("disturbances")) {
        const std::string scope = "disturbances[" + std::to_string(di) + "]";
        DisturbancePulse p;
        p.start_s = get_num(dj, "start_s", 0.0, true, c, scope);
        p.stop_s = get_num(dj, "stop_s", 0.0, true, c, scope);
        if (get_vec_fixed(dj, "wrench_n_nm", 6, tmp, true, c, scope))
          p.wrench = tmp;
        s.disturbances.push_back(p);
        ++di;
      }
    }
  }

  if (j.contains("torque_model")) {
    const json& tj = j.at("torque_model");
    s.torque_model.enabled =
        tj.contains("enabled") && tj.at("enabled").is_boolean()
            ? tj.at("enabled").get<bool>()
            : true;
    s.torque_model.joints =
        static_cast<int>(get_num(tj, "joints", 4, false, c, "torque_model"));
    if (tj.contains("seed") && tj.at("seed").is_number())
      s.torque_model.seed = tj.at("seed").get<std::uint64_t>();
    s.torque_model.tau_src_scale =
        get_num(tj, "tau_src_scale", 0.5, false, c, "torque_model");
    s.torque_model.xi0_active =
        tj.contains("xi0_active") && tj.at("xi0_active").is_boolean() &&
        tj.at("xi0_active").get<bool>();
    s.torque_model.k_tau = get_num(tj, "k_tau", 0.5, false, c, "torque_model");
  }

  s.horizon_s = get_num(j, "horizon_s", 1.0, true, c, "");
  s.plant_dt_s = get_num(j, "plant_dt_s", 1e-3, false, c, "");
  s.controller_dt_s = get_num(j, "controller_dt_s", 1e-2, false, c, "");
  s.resync_every_cycles = static_cast<int>(
      get_num(j, "resync_every_cycles", 0, false, c, ""));
  if (n_c > 0 && get_vec_fixed(j, "initial_xi", 6 * n_c, tmp, false, c, ""))
    s.initial_xi = tmp;

  auto semantic = validate(s);
  c.errs.insert(c.errs.end(), semantic.begin(), semantic.end());
  if (!c.errs.empty()) throw ScenarioError(c.errs);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"config: cannot open '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_string(ss.str());
}

}  // namespace jerkctl

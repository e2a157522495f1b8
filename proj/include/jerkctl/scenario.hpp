#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jerkctl/controllers.hpp"
#include "jerkctl/momentum.hpp"

namespace jerkctl {

enum class ControlLaw {
  kJerkPd,           // feedback-linearizing PD
  kJerkPdKi,         // PD plus third-order integral term
  kJerkIntegral,     // integral-augmented law
  kJerkIntegralReg,  // integral law with the -k_e (xi - xi_d) anchor
};

std::string to_string(ControlLaw law);
ControlLaw law_from_string(const std::string& name);

struct ReferenceSpec {
  enum class Type { kConstant, kSinusoid, kSpline };
  Type type = Type::kConstant;
  Vec6 offset = Vec6::Zero();     // constant level; sinusoid midline
  Vec6 amplitude = Vec6::Zero();  // sinusoid only
  double frequency_hz = 0.0;      // sinusoid only
  std::vector<double> knot_t_s;   // spline only, strictly increasing
  std::vector<Vec6> knot_H;       // spline only, one value per knot
};

// Realizes a ReferenceSpec as callable H_d(t) with analytic first and
// second derivatives. Spline references clamp to the end knots with zero
// derivatives outside the knot span.
Reference build_reference(const ReferenceSpec& spec);

struct MeasurementModel {
  Vec bias = Vec();        // additive offset on the measured stack, 6 n_c
  double noise_std = 0.0;  // i.i.d. Gaussian per wrench coordinate
  std::uint64_t seed = 0;
};

struct DisturbancePulse {
  double start_s = 0.0;
  double stop_s = 0.0;
  Vec6 wrench = Vec6::Zero();  // applied directly to the momentum rate
};

// Synthetic articulated-dynamics snapshot used for the torque readout
// channel. The sample is generated once per episode, anchored so the
// episode's equilibrium wrench distribution maps to the small torque
// tau_src: h = J^T f_eq + B tau_src. Without anchoring the torque-descent
// objective has its minimum far outside the wrench image and the direction
// is useless.
struct TorqueModelSpec {
  bool enabled = false;
  int joints = 4;
  std::uint64_t seed = 1;
  double tau_src_scale = 0.5;
  bool xi0_active = false;
  double k_tau = 0.5;  // K_tau = k_tau * I
};

struct Scenario {
  std::string name = "episode";
  std::vector<ContactFrame> frames;
  MomentumState initial;  // H, com, I_err, m, g
  Vec initial_xi;         // empty: start from the equilibrium inversion
  ControlLaw law = ControlLaw::kJerkIntegral;
  GainSet gains;
  ReferenceSpec reference;
  MeasurementModel measurement;
  std::vector<DisturbancePulse> disturbances;
  TorqueModelSpec torque_model;
  double horizon_s = 1.0;
  double plant_dt_s = 1e-3;
  double controller_dt_s = 1e-2;
  int resync_every_cycles = 0;  // 0: integrator never resynchronized
};

// Collects one entry per violated field (empty means valid).
std::vector<std::string> validate(const Scenario& s);

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

// Parses and fully validates; throws ScenarioError enumerating every
// violated field rather than stopping at the first.
Scenario scenario_from_string(const std::string& json_text);
Scenario load_scenario(const std::string& path);

}  // namespace jerkctl

#pragma once
// Contact-stable wrench parametrization: a smooth map phi from free
// parameters xi in R^6 onto wrenches that satisfy the contact constraints
// (positive normal force, friction cone, CoP in the support rectangle,
// torsional friction) strictly for every finite xi. Includes the saturated
// inverse, the analytic gradient, the constraint checker, stacked
// multi-contact forms, and a Monte Carlo estimate of how much of the
// friction disk the map covers.

#include <cstdint>
#include <vector>

#include "jerkctl/linalg.hpp"

namespace jerkctl {

// Wrench layout: [fx fy fz mx my mz]; xi layout: [xi1 .. xi6].
using Wrench = Vec6;
using Xi = Vec6;

struct ContactGeometry {
  double mu_c = 0.0;    // static friction coefficient
  double mu_z = 0.0;    // torsional friction coefficient (m)
  double fz_min = 0.0;  // minimum normal force (N)
  double x_min = 0.0, x_max = 0.0;  // support rectangle (m), contact frame
  double y_min = 0.0, y_max = 0.0;
  // Derived offsets, fixed at construction:
  //   delta_x = (x_max - x_min)/2, delta_x0 = -(x_min + x_max)/2
  //   delta_y = (y_max - y_min)/2, delta_y0 = +(y_min + y_max)/2
  double delta_x = 0.0, delta_x0 = 0.0, delta_y = 0.0, delta_y0 = 0.0;

  // Validates mu_c > 0, mu_z > 0, fz_min >= 0, x_min < x_max, y_min < y_max
  // and fills the derived offsets. Throws std::invalid_argument naming the
  // offending field.
  static ContactGeometry make(double mu_c, double mu_z, double fz_min,
                              double x_min, double x_max,
                              double y_min, double y_max);
};

// fz contributions use e^{xi3} with xi3 capped here so runaway integrators
// stay finite (fz <= ~2.4e17 N) without touching the physical regime.
inline constexpr double kXi3Cap = 40.0;

struct SaturationPolicy {
  bool enabled = true;
  double eps_z = 1e-6;           // floor for fz - fz_min (N)
  double atanh_margin = 1e-6;    // atanh args clamped to +-(1 - margin)
  double tanh_sq_max = 1.0 - 1e-6;  // ceiling for the tanh^2 solve
};

struct InverseResult {
  Xi xi = Xi::Zero();
  bool saturated = false;  // any clamp engaged; w was outside the image
};

struct ConstraintReport {
  struct Entry {
    bool satisfied = false;
    double margin = 0.0;  // signed distance to the boundary, natural units
  };
  Entry normal_force;  // fz - fz_min > 0              (N)
  Entry friction;      // mu_c fz - |f_tangential| > 0 (N)
  Entry cop_x;         // x_min < -my/fz < x_max       (m)
  Entry cop_y;         // y_min <  mx/fz < y_max       (m)
  Entry torsion;       // mu_z - |mz|/fz > 0           (m)

  bool all_satisfied() const {
    return normal_force.satisfied && friction.satisfied && cop_x.satisfied &&
           cop_y.satisfied && torsion.satisfied;
  }
  double min_margin() const;
};

Wrench phi(const Xi& xi, const ContactGeometry& g);

// Inverse of phi. For w in the image, phi(phi_inverse(w)) == w to round-trip
// tolerance and `saturated` is false. Outside the image the policy clamps
// every out-of-domain intermediate so the result is always finite; with the
// policy disabled an out-of-domain w throws std::domain_error.
InverseResult phi_inverse(const Wrench& w, const ContactGeometry& g,
                          const SaturationPolicy& sat = {});

// Analytic Jacobian of phi. Nonzero pattern: (0,0),(0,1),(0,2),(1,0),(1,1),
// (1,2),(2,2),(3,2),(3,3),(4,2),(4,4),(5,2),(5,5). Invertible for every
// finite xi.
Mat6 phi_gradient(const Xi& xi, const ContactGeometry& g);

ConstraintReport check_constraints(const Wrench& w, const ContactGeometry& g);

// Stacked forms, one block per contact. xis has 6 * geoms.size() entries.
Vec stack_phi(const Vec& xis, const std::vector<ContactGeometry>& geoms);
Mat stack_gradient(const Vec& xis, const std::vector<ContactGeometry>& geoms);

// Monte Carlo estimate of
//   area(image of (fx, fy) at fixed fz over all xi1, xi2)
//   / area(disk of radius mu_c * fz).
// Membership is decided operationally: a point is covered iff the saturated
// inverse engages no clamp and the round trip reproduces the wrench.
// Deterministic for a given seed; the ratio does not depend on fz (pass
// fz <= 0 to use the default fz_min + 1).
double cone_coverage_estimate(const ContactGeometry& g, std::size_t samples,
                              std::uint64_t seed, double fz = -1.0);

}  // namespace jerkctl

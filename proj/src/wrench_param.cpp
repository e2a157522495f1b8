#include "jerkctl/wrench_param.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace jerkctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Deterministic uniform in [0,1) from the raw 64-bit stream; avoids the
// implementation-defined std::uniform_real_distribution.
double u01(std::mt19937_64& rng);

}  // namespace

ContactGeometry ContactGeometry::make(double mu_c, double mu_z, double fz_min,
                                      double x_min, double x_max,
                                      double y_min, double y_max) {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("ContactGeometry: " + msg);
  };
  if (!(mu_c > 0.0) || !std::isfinite(mu_c)) fail("mu_c must be > 0");
  if (!(mu_z > 0.0) || !std::isfinite(mu_z)) fail("mu_z must be > 0");
  if (!(fz_min >= 0.0) || !std::isfinite(fz_min)) fail("fz_min must be >= 0");
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max))
    fail("x_min must be < x_max");
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_min < y_max))
    fail("y_min must be < y_max");
  ContactGeometry g;
  g.mu_c = mu_c;
  g.mu_z = mu_z;
  g.fz_min = fz_min;
  g.x_min = x_min;
  g.x_max = x_max;
  g.y_min = y_min;
  g.y_max = y_max;
  g.delta_x = 0.5 * (x_max - x_min);
  g.delta_x0 = -0.5 * (x_min + x_max);
  g.delta_y = 0.5 * (y_max - y_min);
  g.delta_y0 = 0.5 * (y_min + y_max);
  return g;
}

Wrench phi(const Xi& xi, const ContactGeometry& g) {
  const double t1 = std::tanh(xi(0));
  const double t2 = std::tanh(xi(1));
  const double t4 = std::tanh(xi(3));
  const double t5 = std::tanh(xi(4));
  const double t6 = std::tanh(xi(5));
  const double e3 = std::exp(std::min(xi(2), kXi3Cap));
  const double fz = e3 + g.fz_min;
  Wrench w;
  w(0) = g.mu_c * t1 * fz / std::sqrt(1.0 + t2 * t2);
  w(1) = g.mu_c * t2 * fz / std::sqrt(1.0 + t1 * t1);
  w(2) = fz;
  w(3) = (g.delta_y * t4 + g.delta_y0) * fz;
  w(4) = (g.delta_x * t5 + g.delta_x0) * fz;
  w(5) = g.mu_z * t6 * fz;
  return w;
}

InverseResult phi_inverse(const Wrench& w, const ContactGeometry& g,
                          const SaturationPolicy& sat) {
  InverseResult out;
  bool& clip = out.saturated;

  double dz = w(2) - g.fz_min;
  if (dz < sat.eps_z) {
    if (!sat.enabled)
      throw std::domain_error("phi_inverse: fz <= fz_min outside the domain");
    dz = sat.eps_z;
    clip = true;
  }
  out.xi(2) = std::log(dz);
  const double fz = dz + g.fz_min;

  auto inv_tanh = [&](double arg) {
    const double lim = 1.0 - sat.atanh_margin;
    if (std::abs(arg) > lim) {
      if (!sat.enabled)
        throw std::domain_error("phi_inverse: moment outside the domain");
      arg = std::clamp(arg, -lim, lim);
      clip = true;
    }
    return std::atanh(arg);
  };
  out.xi(3) = inv_tanh((w(3) / fz - g.delta_y0) / g.delta_y);
  out.xi(4) = inv_tanh((w(4) / fz - g.delta_x0) / g.delta_x);
  out.xi(5) = inv_tanh(w(5) / (g.mu_z * fz));

  // [tanh^2 xi1; tanh^2 xi2] solves the 2x2 system built from the two
  // tangential rows; the determinant mu^4 fz^4 - fx^2 fy^2 is positive on
  // the whole image.
  const double fx2 = w(0) * w(0);
  const double fy2 = w(1) * w(1);
  const double e = g.mu_c * g.mu_c * fz * fz;
  const double det = e * e - fx2 * fy2;
  double t1sq, t2sq;
  if (det <= 0.0) {
    if (!sat.enabled)
      throw std::domain_error("phi_inverse: tangential force outside the domain");
    t1sq = t2sq = sat.tanh_sq_max;
    clip = true;
  } else {
    t1sq = fx2 * (e + fy2) / det;
    t2sq = fy2 * (e + fx2) / det;
    auto clamp_sq = [&](double v) {
      if (v > sat.tanh_sq_max) {
        if (!sat.enabled)
          throw std::domain_error(
              "phi_inverse: tangential force outside the domain");
        clip = true;
        return sat.tanh_sq_max;
      }
      return std::max(v, 0.0);
    };
    t1sq = clamp_sq(t1sq);
    t2sq = clamp_sq(t2sq);
  }
  out.xi(0) = sgn(w(0)) * std::atanh(std::sqrt(t1sq));
  out.xi(1) = sgn(w(1)) * std::atanh(std::sqrt(t2sq));
  return out;
}

Mat6 phi_gradient(const Xi& xi, const ContactGeometry& g) {
  const double t1 = std::tanh(xi(0));
  const double t2 = std::tanh(xi(1));
  const double t4 = std::tanh(xi(3));
  const double t5 = std::tanh(xi(4));
  const double t6 = std::tanh(xi(5));
  const double s1 = 1.0 - t1 * t1;  // sech^2
  const double s2 = 1.0 - t2 * t2;
  const double e3 = std::exp(std::min(xi(2), kXi3Cap));
  const double fz = e3 + g.fz_min;
  const double r1 = std::sqrt(1.0 + t1 * t1);
  const double r2 = std::sqrt(1.0 + t2 * t2);

  Mat6 p = Mat6::Zero();
  p(0, 0) = g.mu_c * s1 * fz / r2;
  p(0, 1) = -g.mu_c * t1 * t2 * s2 * fz / (r2 * r2 * r2);
  p(0, 2) = g.mu_c * t1 * e3 / r2;
  p(1, 0) = -g.mu_c * t2 * t1 * s1 * fz / (r1 * r1 * r1);
  p(1, 1) = g.mu_c * s2 * fz / r1;
  p(1, 2) = g.mu_c * t2 * e3 / r1;
  p(2, 2) = e3;
  p(3, 2) = (g.delta_y * t4 + g.delta_y0) * e3;
  p(3, 3) = g.delta_y * (1.0 - t4 * t4) * fz;
  p(4, 2) = (g.delta_x * t5 + g.delta_x0) * e3;
  p(4, 4) = g.delta_x * (1.0 - t5 * t5) * fz;
  p(5, 2) = g.mu_z * t6 * e3;
  p(5, 5) = g.mu_z * (1.0 - t6 * t6) * fz;
  return p;
}

double ConstraintReport::min_margin() const {
  return std::min({normal_force.margin, friction.margin, cop_x.margin,
                   cop_y.margin, torsion.margin});
}

ConstraintReport check_constraints(const Wrench& w, const ContactGeometry& g) {
  ConstraintReport r;
  r.normal_force.margin = w(2) - g.fz_min;
  r.normal_force.satisfied = r.normal_force.margin > 0.0;

  if (w(2) <= 0.0) {
    // No normal force: the ratio constraints are meaningless; report them
    // as violated with a -inf margin rather than dividing by zero.
    r.friction.margin = g.mu_c * w(2) - std::hypot(w(0), w(1));
    r.friction.satisfied = false;
    r.cop_x = {false, -kInf};
    r.cop_y = {false, -kInf};
    r.torsion = {false, -kInf};
    return r;
  }

  r.friction.margin = g.mu_c * w(2) - std::hypot(w(0), w(1));
  r.friction.satisfied = r.friction.margin > 0.0;

  const double cop_x = -w(4) / w(2);
  r.cop_x.margin = std::min(cop_x - g.x_min, g.x_max - cop_x);
  r.cop_x.satisfied = cop_x > g.x_min && cop_x < g.x_max;

  const double cop_y = w(3) / w(2);
  r.cop_y.margin = std::min(cop_y - g.y_min, g.y_max - cop_y);
  r.cop_y.satisfied = cop_y > g.y_min && cop_y < g.y_max;

  r.torsion.margin = g.mu_z - std::abs(w(5)) / w(2);
  r.torsion.satisfied = r.torsion.margin > 0.0;
  return r;
}

Vec stack_phi(const Vec& xis, const std::vector<ContactGeometry>& geoms) {
  const auto n_c = static_cast<Eigen::Index>(geoms.size());
  if (xis.size() != 6 * n_c)
    throw std::invalid_argument("stack_phi: xi stack does not match contacts");
  Vec f(6 * n_c);
  for (Eigen::Index k = 0; k < n_c; ++k)
    f.segment<6>(6 * k) = phi(xis.segment<6>(6 * k), geoms[k]);
  return f;
}

Mat stack_gradient(const Vec& xis, const std::vector<ContactGeometry>& geoms) {
  const auto n_c = static_cast<Eigen::Index>(geoms.size());
  if (xis.size() != 6 * n_c)
    throw std::invalid_argument(
        "stack_gradient: xi stack does not match contacts");
  Mat p = Mat::Zero(6 * n_c, 6 * n_c);
  for (Eigen::Index k = 0; k < n_c; ++k)
    p.block<6, 6>(6 * k, 6 * k) = phi_gradient(xis.segment<6>(6 * k), geoms[k]);
  return p;
}

namespace {
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace

double cone_coverage_estimate(const ContactGeometry& g, std::size_t samples,
                              std::uint64_t seed, double fz) {
  if (fz <= g.fz_min) fz = g.fz_min + 1.0;
  const double radius = g.mu_c * fz;
  // Moments held at the image center so only the tangential channel decides
  // membership.
  const double mx0 = g.delta_y0 * fz;
  const double my0 = g.delta_x0 * fz;
  std::mt19937_64 rng(seed);
  SaturationPolicy sat;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double r = radius * std::sqrt(u01(rng));
    const double th = 2.0 * M_PI * u01(rng);
    Wrench w;
    w << r * std::cos(th), r * std::sin(th), fz, mx0, my0, 0.0;
    const InverseResult inv = phi_inverse(w, g, sat);
    if (inv.saturated) continue;
    const Wrench back = phi(inv.xi, g);
    if ((back - w).norm() <= 1e-6 * (1.0 + w.norm())) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(samples);
}

}  // namespace jerkctl

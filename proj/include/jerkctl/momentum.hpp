#pragma once

#include <vector>

#include "jerkctl/linalg.hpp"
#include "jerkctl/wrench_param.hpp"

namespace jerkctl {

// A rigid contact patch: where it is, how fast it moves, and what wrenches
// it can transmit.
struct ContactFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 origin_velocity = Vec3::Zero();
  ContactGeometry geometry;
};

// Centroidal state plus the controller's two internal accumulators.
struct MomentumState {
  Vec6 H = Vec6::Zero();      // [linear; angular] momentum about the CoM
  Vec3 com = Vec3::Zero();
  Vec6 I_err = Vec6::Zero();  // integral of the momentum error
  Vec6 zeta = Vec6::Zero();   // filtered jerk-level error, kept for logging
  double m = 1.0;
  double g = 9.81;
};

// Grasp-style map from stacked contact wrenches to the CoM wrench:
// each 6x6 block is [I 0; S(o_k - com) I].
Mat contact_map(const std::vector<ContactFrame>& frames, const Vec3& com);

// Time derivative of contact_map; only the lower-left block moves.
Mat contact_map_dot(const std::vector<ContactFrame>& frames,
                    const Vec3& com_velocity);

// Hdot = A f + [0 0 -mg 0 0 0]^T
Vec6 hdot(const Mat& A, const Vec& f, double m, double g);

// Hddot = A Phi xi_dot + Adot f, with Phi the stacked gradient at xi.
Vec6 hddot(const Vec& xi, const Vec& xi_dot, const Vec& f, const Mat& A,
           const Mat& A_dot, const std::vector<ContactGeometry>& geoms);

// One RK4 step of the rigid-body momentum plant. The contact wrench stack f
// is held constant across the step (the controller owns xi between substeps);
// the map A is re-evaluated at every stage because the CoM moves.
MomentumState plant_step(const MomentumState& state,
                         const std::vector<ContactFrame>& frames, const Vec& f,
                         double dt, const Vec6& disturbance = Vec6::Zero());

}  // namespace jerkctl

#pragma once

#include "oscbf/kinematics.hpp"

namespace oscbf {

inline const Vec3 kDefaultGravity{0.0, 0.0, -9.81};

/// Inverse dynamics by recursive Newton-Euler: returns M qdd + c + g.
Vec rnea(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& qdd, const Vec3& gravity);

/// Joint-space mass matrix via the composite-rigid-body algorithm.
Mat mass_matrix(const RobotModel& model, const Vec& q);

struct BiasForces {
    Vec coriolis;  // c(q, qd)
    Vec gravity;   // g(q)
};

BiasForces bias_forces(const RobotModel& model, const Vec& q, const Vec& qd, const Vec3& gravity);

/// Jdot * qd for the EE frame (world frame, [linear; angular]), from spatial
/// acceleration propagation with qdd = 0.
Vec6 ee_jdot_qdot(const RobotModel& model, const Vec& q, const Vec& qd);

/// Forward dynamics qdd = M^-1 (tau - c - g).
Vec forward_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& tau, const Vec3& gravity);

double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& qd);

struct OpSpaceQuantities {
    Vec3 position;
    Mat3 rotation;
    Mat J;          // k x n task Jacobian (rows picked by the model's task axes)
    Vec jdot_qdot;  // k
    Mat M, M_inv;
    Vec c, g;
    Mat Lambda;     // k x k
    Vec mu;         // k, op-space Coriolis/centrifugal
    Vec p;          // k, op-space gravity
    Mat J_bar;      // n x k dynamically consistent inverse
    Mat J_pinv;     // n x k Moore-Penrose inverse
    Mat N_dyn;      // I - J_bar J
    Mat N_dyn_T;    // I - J^T J_bar^T, torque null-space projector
    Mat N_kin;      // I - J_pinv J
    bool damped_inertia = false;
    bool damped_pinv = false;
};

struct OpSpaceOptions {
    double eig_threshold = 1e-8;
    double damping = 1e-6;
    Vec3 gravity = kDefaultGravity;
    // When false only the kinematic members (pose, J, J_pinv, N_kin) are filled.
    bool dynamics = true;
};

OpSpaceQuantities op_space_quantities(const RobotModel& model, const RobotState& state,
                                      const OpSpaceOptions& options = {});
/// Same quantities, reusing a kinematics cache already computed for state.q.
OpSpaceQuantities op_space_quantities(const RobotModel& model, const KinematicsCache& kin, const RobotState& state,
                                      const OpSpaceOptions& options = {});

}  // namespace oscbf

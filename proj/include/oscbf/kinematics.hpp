#pragma once

#include <vector>

#include "oscbf/robot_model.hpp"

namespace oscbf {

/// World-frame kinematic quantities for one configuration.
struct KinematicFrames {
    std::vector<Pose> joint_frames;  // joint frame before joint motion
    std::vector<Pose> link_frames;   // link frame after joint motion
    std::vector<Vec3> axes;          // joint axes in world
    std::vector<Vec3> sphere_centers;
    Pose ee;
};

KinematicFrames forward_kinematics(const RobotModel& model, const Vec& q);

/// 6 x n geometric Jacobian [linear; angular] of a point rigidly attached to
/// `link` (given in world coordinates).
Mat6X point_jacobian_world(const RobotModel& model, const KinematicFrames& fk, int link, const Vec3& point_world);

/// EE Jacobian, all six rows.
Mat6X jacobian(const RobotModel& model, const Vec& q);
Mat6X jacobian(const RobotModel& model, const KinematicFrames& fk);

/// 3 x n translational Jacobian of a point given in link coordinates.
Mat3X point_jacobian(const RobotModel& model, const Vec& q, int link, const Vec3& point_in_link);

/// dJ/dq_j for each j, where J is the 6 x n Jacobian of a point fixed on `link`.
std::vector<Mat6X> jacobian_partials(const RobotModel& model, const KinematicFrames& fk, int link,
                                     const Vec3& point_world);

/// Per-configuration cache used by the barrier library: frames plus the
/// EE and sphere Jacobians.
struct KinematicsCache {
    Vec q;
    KinematicFrames fk;
    Mat6X ee_jacobian;                 // 6 x n
    std::vector<Mat3X> sphere_jacobians;  // 3 x n each

    KinematicsCache() = default;
    KinematicsCache(const RobotModel& model, const Vec& q);
};

}  // namespace oscbf

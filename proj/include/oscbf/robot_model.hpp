#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscbf/types.hpp"

namespace oscbf {

enum class JointType { Revolute, Prismatic };

struct JointSpec {
    JointType type = JointType::Revolute;
    Vec3 axis = Vec3::UnitZ();
    // Pose of the joint frame in the parent link frame (q = 0).
    Pose origin = Pose::Identity();
};

struct LinkInertial {
    double mass = 0.0;
    Vec3 com = Vec3::Zero();
    // Rotational inertia about the center of mass, link frame.
    Mat3 inertia = Mat3::Zero();
};

struct CollisionSphere {
    int link = 0;
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

struct JointLimits {
    Vec q_min, q_max;
    Vec qd_min, qd_max;
    Vec tau_min, tau_max;
};

/// Immutable serial-chain description. Link i is moved by joint i; the chain
/// is rooted at a fixed base.
class RobotModel {
public:
    RobotModel(std::string name,
               std::vector<JointSpec> joints,
               std::vector<LinkInertial> links,
               std::vector<CollisionSphere> spheres,
               std::vector<std::pair<int, int>> self_collision_pairs,
               JointLimits limits,
               Pose ee_frame,
               std::vector<int> task_axes = {0, 1, 2, 3, 4, 5});

    const std::string& name() const { return m_name; }
    int dof() const { return static_cast<int>(m_joints.size()); }
    const std::vector<JointSpec>& joints() const { return m_joints; }
    const std::vector<LinkInertial>& links() const { return m_links; }
    const std::vector<CollisionSphere>& spheres() const { return m_spheres; }
    const std::vector<std::pair<int, int>>& self_collision_pairs() const { return m_pairs; }
    const JointLimits& limits() const { return m_limits; }
    const Pose& ee_frame() const { return m_ee; }
    // Rows of the 6-D twist [v; w] that make up the operational-space task.
    const std::vector<int>& task_axes() const { return m_task_axes; }
    int task_dim() const { return static_cast<int>(m_task_axes.size()); }

    // Selection of task rows out of a 6 x k matrix.
    Mat select_task_rows(const Mat& six_by_k) const;
    Vec select_task_rows(const Vec6& v) const;

    nlohmann::json to_json() const;

private:
    void validate() const;

    std::string m_name;
    std::vector<JointSpec> m_joints;
    std::vector<LinkInertial> m_links;
    std::vector<CollisionSphere> m_spheres;
    std::vector<std::pair<int, int>> m_pairs;
    JointLimits m_limits;
    Pose m_ee;
    std::vector<int> m_task_axes;
};

RobotModel robot_model_from_json(const nlohmann::json& doc);
RobotModel load_robot_model(const std::filesystem::path& path);

// Fixed-axis roll/pitch/yaw: R = Rz(yaw) Ry(pitch) Rx(roll).
Mat3 rpy_to_rotation(const Vec3& rpy);
Vec3 rotation_to_rpy(const Mat3& R);

struct RobotState {
    Vec q;
    Vec qd;

    static RobotState zeros(int n) { return {Vec::Zero(n), Vec::Zero(n)}; }
    bool finite() const { return q.allFinite() && qd.allFinite(); }
};

void check_state(const RobotModel& model, const RobotState& state);

}  // namespace oscbf

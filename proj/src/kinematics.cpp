#include "oscbf/kinematics.hpp"

namespace oscbf {

namespace {

Pose joint_motion(const JointSpec& joint, double qi)
{
    Pose T = Pose::Identity();
    if (joint.type == JointType::Revolute) {
        T.linear() = Eigen::AngleAxisd(qi, joint.axis).toRotationMatrix();
    } else {
        T.translation() = joint.axis * qi;
    }
    return T;
}

}  // namespace

KinematicFrames forward_kinematics(const RobotModel& model, const Vec& q)
{
    const int n = model.dof();
    require_dim(q.size(), n, "q");

    KinematicFrames fk;
    fk.joint_frames.resize(n);
    fk.link_frames.resize(n);
    fk.axes.resize(n);
    Pose parent = Pose::Identity();
    for (int i = 0; i < n; ++i) {
        const JointSpec& joint = model.joints()[i];
        fk.joint_frames[i] = parent * joint.origin;
        fk.axes[i] = fk.joint_frames[i].linear() * joint.axis;
        fk.link_frames[i] = fk.joint_frames[i] * joint_motion(joint, q[i]);
        parent = fk.link_frames[i];
    }
    fk.ee = fk.link_frames[n - 1] * model.ee_frame();
    fk.sphere_centers.reserve(model.spheres().size());
    for (const auto& s : model.spheres()) fk.sphere_centers.push_back(fk.link_frames[s.link] * s.center);
    return fk;
}

Mat6X point_jacobian_world(const RobotModel& model, const KinematicFrames& fk, int link, const Vec3& point_world)
{
    const int n = model.dof();
    if (link < -1 || link >= n) throw std::out_of_range("point_jacobian: invalid link index");
    Mat6X J = Mat6X::Zero(6, n);
    for (int j = 0; j <= link; ++j) {
        const Vec3& z = fk.axes[j];
        if (model.joints()[j].type == JointType::Revolute) {
            J.block<3, 1>(0, j) = z.cross(point_world - fk.joint_frames[j].translation());
            J.block<3, 1>(3, j) = z;
        } else {
            J.block<3, 1>(0, j) = z;
        }
    }
    return J;
}

Mat6X jacobian(const RobotModel& model, const KinematicFrames& fk)
{
    return point_jacobian_world(model, fk, model.dof() - 1, fk.ee.translation());
}

Mat6X jacobian(const RobotModel& model, const Vec& q)
{
    return jacobian(model, forward_kinematics(model, q));
}

Mat3X point_jacobian(const RobotModel& model, const Vec& q, int link, const Vec3& point_in_link)
{
    if (link < -1 || link >= model.dof()) throw std::out_of_range("point_jacobian: invalid link index");
    const KinematicFrames fk = forward_kinematics(model, q);
    if (link < 0) return Mat3X::Zero(3, model.dof());
    const Vec3 p = fk.link_frames[link] * point_in_link;
    return point_jacobian_world(model, fk, link, p).topRows<3>();
}

std::vector<Mat6X> jacobian_partials(const RobotModel& model, const KinematicFrames& fk, int link,
                                     const Vec3& p)
{
    const int n = model.dof();
    std::vector<Mat6X> dJ(n, Mat6X::Zero(6, n));
    const auto revolute = [&](int j) { return model.joints()[j].type == JointType::Revolute; };
    const auto origin = [&](int j) -> Vec3 { return fk.joint_frames[j].translation(); };

    for (int j = 0; j <= link; ++j) {
        const Vec3& zj = fk.axes[j];
        // motion of the point p under q_j
        const Vec3 dp = revolute(j) ? Vec3(zj.cross(p - origin(j))) : zj;
        for (int i = 0; i <= link; ++i) {
            const Vec3& zi = fk.axes[i];
            Vec3 dzi = Vec3::Zero();
            Vec3 d_arm;  // d(p - o_i)/dq_j
            if (j < i) {
                if (revolute(j)) {
                    dzi = zj.cross(zi);
                    d_arm = zj.cross(p - origin(i));
                } else {
                    d_arm = Vec3::Zero();
                }
            } else {
                d_arm = dp;
            }
            if (revolute(i)) {
                dJ[j].block<3, 1>(0, i) = dzi.cross(p - origin(i)) + zi.cross(d_arm);
                dJ[j].block<3, 1>(3, i) = dzi;
            } else {
                dJ[j].block<3, 1>(0, i) = dzi;
            }
        }
    }
    return dJ;
}

KinematicsCache::KinematicsCache(const RobotModel& model, const Vec& q_in)
    : q(q_in), fk(forward_kinematics(model, q_in))
{
    ee_jacobian = jacobian(model, fk);
    sphere_jacobians.reserve(model.spheres().size());
    for (std::size_t s = 0; s < model.spheres().size(); ++s) {
        sphere_jacobians.push_back(
            point_jacobian_world(model, fk, model.spheres()[s].link, fk.sphere_centers[s]).topRows<3>());
    }
}

}  // namespace oscbf

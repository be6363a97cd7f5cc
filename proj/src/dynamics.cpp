#include "oscbf/dynamics.hpp"

#include <vector>

namespace oscbf {

namespace {

// Plucker transform from a parent frame into a child frame whose pose in the
// parent is (R, r). Motion vectors are ordered [angular; linear].
struct Plucker {
    Mat3 E;  // R^T
    Vec3 r;

    Vec6 apply(const Vec6& m) const
    {
        Vec6 out;
        out.head<3>() = E * m.head<3>();
        out.tail<3>() = E * (m.tail<3>() - r.cross(m.head<3>()));
        return out;
    }

    // X^T f: child force expressed in the parent frame.
    Vec6 apply_transpose(const Vec6& f) const
    {
        Vec6 out;
        const Vec3 ft = E.transpose() * f.tail<3>();
        out.head<3>() = E.transpose() * f.head<3>() + r.cross(ft);
        out.tail<3>() = ft;
        return out;
    }

    Mat6 matrix() const
    {
        Mat6 X = Mat6::Zero();
        X.topLeftCorner<3, 3>() = E;
        X.bottomRightCorner<3, 3>() = E;
        X.bottomLeftCorner<3, 3>() = -E * skew(r);
        return X;
    }
};

Vec6 cross_motion(const Vec6& v, const Vec6& m)
{
    Vec6 out;
    out.head<3>() = v.head<3>().cross(m.head<3>());
    out.tail<3>() = v.head<3>().cross(m.tail<3>()) + v.tail<3>().cross(m.head<3>());
    return out;
}

Vec6 cross_force(const Vec6& v, const Vec6& f)
{
    Vec6 out;
    out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
    out.tail<3>() = v.head<3>().cross(f.tail<3>());
    return out;
}

Mat6 spatial_inertia(const LinkInertial& link)
{
    const Mat3 C = skew(link.com);
    Mat6 I;
    I.topLeftCorner<3, 3>() = link.inertia + link.mass * C * C.transpose();
    I.topRightCorner<3, 3>() = link.mass * C;
    I.bottomLeftCorner<3, 3>() = link.mass * C.transpose();
    I.bottomRightCorner<3, 3>() = link.mass * Mat3::Identity();
    return I;
}

Vec6 motion_subspace(const JointSpec& joint)
{
    Vec6 S = Vec6::Zero();
    if (joint.type == JointType::Revolute) {
        S.head<3>() = joint.axis;
    } else {
        S.tail<3>() = joint.axis;
    }
    return S;
}

// Transforms parent-link -> link for every joint at configuration q.
std::vector<Plucker> link_transforms(const RobotModel& model, const Vec& q)
{
    const int n = model.dof();
    std::vector<Plucker> X(n);
    for (int i = 0; i < n; ++i) {
        const JointSpec& joint = model.joints()[i];
        Pose motion = Pose::Identity();
        if (joint.type == JointType::Revolute) {
            motion.linear() = Eigen::AngleAxisd(q[i], joint.axis).toRotationMatrix();
        } else {
            motion.translation() = joint.axis * q[i];
        }
        const Pose T = joint.origin * motion;
        X[i].E = T.linear().transpose();
        X[i].r = T.translation();
    }
    return X;
}

}  // namespace

Vec rnea(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& qdd, const Vec3& gravity)
{
    const int n = model.dof();
    require_dim(q.size(), n, "q");
    require_dim(qd.size(), n, "qd");
    require_dim(qdd.size(), n, "qdd");

    const auto X = link_transforms(model, q);
    std::vector<Vec6> v(n), a(n), f(n);
    Vec6 v_parent = Vec6::Zero();
    Vec6 a_parent = Vec6::Zero();
    a_parent.tail<3>() = -gravity;
    for (int i = 0; i < n; ++i) {
        const Vec6 S = motion_subspace(model.joints()[i]);
        const Vec6 vj = S * qd[i];
        v[i] = X[i].apply(v_parent) + vj;
        a[i] = X[i].apply(a_parent) + S * qdd[i] + cross_motion(v[i], vj);
        const Mat6 I = spatial_inertia(model.links()[i]);
        f[i] = I * a[i] + cross_force(v[i], I * v[i]);
        v_parent = v[i];
        a_parent = a[i];
    }
    Vec tau(n);
    for (int i = n - 1; i >= 0; --i) {
        tau[i] = motion_subspace(model.joints()[i]).dot(f[i]);
        if (i > 0) f[i - 1] += X[i].apply_transpose(f[i]);
    }
    return tau;
}

Mat mass_matrix(const RobotModel& model, const Vec& q)
{
    const int n = model.dof();
    require_dim(q.size(), n, "q");
    const auto X = link_transforms(model, q);

    std::vector<Mat6> Ic(n);
    std::vector<Mat6> Xm(n);
    for (int i = 0; i < n; ++i) {
        Ic[i] = spatial_inertia(model.links()[i]);
        Xm[i] = X[i].matrix();
    }
    for (int i = n - 1; i > 0; --i) Ic[i - 1] += Xm[i].transpose() * Ic[i] * Xm[i];

    Mat M = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        Vec6 F = Ic[i] * motion_subspace(model.joints()[i]);
        M(i, i) = motion_subspace(model.joints()[i]).dot(F);
        for (int j = i; j > 0; --j) {
            F = Xm[j].transpose() * F;
            M(i, j - 1) = motion_subspace(model.joints()[j - 1]).dot(F);
            M(j - 1, i) = M(i, j - 1);
        }
    }
    return M;
}

BiasForces bias_forces(const RobotModel& model, const Vec& q, const Vec& qd, const Vec3& gravity)
{
    const Vec zero = Vec::Zero(model.dof());
    const Vec cg = rnea(model, q, qd, zero, gravity);
    BiasForces out;
    out.gravity = rnea(model, q, zero, zero, gravity);
    out.coriolis = cg - out.gravity;
    return out;
}

Vec6 ee_jdot_qdot(const RobotModel& model, const Vec& q, const Vec& qd)
{
    const int n = model.dof();
    require_dim(q.size(), n, "q");
    require_dim(qd.size(), n, "qd");
    const auto X = link_transforms(model, q);
    Vec6 v = Vec6::Zero();
    Vec6 a = Vec6::Zero();
    for (int i = 0; i < n; ++i) {
        const Vec6 vj = motion_subspace(model.joints()[i]) * qd[i];
        v = X[i].apply(v) + vj;
        a = X[i].apply(a) + cross_motion(v, vj);
    }
    // Classical acceleration of the EE point, link coordinates.
    const Vec3 p = model.ee_frame().translation();
    const Vec3 w = v.head<3>();
    const Vec3 v_origin = v.tail<3>();
    const Vec3 acc = a.tail<3>() + a.head<3>().cross(p) + w.cross(v_origin + w.cross(p));

    const Mat3 R = forward_kinematics(model, q).link_frames[n - 1].linear();
    Vec6 out;
    out.head<3>() = R * acc;
    out.tail<3>() = R * a.head<3>();
    return out;
}

Vec forward_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& tau, const Vec3& gravity)
{
    require_dim(tau.size(), model.dof(), "tau");
    const Mat M = mass_matrix(model, q);
    const Vec bias = rnea(model, q, qd, Vec::Zero(model.dof()), gravity);
    return M.llt().solve(tau - bias);
}

double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& qd)
{
    return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

namespace {

// (A + damping I)^-1 when A is near-singular, A^-1 otherwise.
Mat guarded_spd_inverse(const Mat& A, const OpSpaceOptions& opt, bool& damped)
{
    const Mat sym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    damped = es.eigenvalues().minCoeff() < opt.eig_threshold;
    Mat reg = sym;
    if (damped) reg.diagonal().array() += opt.damping;
    Eigen::LLT<Mat> llt(reg);
    if (llt.info() != Eigen::Success) {
        throw SingularOpSpaceInertia("operational-space inertia could not be inverted even with damping");
    }
    Mat inv = llt.solve(Mat::Identity(A.rows(), A.cols()));
    if (!inv.allFinite()) throw SingularOpSpaceInertia("operational-space inertia inverse is not finite");
    return inv;
}

}  // namespace

OpSpaceQuantities op_space_quantities(const RobotModel& model, const RobotState& state, const OpSpaceOptions& options)
{
    check_state(model, state);
    return op_space_quantities(model, KinematicsCache(model, state.q), state, options);
}

OpSpaceQuantities op_space_quantities(const RobotModel& model, const KinematicsCache& kin, const RobotState& state,
                                      const OpSpaceOptions& options)
{
    check_state(model, state);
    const int n = model.dof();
    OpSpaceQuantities out;
    out.position = kin.fk.ee.translation();
    out.rotation = kin.fk.ee.linear();
    out.J = model.select_task_rows(Mat(kin.ee_jacobian));
    const Mat I = Mat::Identity(n, n);
    const Mat& J = out.J;
    const Mat JJt_inv = guarded_spd_inverse(J * J.transpose(), options, out.damped_pinv);
    out.J_pinv = J.transpose() * JJt_inv;
    out.N_kin = I - out.J_pinv * J;
    if (!options.dynamics) return out;

    out.jdot_qdot = model.select_task_rows(ee_jdot_qdot(model, state.q, state.qd));

    out.M = mass_matrix(model, state.q);
    Eigen::LLT<Mat> llt(out.M);
    if (llt.info() != Eigen::Success) throw ModelError("mass matrix is not positive-definite");
    out.M_inv = llt.solve(Mat::Identity(n, n));
    const BiasForces bias = bias_forces(model, state.q, state.qd, options.gravity);
    out.c = bias.coriolis;
    out.g = bias.gravity;

    const Mat Lambda_inv = J * out.M_inv * J.transpose();
    out.Lambda = guarded_spd_inverse(Lambda_inv, options, out.damped_inertia);
    out.J_bar = out.M_inv * J.transpose() * out.Lambda;
    out.mu = out.J_bar.transpose() * out.c - out.Lambda * out.jdot_qdot;
    out.p = out.J_bar.transpose() * out.g;

    out.N_dyn = I - out.J_bar * J;
    out.N_dyn_T = I - J.transpose() * out.J_bar.transpose();
    return out;
}

}  // namespace oscbf

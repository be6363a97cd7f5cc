#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"

using namespace oscbf;

namespace {

Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

RobotState panda_state(std::mt19937_64& rng, double speed = 0.0)
{
    const RobotModel m = test::panda();
    return {test::random_q(m, rng, 0.4), test::random_vec(m.dof(), rng, speed)};
}

}  // namespace

TEST_SUITE("controller")
{
    TEST_CASE("orientation error")
    {
        const Mat3 R = rpy_to_rotation(Vec3(0.2, -0.4, 1.0));
        CHECK(orientation_error(R, R).norm() < 1e-15);
        for (double th : {0.1, 0.7, 1.5, -2.0}) {
            // Columns r_i x r_i,des summed by hand: only the z entry survives, 2 sin(th).
            CHECK((orientation_error(Mat3::Identity(), rot_z(th)) - Vec3(0, 0, -std::sin(th))).norm() < 1e-14);
        }
        const Mat3 R2 = rpy_to_rotation(Vec3(-0.5, 0.3, 0.1));
        CHECK((orientation_error(R, R2) + orientation_error(R2, R)).norm() < 1e-14);
    }

    TEST_CASE("zero error and zero feedforward give zero commands")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(1);
        const RobotState s = panda_state(rng);
        const TaskTarget hold = TaskTarget::hold(m, s.q);
        const Gains g = Gains::defaults(m.dof(), ControlMode::Velocity);
        CHECK(kinematic_nominal(m, s, hold, g).qd_nom.norm() < 1e-12);
    }

    TEST_CASE("posture velocity is invisible at the end effector")
    {
        const RobotModel m = test::planar3r();
        RobotState s = RobotState::zeros(3);
        s.q << 0.3, -0.6, 0.8;
        TaskTarget t = TaskTarget::hold(m, s.q);
        t.q_des << -0.5, 0.4, 0.2;
        const Gains g = Gains::defaults(m.dof(), ControlMode::Velocity);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const KinematicNominal k = kinematic_nominal(m, s, op, t, g);
        CHECK(k.qd_null.norm() > 1e-3);
        CHECK((op.J * k.qd_null).norm() < 1e-9);
    }

    TEST_CASE("non-redundant arm ignores the posture task")
    {
        const RobotModel m = test::planar2r();
        RobotState s = RobotState::zeros(2);
        s.q << 0.3, 1.0;
        TaskTarget t = TaskTarget::hold(m, s.q);
        t.q_des << 1.0, -1.0;
        const Gains g = Gains::defaults(2, ControlMode::Velocity);
        CHECK(kinematic_nominal(m, s, t, g).qd_nom.norm() < 1e-9);
    }

    TEST_CASE("rest at target: nominal torque is the gravity vector")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(2);
        const RobotState s = panda_state(rng);
        const Gains g = Gains::defaults(m.dof(), ControlMode::Torque);
        const DynamicNominal d = dynamic_nominal(m, s, TaskTarget::hold(m, s.q), g);
        const Vec grav = bias_forces(m, s.q, s.qd, kDefaultGravity).gravity;
        CHECK((d.tau_nom - grav).norm() < 1e-9);
    }

    TEST_CASE("pure position error without gravity")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(3);
        const RobotState s = panda_state(rng);
        TaskTarget t = TaskTarget::hold(m, s.q);
        t.position.x() -= 0.05;
        const Gains g = Gains::defaults(m.dof(), ControlMode::Torque);
        OpSpaceOptions opt;
        opt.gravity = Vec3::Zero();
        const OpSpaceQuantities op = op_space_quantities(m, s, opt);
        const DynamicNominal d = dynamic_nominal(m, s, op, t, g);
        // Independent evaluation of J^T Lambda (-K_po e).
        const Mat J = jacobian(m, s.q);
        const Mat Lambda = (J * mass_matrix(m, s.q).inverse() * J.transpose()).inverse();
        Vec6 e = Vec6::Zero();
        e[0] = 0.05;
        const Vec expected = J.transpose() * Lambda * (-g.K_po.cwiseProduct(e));
        CHECK((d.tau_nom - expected).norm() < 1e-6 * expected.norm());
    }

    TEST_CASE("null-space torque produces no task acceleration")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(4);
        const RobotState s = panda_state(rng, 0.5);
        TaskTarget t = TaskTarget::hold(m, s.q);
        t.q_des = test::random_q(m, rng);
        const Gains g = Gains::defaults(m.dof(), ControlMode::Torque);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const DynamicNominal d = dynamic_nominal(m, s, op, t, g);
        CHECK(d.tau_null.norm() > 1e-3);
        CHECK((op.J * op.M_inv * d.tau_null).norm() < 1e-8);
    }

    TEST_CASE("nominal torque realises the commanded task acceleration")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(5);
        const RobotState s = panda_state(rng, 0.8);
        TaskTarget t = TaskTarget::hold(m, test::random_q(m, rng, 0.4));
        const Gains g = Gains::defaults(m.dof(), ControlMode::Torque);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const DynamicNominal d = dynamic_nominal(m, s, op, t, g);
        const Vec qdd = forward_dynamics(m, s.q, s.qd, d.tau_nom, kDefaultGravity);
        CHECK((op.J * qdd + op.jdot_qdot - d.nu_dot_cmd).norm() < 1e-6 * std::max(1.0, d.nu_dot_cmd.norm()));
    }

    TEST_CASE("square Jacobian with unit weights gives P = J^T J")
    {
        const RobotModel m = test::planar2r();
        RobotState s = RobotState::zeros(2);
        s.q << 0.3, 1.2;
        Gains g = Gains::defaults(2, ControlMode::Velocity);
        g.W_o.setOnes();
        g.W_j.setOnes();
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const QpProblem p = assemble_kinematic_qp(m, op, Vec::Zero(2), {}, g);
        CHECK((p.P - op.J.transpose() * op.J).norm() < 1e-9);
    }

    TEST_CASE("no active constraints: the QP returns the nominal")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(6);
        const RobotState s = panda_state(rng, 0.3);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const Gains gv = Gains::defaults(m.dof(), ControlMode::Velocity);
        const Vec qd_nom = test::random_vec(m.dof(), rng, 0.5);
        const QpProblem pv = assemble_kinematic_qp(m, op, qd_nom, {}, gv);
        CHECK((pv.P - Mat::Identity(m.dof(), m.dof())).norm() > 1e-2);
        CHECK((solve(pv).x - qd_nom).norm() < 1e-8);

        const Gains gt = Gains::defaults(m.dof(), ControlMode::Torque);
        const Vec tau_nom = op.g + test::random_vec(m.dof(), rng, 2.0);
        const QpProblem pt = assemble_dynamic_qp(m, op, tau_nom, {}, gt);
        CHECK((solve(pt).x - tau_nom).norm() < 1e-6);
    }

    TEST_CASE("objective expands to the weighted deviations")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(7);
        const RobotState s = panda_state(rng);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        Gains g = Gains::defaults(m.dof(), ControlMode::Velocity);
        g.W_o = test::random_vec(6, rng).cwiseAbs().array() + 0.5;
        g.W_j = test::random_vec(m.dof(), rng).cwiseAbs().array() + 0.5;
        const Vec u_nom = test::random_vec(m.dof(), rng);
        const QpProblem p = assemble_kinematic_qp(m, op, u_nom, {}, g);
        const double c = -0.5 * u_nom.dot(p.P * u_nom);
        for (int trial = 0; trial < 10; ++trial) {
            const Vec x = test::random_vec(m.dof(), rng, 2.0);
            const double value = 0.5 * x.dot(p.P * x) + p.q.dot(x);
            const double expanded = 0.5 * ((g.W_j.asDiagonal() * op.N_kin * (x - u_nom)).squaredNorm() +
                                           (g.W_o.asDiagonal() * op.J * (x - u_nom)).squaredNorm());
            CHECK(std::abs(value - (expanded + c)) < 1e-10);
        }
    }

    TEST_CASE("wrench rows are centred on gravity compensation")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(8);
        const RobotState s = panda_state(rng, 0.3);
        const OpSpaceQuantities op = op_space_quantities(m, s);
        const Gains g = Gains::defaults(m.dof(), ControlMode::Torque);
        WrenchLimits w{Vec::Constant(6, -5.0), Vec::Constant(6, 5.0)};
        const QpProblem p = assemble_dynamic_qp(m, op, op.g, {}, g, ObjectiveKind::Oscbf, w);
        const Vec cg = op.c + op.g;
        for (const auto& r : p.rows) {
            if (r.source == kTagWrenchLimit) CHECK(r.a.dot(cg) - r.b >= 5.0 - 1e-8);
        }
    }

    TEST_CASE("far from every boundary the filter is inactive")
    {
        const RobotModel m = test::panda();
        Vec q(7);
        q << 0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.8;
        const RobotState s{q, Vec::Zero(7)};
        std::vector<BarrierSpec> specs(1);
        specs[0].kind = BarrierKind::JointPositionLimit;
        for (ControlMode mode : {ControlMode::Velocity, ControlMode::Torque}) {
            ControllerConfig cfg;
            cfg.mode = mode;
            cfg.gains = Gains::defaults(7, mode);
            Controller ctl(m, specs, {}, cfg);
            TaskTarget t = TaskTarget::hold(m, q);
            t.position += Vec3(0.02, -0.01, 0.01);
            const SafeCommand c = ctl.step(s, t, {});
            CHECK(c.status == QpStatus::Optimal);
            CHECK((c.value - c.nominal).norm() < 1e-6);
            CHECK(c.max_slack < 1e-9);
            CHECK(c.active_rows.empty());
            CHECK_FALSE(c.emergency_clamp);
        }
    }

    TEST_CASE("the filter keeps a command at a joint limit from pushing through")
    {
        const RobotModel m = test::panda();
        Vec q(7);
        q << 0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.8;
        q[0] = m.limits().q_max[0] - 1e-4;
        const RobotState s{q, Vec::Zero(7)};
        std::vector<BarrierSpec> specs(1);
        specs[0].kind = BarrierKind::JointPositionLimit;
        ControllerConfig cfg;
        cfg.gains = Gains::defaults(7, ControlMode::Velocity);
        Controller ctl(m, specs, {}, cfg);
        TaskTarget t = TaskTarget::hold(m, q);
        t.q_des = q;
        t.q_des[0] = m.limits().q_max[0] + 1.0;
        const SafeCommand c = ctl.step(s, t, {});
        CHECK(c.nominal[0] > 0.0);
        CHECK(c.value[0] <= 10.0 * 1e-4 + 1e-8);
        CHECK_FALSE(c.active_rows.empty());
    }

    TEST_CASE("clamp to limits")
    {
        const RobotModel m = test::planar2r();
        Vec u(2);
        u << 100.0, -0.5;
        const Vec v = clamp_to_limits(m, ControlMode::Velocity, u);
        CHECK(v[0] == m.limits().qd_max[0]);
        CHECK(v[1] == -0.5);
        CHECK(clamp_to_limits(m, ControlMode::Torque, u)[0] == m.limits().tau_max[0]);
    }

    TEST_CASE("mode and objective names")
    {
        CHECK(control_mode_from_string("torque") == ControlMode::Torque);
        CHECK(objective_kind_from_string(to_string(ObjectiveKind::JointMetric)) == ObjectiveKind::JointMetric);
        CHECK_THROWS(control_mode_from_string("position"));
    }
}

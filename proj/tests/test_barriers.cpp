#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"

using namespace oscbf;

namespace {

// One revolute link with a single collision sphere at the base origin.
RobotModel sphere_at_origin()
{
    auto doc = test::chain_doc({{{"type", "revolute"}, {"axis", {0, 0, 1}}}});
    doc["collision_spheres"] = {{{"link", 0}, {"center", {0, 0, 0}}, {"radius", 0.1}}};
    return robot_model_from_json(doc);
}

SceneSnapshot one_obstacle(const Vec3& c, double r, const Vec3& v = Vec3::Zero(), bool dynamic = false)
{
    SceneSnapshot s;
    s.obstacles.push_back({c, v, r, dynamic});
    return s;
}

BarrierSpec spec_of(BarrierKind kind)
{
    BarrierSpec s;
    s.kind = kind;
    return s;
}

// Panda scene exercising every barrier kind.
std::vector<BarrierSpec> all_kind_specs(const RobotModel& m)
{
    std::vector<BarrierSpec> specs;
    specs.push_back(spec_of(BarrierKind::JointPositionLimit));
    specs.push_back(spec_of(BarrierKind::JointVelocityLimit));
    BarrierSpec box = spec_of(BarrierKind::OpPositionBox);
    box.box_min = Vec3(-0.2, -0.6, 0.05);
    box.box_max = Vec3(0.9, 0.6, 1.0);
    specs.push_back(box);
    BarrierSpec twist = spec_of(BarrierKind::OpVelocityLimit);
    twist.lower = Vec::Constant(m.task_dim(), -1.0);
    twist.upper = Vec::Constant(m.task_dim(), 1.0);
    specs.push_back(twist);
    specs.push_back(spec_of(BarrierKind::Singularity));
    specs.push_back(spec_of(BarrierKind::CollisionPair));
    BarrierSpec body = spec_of(BarrierKind::WholeBodyBox);
    body.box_min = Vec3(-1.0, -1.0, -0.3);
    body.box_max = Vec3(1.0, 1.0, 1.3);
    specs.push_back(body);
    specs.push_back(spec_of(BarrierKind::SelfCollisionPair));
    specs.push_back(spec_of(BarrierKind::DynamicObstacle));
    return specs;
}

SceneSnapshot panda_scene()
{
    SceneSnapshot s;
    s.obstacles.push_back({Vec3(0.5, 0.3, 0.4), Vec3::Zero(), 0.08, false});
    s.obstacles.push_back({Vec3(0.4, -0.3, 0.6), Vec3(0.1, 0.2, -0.1), 0.06, true});
    return s;
}

}  // namespace

TEST_SUITE("barriers")
{
    TEST_CASE("collision pair distance")
    {
        const RobotModel m = sphere_at_origin();
        const auto rows = eval_barrier(spec_of(BarrierKind::CollisionPair), m, RobotState::zeros(1),
                                       one_obstacle(Vec3(1, 0, 0), 0.2));
        REQUIRE(rows.size() == 1);
        CHECK(std::abs(rows[0].h - 0.7) < 1e-12);
    }

    TEST_CASE("coincident sphere centers are reported")
    {
        const RobotModel m = sphere_at_origin();
        CHECK_THROWS_AS(eval_barrier(spec_of(BarrierKind::CollisionPair), m, RobotState::zeros(1),
                                     one_obstacle(Vec3::Zero(), 0.2)),
                        DegenerateGeometry);
    }

    TEST_CASE("joint limit rows")
    {
        const RobotModel m = test::panda();
        RobotState s = RobotState::zeros(m.dof());
        s.q = m.limits().q_min;
        const auto rows = eval_barrier(spec_of(BarrierKind::JointPositionLimit), m, s, {}, PlantModel::Kinematic);
        REQUIRE(static_cast<int>(rows.size()) == 2 * m.dof());
        for (int i = 0; i < m.dof(); ++i) {
            CHECK(rows[i].h == 0.0);
            CHECK((rows[i].dh_dq - Vec::Unit(m.dof(), i)).norm() == 0.0);
            CHECK((rows[m.dof() + i].dh_dq + Vec::Unit(m.dof(), i)).norm() == 0.0);
        }
    }

    TEST_CASE("manipulability of the 2R arm")
    {
        const RobotModel m = test::planar2r();
        Vec q(2);
        q << 0.4, std::numbers::pi / 2;
        CHECK(std::abs(manipulability(m, q) - 1.0) < 1e-12);
        q[1] = 0.0;
        CHECK(manipulability(m, q) < 1e-12);
        // Square Jacobian: mu = |det J| = l1 l2 |sin q2|, independent of q1.
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 10; ++trial) {
            const Vec r = test::random_q(m, rng);
            CHECK(std::abs(manipulability(m, r) - std::abs(std::sin(r[1]))) < 1e-12);
        }
        BarrierSpec sing = spec_of(BarrierKind::Singularity);
        sing.epsilon = 1e-9;
        RobotState s = RobotState::zeros(2);
        s.q << 0.4, std::numbers::pi / 2;
        CHECK(std::abs(eval_barrier(sing, m, s, {})[0].h - 1.0) < 1e-8);
    }

    TEST_CASE("manipulability equals the product of singular values")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 10; ++trial) {
            const Vec q = test::random_q(m, rng);
            const Mat J = jacobian(m, q);
            const Vec sv = Eigen::JacobiSVD<Mat>(J).singularValues();
            CHECK(std::abs(manipulability(m, q) - sv.prod()) < 1e-9);
            // Rotating the task frame leaves mu unchanged.
            Mat6 R = Mat6::Zero();
            const Mat3 rot = rpy_to_rotation(Vec3(0.3, 0.5, -1.2));
            R.topLeftCorner<3, 3>() = rot;
            R.bottomRightCorner<3, 3>() = rot;
            CHECK(std::abs(manipulability(Mat(R * J)) - sv.prod()) < 1e-9);
        }
    }

    TEST_CASE("dynamic obstacle reduces to collision when nothing moves")
    {
        const RobotModel m = test::panda();
        SceneSnapshot scene = one_obstacle(Vec3(0.5, 0.2, 0.4), 0.1, Vec3::Zero(), true);
        std::mt19937_64 rng(3);
        RobotState s{test::random_q(m, rng), Vec::Zero(m.dof())};
        BarrierSpec coll = spec_of(BarrierKind::CollisionPair);
        const auto a = eval_barrier(coll, m, s, scene);
        const auto b = eval_barrier(spec_of(BarrierKind::DynamicObstacle), m, s, scene);
        REQUIRE(a.size() == b.size());
        for (std::size_t r = 0; r < a.size(); ++r) CHECK(a[r].h == b[r].h);

        // With gamma = 0 the two agree even in motion.
        s.qd = test::random_vec(m.dof(), rng);
        scene.obstacles[0].velocity = Vec3(0.3, -0.1, 0.2);
        BarrierSpec dyn = spec_of(BarrierKind::DynamicObstacle);
        dyn.gamma = 0.0;
        const auto c = eval_barrier(coll, m, s, scene);
        const auto d = eval_barrier(dyn, m, s, scene);
        for (std::size_t r = 0; r < c.size(); ++r) CHECK(c[r].h == d[r].h);
    }

    TEST_CASE("every barrier kind: gradients match central differences")
    {
        const RobotModel m = test::panda();
        const SceneSnapshot scene = panda_scene();
        std::mt19937_64 rng(4);
        for (const BarrierSpec& spec : all_kind_specs(m)) {
            CAPTURE(to_string(spec.kind));
            for (int trial = 0; trial < 20; ++trial) {
                RobotState s{test::random_q(m, rng, 0.2), test::random_vec(m.dof(), rng, 0.8)};
                const auto rows = eval_barrier(spec, m, s, scene);
                const auto h_of = [&](const RobotState& x) {
                    Vec h(static_cast<Eigen::Index>(rows.size()));
                    const auto e = eval_barrier(spec, m, x, scene);
                    for (std::size_t r = 0; r < e.size(); ++r) h[static_cast<Eigen::Index>(r)] = e[r].h;
                    return h;
                };
                const Mat dq = test::central_difference([&](const Vec& q) { return h_of({q, s.qd}); }, s.q);
                const Mat dqd = test::central_difference([&](const Vec& qd) { return h_of({s.q, qd}); }, s.qd);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const auto ri = static_cast<Eigen::Index>(r);
                    const double scale = std::max(1.0, dq.row(ri).norm());
                    CHECK((dq.row(ri).transpose() - rows[r].dh_dq).norm() < 1e-5 * scale);
                    CHECK((dqd.row(ri).transpose() - rows[r].dh_dqd).norm() < 1e-5 * std::max(1.0, dqd.row(ri).norm()));
                }
            }
        }
    }

    TEST_CASE("dh/dt of a moving obstacle matches a time difference")
    {
        const RobotModel m = test::panda();
        const SceneSnapshot scene = panda_scene();
        std::mt19937_64 rng(5);
        const RobotState s{test::random_q(m, rng), Vec::Zero(m.dof())};
        for (BarrierKind kind : {BarrierKind::CollisionPair, BarrierKind::DynamicObstacle}) {
            const auto now = eval_barrier(spec_of(kind), m, s, scene);
            const auto fwd = eval_barrier(spec_of(kind), m, s, scene.advanced(1e-6));
            const auto bwd = eval_barrier(spec_of(kind), m, s, scene.advanced(-1e-6));
            for (std::size_t r = 0; r < now.size(); ++r) {
                CHECK(std::abs((fwd[r].h - bwd[r].h) / 2e-6 - now[r].dh_dt) < 1e-5);
            }
        }
    }

    TEST_CASE("relative degree per plant")
    {
        for (BarrierKind k : kAllBarrierKinds) {
            CAPTURE(to_string(k));
            if (k == BarrierKind::DynamicObstacle) {
                // The robot velocity inside h is the measured one under velocity control.
                CHECK(row_role(k, PlantModel::Kinematic) == RowRole::Rd1);
                CHECK(row_role(k, PlantModel::Torque) == RowRole::Rd1);
            } else if (is_velocity_barrier(k)) {
                CHECK(row_role(k, PlantModel::Kinematic) == RowRole::InputConstraint);
                CHECK(row_role(k, PlantModel::Torque) == RowRole::Rd1);
            } else {
                CHECK(row_role(k, PlantModel::Kinematic) == RowRole::Rd1);
                CHECK(row_role(k, PlantModel::Torque) == RowRole::Rd2);
            }
            CHECK(barrier_kind_from_string(to_string(k)) == k);
        }
    }

    TEST_CASE("kinematic joint-limit row")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(6);
        const RobotState s{test::random_q(m, rng), Vec::Zero(m.dof())};
        const auto rows = eval_barrier(spec_of(BarrierKind::JointPositionLimit), m, s, {}, PlantModel::Kinematic);
        const double alpha = 10.0;
        for (int i = 0; i < m.dof(); ++i) {
            const LinearConstraintRow row = build_rd1_constraint(rows[i], alpha, kinematic_plant_terms(s));
            CHECK((row.a - Vec::Unit(m.dof(), i)).norm() == 0.0);
            CHECK(std::abs(row.b + alpha * (s.q[i] - m.limits().q_min[i])) < 1e-14);
        }
    }

    TEST_CASE("boundary row reduces to hdot >= 0")
    {
        const RobotModel m = test::panda();
        RobotState s = RobotState::zeros(m.dof());
        s.q = m.limits().q_min;
        const auto rows = eval_barrier(spec_of(BarrierKind::JointPositionLimit), m, s, {}, PlantModel::Kinematic);
        CHECK(build_rd1_constraint(rows[0], 10.0, kinematic_plant_terms(s)).b == 0.0);
    }

    TEST_CASE("torque plant joint-velocity upper row")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(7);
        const RobotState s{test::random_q(m, rng), test::random_vec(m.dof(), rng)};
        const Mat Minv = mass_matrix(m, s.q).inverse();
        const BiasForces bf = bias_forces(m, s.q, s.qd, kDefaultGravity);
        const Vec cg = bf.coriolis + bf.gravity;
        const auto rows = eval_barrier(spec_of(BarrierKind::JointVelocityLimit), m, s, {}, PlantModel::Torque);
        const int i = 2;
        const auto& upper = rows[static_cast<std::size_t>(m.dof() + i)];
        const double alpha = 10.0;
        const LinearConstraintRow row = build_rd1_constraint(upper, alpha, torque_plant_terms(s.qd, Minv, cg));
        CHECK((row.a + Minv.row(i).transpose()).norm() < 1e-10);
        const double h = m.limits().qd_max[i] - s.qd[i];
        CHECK(std::abs(row.b - (-alpha * h - (Minv * cg)[i])) < 1e-9);
        CHECK_THROWS_AS(build_rd2_constraint(upper, alpha, alpha, torque_plant_terms(s.qd, Minv, cg)),
                        std::invalid_argument);
    }

    TEST_CASE("RD2 row at rest with a linear barrier")
    {
        const RobotModel m = test::panda();
        std::mt19937_64 rng(8);
        const RobotState s{test::random_q(m, rng), Vec::Zero(m.dof())};
        const Mat Minv = mass_matrix(m, s.q).inverse();
        const Vec cg = bias_forces(m, s.q, s.qd, kDefaultGravity).gravity;
        const auto rows = eval_barrier(spec_of(BarrierKind::JointPositionLimit), m, s, {}, PlantModel::Torque);
        const double a1 = 10.0, a2 = 10.0;
        const auto& e = rows[1];
        REQUIRE(e.relative_degree == 2);
        const LinearConstraintRow row = build_rd2_constraint(e, a1, a2, torque_plant_terms(s.qd, Minv, cg));
        // dh^T M^-1 (u - c - g) >= -a2 (a1 h)
        CHECK((row.a - Minv * e.dh_dq).norm() < 1e-12);
        CHECK(std::abs(row.b - (-a2 * a1 * e.h + e.dh_dq.dot(Minv * cg))) < 1e-9);
        CHECK_THROWS_AS(build_rd1_constraint(e, a1, torque_plant_terms(s.qd, Minv, cg)), std::invalid_argument);
    }

    TEST_CASE("RD2 row predicts hddot along a torque rollout")
    {
        const RobotModel m = test::panda();
        const SceneSnapshot scene = panda_scene();
        std::mt19937_64 rng(9);
        const RobotState s{test::random_q(m, rng, 0.3), test::random_vec(m.dof(), rng, 0.5)};
        const BiasForces bf = bias_forces(m, s.q, s.qd, kDefaultGravity);
        const Mat Minv = mass_matrix(m, s.q).inverse();
        const Vec cg = bf.coriolis + bf.gravity;
        const Vec u = cg + test::random_vec(m.dof(), rng, 5.0);
        BarrierSpec box = spec_of(BarrierKind::OpPositionBox);
        box.box_min = Vec3(-1, -1, -1);
        box.box_max = Vec3(1, 1, 1.5);
        const double dt = 1e-4;
        const auto hdot_at = [&](const RobotState& x) {
            const auto e = eval_barrier(box, m, x, scene);
            Vec v(static_cast<Eigen::Index>(e.size()));
            for (std::size_t r = 0; r < e.size(); ++r) v[static_cast<Eigen::Index>(r)] = e[r].dh_dq.dot(x.qd);
            return v;
        };
        const RobotState fwd = integrate_step(m, s, u, ControlMode::Torque, dt);
        const RobotState bwd = integrate_step(m, s, u, ControlMode::Torque, -dt);
        const Vec hddot = (hdot_at(fwd) - hdot_at(bwd)) / (2.0 * dt);
        const auto rows = eval_barrier(box, m, s, scene, PlantModel::Torque);
        const PlantTerms plant = torque_plant_terms(s.qd, Minv, cg);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            // With alpha = 0 the row reads hddot = a^T u - b.
            const LinearConstraintRow row = build_rd2_constraint(rows[r], 0.0, 0.0, plant);
            CHECK(std::abs(row.a.dot(u) - row.b - hddot[static_cast<Eigen::Index>(r)]) < 1e-4);
        }
    }

    TEST_CASE("velocity barrier as a hard input row")
    {
        const RobotModel m = test::panda();
        RobotState s = RobotState::zeros(m.dof());
        const auto rows = eval_barrier(spec_of(BarrierKind::JointVelocityLimit), m, s, {}, PlantModel::Kinematic);
        const LinearConstraintRow upper = build_input_constraint(rows[static_cast<std::size_t>(m.dof())], s);
        CHECK_FALSE(upper.slackable);
        // -u0 >= -qd_max
        CHECK(std::abs(upper.b + m.limits().qd_max[0]) < 1e-14);
    }

    TEST_CASE("default gains and spec validation")
    {
        const BarrierSpec s = barrier_spec_from_json({{"kind", "joint_position_limit"}}, kDefaultAlpha, kDefaultAlpha);
        CHECK(s.alpha == 10.0);
        CHECK(s.alpha2 == 10.0);
        CHECK_THROWS_AS(barrier_spec_from_json({{"kind", "no_such_kind"}}, 10.0, 10.0), ConfigError);
        BarrierSpec bad = spec_of(BarrierKind::Singularity);
        bad.epsilon = 0.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        const BarrierSpec round = barrier_spec_from_json(to_json(s), 1.0, 1.0);
        CHECK(round.kind == s.kind);
    }

    TEST_CASE("batched evaluation agrees with per-spec evaluation")
    {
        const RobotModel m = test::panda();
        const SceneSnapshot scene = panda_scene();
        const auto specs = all_kind_specs(m);
        const BarrierSet set(m, specs, scene);
        std::mt19937_64 rng(10);
        const RobotState s{test::random_q(m, rng), test::random_vec(m.dof(), rng)};
        BarrierBatch batch;
        set.evaluate(KinematicsCache(m, s.q), s, scene, batch);
        int r = 0;
        for (const auto& spec : specs) {
            for (const auto& e : eval_barrier(spec, m, s, scene)) {
                CHECK(batch.h[r] == doctest::Approx(e.h).epsilon(1e-12));
                ++r;
            }
        }
        CHECK(r == set.size());
    }
}

#include "oscbf/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace oscbf {

std::string_view to_string(ControlMode mode)
{
    return mode == ControlMode::Velocity ? "velocity" : "torque";
}

ControlMode control_mode_from_string(std::string_view name)
{
    if (name == "velocity") return ControlMode::Velocity;
    if (name == "torque") return ControlMode::Torque;
    throw ConfigError("unknown control mode '" + std::string(name) + "'");
}

std::string_view to_string(ObjectiveKind kind)
{
    switch (kind) {
    case ObjectiveKind::Oscbf: return "oscbf";
    case ObjectiveKind::JointMetric: return "joint_metric";
    case ObjectiveKind::OpMetric: return "op_metric";
    }
    return "unknown";
}

ObjectiveKind objective_kind_from_string(std::string_view name)
{
    if (name == "oscbf") return ObjectiveKind::Oscbf;
    if (name == "joint_metric") return ObjectiveKind::JointMetric;
    if (name == "op_metric") return ObjectiveKind::OpMetric;
    throw ConfigError("unknown objective '" + std::string(name) + "'");
}

TaskTarget TaskTarget::hold(const RobotModel& model, const Vec& q)
{
    const auto fk = forward_kinematics(model, q);
    TaskTarget t;
    t.position = fk.ee.translation();
    t.rotation = fk.ee.linear();
    t.q_des = q;
    t.qd_des = Vec::Zero(model.dof());
    t.qdd_des = Vec::Zero(model.dof());
    return t;
}

void TaskTarget::validate(int dof) const
{
    require_dim(q_des.size(), dof, "q_des");
    require_dim(qd_des.size(), dof, "qd_des");
    require_dim(qdd_des.size(), dof, "qdd_des");
    if (!position.allFinite() || !rotation.allFinite() || !twist.allFinite() || !twist_rate.allFinite() ||
        !q_des.allFinite() || !qd_des.allFinite() || !qdd_des.allFinite()) {
        throw std::invalid_argument("TaskTarget: non-finite entry");
    }
    if (!(rotation.transpose() * rotation).isApprox(Mat3::Identity(), 1e-6) || rotation.determinant() < 0.0) {
        throw std::invalid_argument("TaskTarget: rotation is not orthonormal");
    }
}

Gains Gains::defaults(int dof, ControlMode mode)
{
    Gains g;
    if (mode == ControlMode::Velocity) {
        g.K_po = Vec6::Constant(5.0);
        g.K_do = Vec6::Zero();
        g.K_pj = Vec::Constant(dof, 1.0);
        g.K_dj = Vec::Zero(dof);
    } else {
        g.K_po = Vec6::Constant(100.0);
        g.K_do = Vec6::Constant(20.0);
        g.K_pj = Vec::Constant(dof, 10.0);
        g.K_dj = Vec::Constant(dof, 5.0);
    }
    g.W_o = Vec6::Ones();
    g.W_j = Vec::Ones(dof);
    return g;
}

void Gains::validate(int dof) const
{
    require_dim(K_pj.size(), dof, "K_pj");
    require_dim(K_dj.size(), dof, "K_dj");
    require_dim(W_j.size(), dof, "W_j");
    if ((K_po.array() < 0.0).any() || (K_do.array() < 0.0).any() || (K_pj.array() < 0.0).any() ||
        (K_dj.array() < 0.0).any()) {
        throw ConfigError("gains must be non-negative");
    }
    if ((W_o.array() <= 0.0).any() || (W_j.array() <= 0.0).any()) throw ConfigError("weights must be positive");
}

Vec3 orientation_error(const Mat3& R, const Mat3& R_des)
{
    Vec3 e = Vec3::Zero();
    for (int i = 0; i < 3; ++i) e += Vec3(R.col(i)).cross(Vec3(R_des.col(i)));
    return -0.5 * e;
}

Vec task_error(const RobotModel& model, const OpSpaceQuantities& op, const TaskTarget& target)
{
    Vec6 e;
    e.head<3>() = op.position - target.position;
    e.tail<3>() = orientation_error(op.rotation, target.rotation);
    return model.select_task_rows(e);
}

KinematicNominal kinematic_nominal(const RobotModel& model, const RobotState& state, const OpSpaceQuantities& op,
                                   const TaskTarget& target, const Gains& gains)
{
    const Vec e = task_error(model, op, target);
    KinematicNominal out;
    out.nu_cmd = model.select_task_rows(target.twist) -
                 model.select_task_rows(gains.K_po).cwiseProduct(e);
    out.qd_null = op.N_kin * (target.qd_des - gains.K_pj.cwiseProduct(state.q - target.q_des));
    out.qd_nom = op.J_pinv * out.nu_cmd + out.qd_null;
    return out;
}

KinematicNominal kinematic_nominal(const RobotModel& model, const RobotState& state, const TaskTarget& target,
                                   const Gains& gains)
{
    return kinematic_nominal(model, state, op_space_quantities(model, state), target, gains);
}

DynamicNominal dynamic_nominal(const RobotModel& model, const RobotState& state, const OpSpaceQuantities& op,
                               const TaskTarget& target, const Gains& gains)
{
    const Vec e = task_error(model, op, target);
    const Vec nu = op.J * state.qd;
    const Vec nu_des = model.select_task_rows(target.twist);
    DynamicNominal out;
    out.nu_dot_cmd = model.select_task_rows(target.twist_rate) - model.select_task_rows(gains.K_po).cwiseProduct(e) -
                     model.select_task_rows(gains.K_do).cwiseProduct(nu - nu_des);
    out.qdd_cmd = target.qdd_des - gains.K_pj.cwiseProduct(state.q - target.q_des) -
                  gains.K_dj.cwiseProduct(state.qd - target.qd_des);
    out.F = op.Lambda * (out.nu_dot_cmd - op.jdot_qdot);
    out.tau_null = op.N_dyn_T * (op.M * out.qdd_cmd);
    out.tau_nom = op.J.transpose() * out.F + out.tau_null + op.c + op.g;
    return out;
}

DynamicNominal dynamic_nominal(const RobotModel& model, const RobotState& state, const TaskTarget& target,
                               const Gains& gains)
{
    return dynamic_nominal(model, state, op_space_quantities(model, state), target, gains);
}

void objective_from_terms(const std::vector<ObjectiveTerm>& terms, const Vec& u_nom, Mat& P, Vec& q)
{
    const auto n = u_nom.size();
    P.setZero(n, n);
    for (const auto& t : terms) {
        require_dim(t.map.cols(), n, "objective term width");
        require_dim(t.weight.size(), t.map.rows(), "objective weight");
        const Mat WB = t.weight.asDiagonal() * t.map;
        P.noalias() += WB.transpose() * WB;
    }
    P = 0.5 * (P + P.transpose());
    q = -P * u_nom;
}

std::vector<ObjectiveTerm> kinematic_objective_terms(const RobotModel& model, const OpSpaceQuantities& op,
                                                     const Gains& gains, ObjectiveKind kind)
{
    const int n = model.dof();
    const Vec w_o = model.select_task_rows(gains.W_o);
    switch (kind) {
    case ObjectiveKind::Oscbf: return {{op.N_kin, gains.W_j}, {op.J, w_o}};
    case ObjectiveKind::JointMetric: return {{Mat::Identity(n, n), Vec::Ones(n)}};
    case ObjectiveKind::OpMetric: return {{op.J, w_o}};
    }
    return {};
}

std::vector<ObjectiveTerm> dynamic_objective_terms(const RobotModel& model, const OpSpaceQuantities& op,
                                                   const Gains& gains, ObjectiveKind kind)
{
    const int n = model.dof();
    const Vec w_o = model.select_task_rows(gains.W_o);
    switch (kind) {
    case ObjectiveKind::Oscbf: return {{op.M_inv * op.N_dyn_T, gains.W_j}, {op.J * op.M_inv, w_o}};
    case ObjectiveKind::JointMetric: return {{Mat::Identity(n, n), Vec::Ones(n)}};
    case ObjectiveKind::OpMetric: return {{op.J * op.M_inv, w_o}};
    }
    return {};
}

namespace {

void add_box_rows(const Vec& lo, const Vec& hi, int tag, std::vector<LinearConstraintRow>& rows)
{
    const auto n = lo.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        LinearConstraintRow lower;
        lower.a = Vec::Unit(n, i);
        lower.b = lo[i];
        lower.slackable = false;
        lower.source = tag;
        rows.push_back(std::move(lower));
        LinearConstraintRow upper;
        upper.a = -Vec::Unit(n, i);
        upper.b = -hi[i];
        upper.slackable = false;
        upper.source = tag;
        rows.push_back(std::move(upper));
    }
}

}  // namespace

QpProblem assemble_kinematic_qp(const RobotModel& model, const OpSpaceQuantities& op, const Vec& qd_nom,
                                const std::vector<LinearConstraintRow>& barrier_rows, const Gains& gains,
                                ObjectiveKind kind)
{
    QpProblem pb;
    objective_from_terms(kinematic_objective_terms(model, op, gains, kind), qd_nom, pb.P, pb.q);
    pb.rows = barrier_rows;
    add_box_rows(model.limits().qd_min, model.limits().qd_max, kTagVelocityLimit, pb.rows);
    return pb;
}

QpProblem assemble_dynamic_qp(const RobotModel& model, const OpSpaceQuantities& op, const Vec& tau_nom,
                              const std::vector<LinearConstraintRow>& barrier_rows, const Gains& gains,
                              ObjectiveKind kind, const std::optional<WrenchLimits>& wrench)
{
    QpProblem pb;
    objective_from_terms(dynamic_objective_terms(model, op, gains, kind), tau_nom, pb.P, pb.q);
    pb.rows = barrier_rows;
    add_box_rows(model.limits().tau_min, model.limits().tau_max, kTagTorqueLimit, pb.rows);
    if (wrench) {
        const int k = model.task_dim();
        require_dim(wrench->F_min.size(), k, "F_min");
        require_dim(wrench->F_max.size(), k, "F_max");
        // F = J_bar^T (Gamma - c - g)
        const Mat JbT = op.J_bar.transpose();
        const Vec offset = JbT * (op.c + op.g);
        for (int i = 0; i < k; ++i) {
            LinearConstraintRow lower;
            lower.a = JbT.row(i).transpose();
            lower.b = wrench->F_min[i] + offset[i];
            lower.slackable = false;
            lower.source = kTagWrenchLimit;
            pb.rows.push_back(lower);
            LinearConstraintRow upper;
            upper.a = -JbT.row(i).transpose();
            upper.b = -wrench->F_max[i] - offset[i];
            upper.slackable = false;
            upper.source = kTagWrenchLimit;
            pb.rows.push_back(std::move(upper));
        }
    }
    return pb;
}

void build_constraint_rows(const BarrierSet& set, const BarrierBatch& batch, const PlantTerms& plant,
                           const RowBuildOptions& options, std::vector<LinearConstraintRow>& rows,
                           RowBuildStats& stats)
{
    const int m = set.size();
    const int n = set.model().dof();
    rows.clear();
    stats = {};

    std::vector<char> keep(m, 1);
    if (options.prune_k > 0) {
        std::map<int, std::vector<int>> by_sphere;
        for (int r = 0; r < m; ++r) {
            if (set.rows()[r].kind == BarrierKind::CollisionPair) by_sphere[set.rows()[r].index].push_back(r);
        }
        for (auto& [sphere, group] : by_sphere) {
            if (static_cast<int>(group.size()) <= options.prune_k) continue;
            std::stable_sort(group.begin(), group.end(), [&](int a, int b) { return batch.h[a] < batch.h[b]; });
            for (std::size_t i = options.prune_k; i < group.size(); ++i) {
                keep[group[i]] = 0;
                ++stats.pruned;
            }
        }
    }

    // Row-wise products with M^-1 for the torque plant.
    Mat A_q, A_qd;
    if (plant.plant == PlantModel::Torque) {
        A_q.noalias() = batch.dh_dq * plant.M_inv;
        A_qd.noalias() = batch.dh_dqd * plant.M_inv;
    }
    const Vec hdot = batch.dh_dq * plant.qd + batch.dh_dt;

    rows.reserve(m);
    for (int r = 0; r < m; ++r) {
        if (!keep[r]) continue;
        if (batch.degenerate[r]) {
            ++stats.degenerate;
            continue;
        }
        const BarrierSpec& spec = set.spec_of(r);
        RowRole role = row_role(set.rows()[r].kind, plant.plant);
        if (!options.hocbf_enabled && role == RowRole::Rd2) role = RowRole::Rd1;
        const double h = batch.h[r];

        LinearConstraintRow row;
        row.source = r;
        if (plant.plant == PlantModel::Kinematic) {
            if (role == RowRole::InputConstraint) {
                row.a = batch.dh_dqd.row(r).transpose();
                row.b = batch.dh_dqd.row(r).dot(plant.qd) - h;
                row.slackable = false;
            } else {
                row.a = batch.dh_dq.row(r).transpose();
                row.b = -spec.alpha * h - batch.dh_dt[r];
            }
        } else if (role == RowRole::Rd1) {
            row.a = A_qd.row(r).transpose();
            row.b = -spec.alpha * h - hdot[r] + batch.dh_dqd.row(r).dot(plant.bias_acc);
        } else {
            row.a = A_q.row(r).transpose();
            row.b = -spec.alpha2 * (hdot[r] + spec.alpha * h) - spec.alpha * hdot[r] - batch.curvature[r] +
                    batch.dh_dq.row(r).dot(plant.bias_acc);
        }
        if (row.a.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, std::abs(row.b)) || row.a.size() != n) {
            ++stats.dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }
}

Vec clamp_to_limits(const RobotModel& model, ControlMode mode, const Vec& u)
{
    const auto& lim = model.limits();
    if (mode == ControlMode::Velocity) return u.cwiseMax(lim.qd_min).cwiseMin(lim.qd_max);
    return u.cwiseMax(lim.tau_min).cwiseMin(lim.tau_max);
}

// --------------------------------------------------------------------------

Controller::Controller(const RobotModel& model, std::vector<BarrierSpec> barriers, const SceneSnapshot& initial_scene,
                       ControllerConfig config)
    : m_model(&model),
      m_barriers(model, std::move(barriers), initial_scene),
      m_config(std::move(config)),
      m_solver(m_config.qp)
{
    if (m_config.gains.K_pj.size() == 0) m_config.gains = Gains::defaults(model.dof(), m_config.mode);
    m_config.gains.validate(model.dof());
    if (!(m_config.slack_penalty > 0.0)) throw ConfigError("slack penalty must be positive");
    if (m_config.rows.prune_k < 0) throw ConfigError("prune_k must be >= 0");
}

int Controller::constraint_count() const
{
    int rows = m_barriers.size();
    if (m_config.wrench) rows += 2 * m_model->task_dim();
    return rows + 2 * m_model->dof();
}

SafeCommand Controller::step(const RobotState& state, const TaskTarget& target, const SceneSnapshot& scene)
{
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const RobotModel& model = *m_model;
    check_state(model, state);
    target.validate(model.dof());

    const KinematicsCache kin(model, state.q);
    OpSpaceOptions op_opt;
    op_opt.gravity = m_config.gravity;
    const PlantModel plant = plant_of(m_config.mode);
    op_opt.dynamics = plant == PlantModel::Torque;
    m_op = op_space_quantities(model, kin, state, op_opt);

    SafeCommand cmd;
    cmd.mode = m_config.mode;
    PlantTerms terms;
    if (plant == PlantModel::Kinematic) {
        cmd.nominal = kinematic_nominal(model, state, m_op, target, m_config.gains).qd_nom;
        terms = kinematic_plant_terms(state);
    } else {
        cmd.nominal = dynamic_nominal(model, state, m_op, target, m_config.gains).tau_nom;
        terms = torque_plant_terms(state.qd, m_op.M_inv, m_op.c + m_op.g);
    }

    const bool curvature = plant == PlantModel::Torque && m_config.rows.hocbf_enabled;
    if (curvature) {
        m_barriers.evaluate_with_curvature(kin, state, scene, plant, m_batch);
    } else {
        m_barriers.evaluate(kin, state, scene, m_batch);
    }
    build_constraint_rows(m_barriers, m_batch, terms, m_config.rows, m_rows, cmd.row_stats);

    QpProblem pb = plant == PlantModel::Kinematic
                       ? assemble_kinematic_qp(model, m_op, cmd.nominal, m_rows, m_config.gains, m_config.objective)
                       : assemble_dynamic_qp(model, m_op, cmd.nominal, m_rows, m_config.gains, m_config.objective,
                                             m_config.wrench);
    pb.slack_penalty = m_config.slack_penalty;
    cmd.num_constraints = pb.num_rows();

    const QpSolution sol = m_solver.solve(pb, m_warm ? &*m_warm : nullptr);
    cmd.status = sol.status;
    cmd.iterations = sol.iterations;
    cmd.solve_time = sol.solve_time;
    if (sol.status == QpStatus::Infeasible || !sol.x.allFinite()) {
        cmd.emergency_clamp = true;
        cmd.value = clamp_to_limits(model, m_config.mode, cmd.nominal);
        m_warm.reset();
    } else {
        cmd.value = sol.x;
        m_warm = sol;
        const Vec Ax_b = [&] {
            Vec r(pb.num_rows());
            for (int i = 0; i < pb.num_rows(); ++i) r[i] = pb.rows[i].a.dot(sol.x) + sol.t[i] - pb.rows[i].b;
            return r;
        }();
        for (int i = 0; i < pb.num_rows(); ++i) {
            if (pb.rows[i].source < 0) continue;
            const double scale = 1e-6 * (1.0 + std::abs(pb.rows[i].b));
            if (Ax_b[i] <= scale || sol.t[i] > scale) cmd.active_rows.push_back(pb.rows[i].source);
            cmd.max_slack = std::max(cmd.max_slack, sol.t[i]);
        }
    }

    const Vec du = cmd.value - cmd.nominal;
    cmd.joint_deviation = du.norm();
    if (plant == PlantModel::Kinematic) {
        cmd.op_deviation = (m_op.J * du).norm();
        cmd.null_deviation = (m_op.N_kin * du).norm();
    } else {
        const Vec dqdd = m_op.M_inv * du;
        cmd.op_deviation = (m_op.J * dqdd).norm();
        cmd.null_deviation = (m_op.N_dyn * dqdd).norm();
    }
    cmd.step_time = std::chrono::duration<double>(Clock::now() - start).count();
    return cmd;
}

}  // namespace oscbf

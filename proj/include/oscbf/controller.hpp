#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "oscbf/barriers.hpp"
#include "oscbf/dynamics.hpp"
#include "oscbf/qp_solver.hpp"

namespace oscbf {

enum class ControlMode { Velocity, Torque };
std::string_view to_string(ControlMode mode);
ControlMode control_mode_from_string(std::string_view name);

inline PlantModel plant_of(ControlMode mode)
{
    return mode == ControlMode::Velocity ? PlantModel::Kinematic : PlantModel::Torque;
}

/// Task-consistent objective, or one of the two baselines it is compared to.
enum class ObjectiveKind {
    Oscbf,
    JointMetric,  // || u - u_nom ||^2
    OpMetric,     // op-space term only
};
std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view name);

struct TaskTarget {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    Vec6 twist = Vec6::Zero();       // [v; w]
    Vec6 twist_rate = Vec6::Zero();  // [a; alpha]
    Vec q_des, qd_des, qdd_des;

    static TaskTarget hold(const RobotModel& model, const Vec& q);
    void validate(int dof) const;
};

/// Diagonal gains and weights, stored as their diagonals. Op-space entries
/// are six long and reduced to the model's task axes on use.
struct Gains {
    Vec6 K_po = Vec6::Constant(1.0);
    Vec6 K_do = Vec6::Constant(1.0);
    Vec K_pj, K_dj;
    Vec6 W_o = Vec6::Ones();
    Vec W_j;

    static Gains defaults(int dof, ControlMode mode);
    void validate(int dof) const;
};

/// 3-vector orientation error -1/2 sum_i r_i x r_i,des over the columns.
Vec3 orientation_error(const Mat3& R, const Mat3& R_des);

/// [x_p - x_p,des; dphi], reduced to task rows.
Vec task_error(const RobotModel& model, const OpSpaceQuantities& op, const TaskTarget& target);

struct KinematicNominal {
    Vec nu_cmd;   // task twist command
    Vec qd_null;  // projected posture velocity
    Vec qd_nom;
};

KinematicNominal kinematic_nominal(const RobotModel& model, const RobotState& state, const OpSpaceQuantities& op,
                                   const TaskTarget& target, const Gains& gains);
KinematicNominal kinematic_nominal(const RobotModel& model, const RobotState& state, const TaskTarget& target,
                                   const Gains& gains);

struct DynamicNominal {
    Vec nu_dot_cmd;
    Vec qdd_cmd;
    Vec F;          // op-space wrench
    Vec tau_null;   // N^T M qdd
    Vec tau_nom;
};

DynamicNominal dynamic_nominal(const RobotModel& model, const RobotState& state, const OpSpaceQuantities& op,
                               const TaskTarget& target, const Gains& gains);
DynamicNominal dynamic_nominal(const RobotModel& model, const RobotState& state, const TaskTarget& target,
                               const Gains& gains);

/// One weighted task in the objective: || diag(w) B (u - u_nom) ||^2.
struct ObjectiveTerm {
    Mat map;
    Vec weight;
};

/// P = sum B^T W^T W B, q = -P u_nom.
void objective_from_terms(const std::vector<ObjectiveTerm>& terms, const Vec& u_nom, Mat& P, Vec& q);

std::vector<ObjectiveTerm> kinematic_objective_terms(const RobotModel& model, const OpSpaceQuantities& op,
                                                     const Gains& gains, ObjectiveKind kind);
std::vector<ObjectiveTerm> dynamic_objective_terms(const RobotModel& model, const OpSpaceQuantities& op,
                                                   const Gains& gains, ObjectiveKind kind);

/// Velocity-mode QP over qd: objective plus the given barrier rows and hard
/// joint-velocity limits.
QpProblem assemble_kinematic_qp(const RobotModel& model, const OpSpaceQuantities& op, const Vec& qd_nom,
                                const std::vector<LinearConstraintRow>& barrier_rows, const Gains& gains,
                                ObjectiveKind kind = ObjectiveKind::Oscbf);

struct WrenchLimits {
    Vec F_min, F_max;  // task dimension
};

/// Torque-mode QP over Gamma: objective plus barrier rows, hard torque limits
/// and optional wrench rows.
QpProblem assemble_dynamic_qp(const RobotModel& model, const OpSpaceQuantities& op, const Vec& tau_nom,
                              const std::vector<LinearConstraintRow>& barrier_rows, const Gains& gains,
                              ObjectiveKind kind = ObjectiveKind::Oscbf,
                              const std::optional<WrenchLimits>& wrench = std::nullopt);

struct RowBuildOptions {
    // When false, RD2 rows are built as RD1 (the HOCBF path is disabled).
    bool hocbf_enabled = true;
    // Keep only the K closest obstacles per robot sphere for collision rows (0 = all).
    int prune_k = 0;
};

struct RowBuildStats {
    int degenerate = 0;
    int dropped = 0;  // rows with a vanishing coefficient vector
    int pruned = 0;
};

/// Constraint rows for every barrier row in the batch, against the plant.
void build_constraint_rows(const BarrierSet& set, const BarrierBatch& batch, const PlantTerms& plant,
                           const RowBuildOptions& options, std::vector<LinearConstraintRow>& rows,
                           RowBuildStats& stats);

struct SafeCommand {
    ControlMode mode = ControlMode::Velocity;
    Vec value;    // qd* or Gamma*
    Vec nominal;  // qd_nom or Gamma_nom
    QpStatus status = QpStatus::Optimal;
    bool emergency_clamp = false;
    std::vector<int> active_rows;  // barrier row indices with binding constraints
    double max_slack = 0.0;
    double joint_deviation = 0.0;  // || value - nominal ||
    double op_deviation = 0.0;     // || J (qd* - qd_nom) || or || J M^-1 (Gamma* - Gamma_nom) ||
    double null_deviation = 0.0;   // || N (qd* - qd_nom) || or || N M^-1 (Gamma* - Gamma_nom) ||
    int num_constraints = 0;
    int iterations = 0;
    double solve_time = 0.0;  // seconds
    double step_time = 0.0;   // seconds, whole pipeline
    RowBuildStats row_stats;
};

struct ControllerConfig {
    ControlMode mode = ControlMode::Velocity;
    Gains gains;
    ObjectiveKind objective = ObjectiveKind::Oscbf;
    double slack_penalty = kDefaultSlackPenalty;
    RowBuildOptions rows;
    std::optional<WrenchLimits> wrench;
    QpOptions qp;
    Vec3 gravity = kDefaultGravity;
};

/// One OSCBF pipeline instance. step() is sequential per instance.
class Controller {
public:
    Controller(const RobotModel& model, std::vector<BarrierSpec> barriers, const SceneSnapshot& initial_scene,
               ControllerConfig config);

    SafeCommand step(const RobotState& state, const TaskTarget& target, const SceneSnapshot& scene);

    const BarrierSet& barriers() const { return m_barriers; }
    const ControllerConfig& config() const { return m_config; }
    const RobotModel& model() const { return *m_model; }
    // Barrier values from the most recent step.
    const BarrierBatch& last_batch() const { return m_batch; }
    const OpSpaceQuantities& last_op_space() const { return m_op; }
    // Barrier constraint rows of the most recent step, in command space.
    const std::vector<LinearConstraintRow>& last_rows() const { return m_rows; }
    // Number of QP rows a step produces (barrier rows plus input limits).
    int constraint_count() const;

private:
    const RobotModel* m_model;
    BarrierSet m_barriers;
    ControllerConfig m_config;
    QpSolver m_solver;
    std::optional<QpSolution> m_warm;
    BarrierBatch m_batch;
    OpSpaceQuantities m_op;
    std::vector<LinearConstraintRow> m_rows;
};

/// Projection of a command onto the model's velocity or torque box.
Vec clamp_to_limits(const RobotModel& model, ControlMode mode, const Vec& u);

}  // namespace oscbf

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscbf/kinematics.hpp"

namespace oscbf {

enum class BarrierKind {
    JointPositionLimit,
    JointVelocityLimit,
    OpPositionBox,
    OpVelocityLimit,
    Singularity,
    CollisionPair,
    WholeBodyBox,
    SelfCollisionPair,
    DynamicObstacle,
};

inline constexpr std::array<BarrierKind, 9> kAllBarrierKinds = {
    BarrierKind::JointPositionLimit, BarrierKind::JointVelocityLimit, BarrierKind::OpPositionBox,
    BarrierKind::OpVelocityLimit,    BarrierKind::Singularity,        BarrierKind::CollisionPair,
    BarrierKind::WholeBodyBox,       BarrierKind::SelfCollisionPair,  BarrierKind::DynamicObstacle,
};

std::string_view to_string(BarrierKind kind);
BarrierKind barrier_kind_from_string(std::string_view name);
// True for barriers whose value depends on joint velocities.
bool is_velocity_barrier(BarrierKind kind);

inline constexpr double kDefaultAlpha = 10.0;
inline constexpr double kDefaultGamma = 0.25;
inline constexpr double kDefaultSingularityEpsilon = 1e-2;

struct BarrierSpec {
    BarrierKind kind = BarrierKind::JointPositionLimit;
    double alpha = kDefaultAlpha;   // class-K gain for h
    double alpha2 = kDefaultAlpha;  // class-K gain for the HOCBF h2
    std::string id;

    // Joint position/velocity limits (default: the model's) or twist limits
    // for OpVelocityLimit (one entry per task axis).
    std::optional<Vec> lower, upper;
    // Axis-aligned boxes: EE box or whole-body box.
    Vec3 box_min = Vec3::Constant(-1.0);
    Vec3 box_max = Vec3::Constant(1.0);
    // Enabled faces, ordered [min x, min y, min z, max x, max y, max z].
    std::array<bool, 6> faces = {true, true, true, true, true, true};
    double epsilon = kDefaultSingularityEpsilon;
    std::vector<int> spheres;    // robot sphere subset; empty = all
    std::vector<int> obstacles;  // obstacle subset; empty = all (collision) or all dynamic (dynamic obstacle)
    std::vector<std::pair<int, int>> pairs;  // self-collision pairs; empty = model pairs
    double gamma = kDefaultGamma;

    void validate() const;
};

BarrierSpec barrier_spec_from_json(const nlohmann::json& j, double default_alpha, double default_alpha2);
nlohmann::json to_json(const BarrierSpec& spec);

struct Obstacle {
    Vec3 center = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double radius = 0.1;
    bool dynamic = false;
};

/// Obstacle positions and velocities at time t.
struct SceneSnapshot {
    double t = 0.0;
    std::vector<Obstacle> obstacles;

    // Linear extrapolation of every obstacle by dt.
    SceneSnapshot advanced(double dt) const;
};

enum class PlantModel { Kinematic, Torque };

/// How a barrier row enters the QP for a given plant (Table-I style).
enum class RowRole {
    InputConstraint,  // hard linear constraint on the input (velocity limits under velocity control)
    Rd1,
    Rd2,
};

RowRole row_role(BarrierKind kind, PlantModel plant);

struct BarrierEvaluation {
    double h = 0.0;
    Vec dh_dq;
    Vec dh_dqd;        // zero for configuration-only barriers
    double dh_dt = 0.0;  // explicit time dependence from moving obstacles
    // d/dt (dh_dq . qd + dh_dt) at fixed qd; only filled for RD2 rows.
    double curvature = 0.0;
    int relative_degree = 1;  // 0 means plain input constraint
    RowRole role = RowRole::Rd1;
    std::string label;
};

/// a^T u >= b
struct LinearConstraintRow {
    Vec a;
    double b = 0.0;
    bool slackable = true;
    int source = -1;  // barrier row index, or a negative InputLimitTag
};

enum InputLimitTag : int {
    kTagVelocityLimit = -1,
    kTagTorqueLimit = -2,
    kTagWrenchLimit = -3,
    kTagTwistLimit = -4,
};

struct BarrierRowInfo {
    int spec = 0;
    BarrierKind kind = BarrierKind::JointPositionLimit;
    int index = 0;     // joint / task axis / robot sphere / self pair
    int other = -1;    // obstacle index
    bool upper = false;  // max-side row of a two-sided limit or box
    int axis = 0;      // box axis
    double bound = 0.0;
    std::string label;
};

/// Stacked evaluation of every row in a BarrierSet.
struct BarrierBatch {
    Vec h;
    Mat dh_dq;   // rows x n
    Mat dh_dqd;  // rows x n
    Vec dh_dt;
    Vec curvature;
    std::vector<std::uint8_t> degenerate;
};

class BarrierSet {
public:
    BarrierSet(const RobotModel& model, std::vector<BarrierSpec> specs, const SceneSnapshot& scene);

    int size() const { return static_cast<int>(m_rows.size()); }
    const std::vector<BarrierRowInfo>& rows() const { return m_rows; }
    const std::vector<BarrierSpec>& specs() const { return m_specs; }
    const BarrierSpec& spec_of(int row) const { return m_specs[m_rows[row].spec]; }
    const RobotModel& model() const { return *m_model; }
    bool any_rd2_rows(PlantModel plant) const;

    /// Values and first derivatives of every row.
    void evaluate(const KinematicsCache& kin, const RobotState& state, const SceneSnapshot& scene,
                  BarrierBatch& out) const;

    /// As evaluate(), additionally filling `curvature` for rows that are RD2
    /// under `plant`, by central differences of the gradient along (qd, t).
    void evaluate_with_curvature(const KinematicsCache& kin, const RobotState& state, const SceneSnapshot& scene,
                                 PlantModel plant, BarrierBatch& out, double step = 1e-6) const;

private:
    bool evaluate_row(int r, const KinematicsCache& kin, const RobotState& state, const SceneSnapshot& scene,
                      BarrierBatch& out, const std::vector<Mat6X>* ee_partials) const;

    const RobotModel* m_model;
    std::vector<BarrierSpec> m_specs;
    std::vector<BarrierRowInfo> m_rows;
    bool m_needs_ee_partials = false;
};

/// Manipulability sqrt(det(J J^T)) of the task Jacobian.
double manipulability(const RobotModel& model, const Vec& q);
double manipulability(const Mat& task_jacobian);

/// Per-row evaluation of one spec. Throws DegenerateGeometry at coincident
/// sphere centers.
std::vector<BarrierEvaluation> eval_barrier(const BarrierSpec& spec, const RobotModel& model, const RobotState& state,
                                            const SceneSnapshot& scene, PlantModel plant = PlantModel::Torque);

struct BarrierGradient {
    Vec dh_dq;
    Vec dh_dqd;
};
std::vector<BarrierGradient> barrier_gradient(const BarrierSpec& spec, const RobotModel& model,
                                              const RobotState& state, const SceneSnapshot& scene);

/// Ingredients of the Lie derivatives along the plant.
struct PlantTerms {
    PlantModel plant = PlantModel::Torque;
    Vec qd;
    Mat M_inv;     // torque plant only
    Vec bias_acc;  // M^-1 (c + g), torque plant only
};

PlantTerms kinematic_plant_terms(const RobotState& state);
PlantTerms torque_plant_terms(const Vec& qd, const Mat& M_inv, const Vec& c_plus_g);

/// L_f h + L_g h u >= -alpha h. Throws std::invalid_argument when the
/// evaluation is not relative degree 1 under the plant.
LinearConstraintRow build_rd1_constraint(const BarrierEvaluation& eval, double alpha, const PlantTerms& plant);

/// HOCBF row with h2 = hdot + alpha h: L_f h2 + L_g h2 u >= -alpha2 h2.
LinearConstraintRow build_rd2_constraint(const BarrierEvaluation& eval, double alpha, double alpha2,
                                         const PlantTerms& plant);

/// Velocity-kind barrier as a hard constraint on the commanded velocity.
LinearConstraintRow build_input_constraint(const BarrierEvaluation& eval, const RobotState& state);

}  // namespace oscbf

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscbf/controller.hpp"

namespace oscbf {

/// Static sphere, or a sphere moving along piecewise-linear waypoints.
struct ObstacleSpec {
    Vec3 center = Vec3::Zero();
    double radius = 0.1;
    std::vector<double> times;   // waypoint times, ascending
    std::vector<Vec3> points;    // waypoint positions
    bool periodic = false;       // restart the waypoint schedule after the last time

    bool moving() const { return !points.empty(); }
    // Position and velocity at time t.
    Obstacle at(double t) const;
};

/// Uniform random spheres in a box, rejection-sampled against the initial
/// configuration.
struct ClutterSpec {
    int count = 0;
    Vec3 box_min = Vec3(0.2, -0.5, 0.05);
    Vec3 box_max = Vec3(0.8, 0.5, 0.9);
    double radius_min = 0.03;
    double radius_max = 0.10;
    double clearance = 0.05;
    int max_attempts = 100000;
};

enum class ReferenceKind { Hold, Waypoints, PeriodicLine, Teleop };

struct Waypoint {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    std::optional<Mat3> rotation;
};

struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::Hold;
    std::vector<Waypoint> waypoints;
    bool interpolate = true;   // linear interpolation between waypoints, else piecewise constant
    double jitter = 0.0;       // uniform per-waypoint position perturbation, seeded
    Vec3 line_start = Vec3::Zero();
    Vec3 line_end = Vec3::Zero();
    double period = 2.0;
    std::optional<Vec> q_des;  // posture target; default initial q
};

/// Low-level torque loop used to realize a velocity command on the full
/// dynamics: Gamma = M kv (qd_cmd - qd) + c + g, clamped to the torque limits.
struct VelocityTracking {
    double kv = 100.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::filesystem::path robot;
    ControlMode mode = ControlMode::Velocity;
    double duration = 1.0;
    double dt = 1e-3;
    Vec3 gravity = kDefaultGravity;
    std::uint64_t seed = 0;
    std::optional<Vec> initial_q;
    std::optional<Vec> initial_qd;
    nlohmann::json gains_doc;  // partial gains; the rest defaults per mode
    double alpha = kDefaultAlpha;
    double alpha2 = kDefaultAlpha;
    double slack_penalty = kDefaultSlackPenalty;
    ObjectiveKind objective = ObjectiveKind::Oscbf;
    std::vector<BarrierSpec> barriers;
    std::vector<ObstacleSpec> obstacles;
    std::optional<ClutterSpec> clutter;
    ReferenceSpec reference;
    RowBuildOptions rows;
    std::optional<WrenchLimits> wrench;
    std::optional<VelocityTracking> velocity_tracking;
    double torque_limit_scale = 1.0;
    double velocity_limit_scale = 1.0;
    double transient = 0.0;             // seconds excluded from RMS metrics
    double safety_tolerance = 1e-3;
    std::optional<bool> log_rows;       // per-row h columns in the CSV log
    nlohmann::json source;              // the parsed document, overrides applied

    void validate() const;
};

/// Parse a scenario document. Relative robot paths resolve against
/// `base_dir`, then the data directory.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Apply `key=value` to a document. Keys are dotted paths; the value is
/// parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Gains for the scenario's mode with the document's entries applied.
Gains scenario_gains(const ScenarioConfig& config, int dof);

/// Model with limit scaling applied.
RobotModel scenario_model(const ScenarioConfig& config);

/// Initial configuration, defaulting to the midpoint of the joint limits.
Vec scenario_initial_q(const ScenarioConfig& config, const RobotModel& model);

/// Static and moving obstacles, clutter included. Deterministic in the seed.
std::vector<ObstacleSpec> scenario_obstacles(const ScenarioConfig& config, const RobotModel& model, const Vec& q0);

SceneSnapshot scene_at(const std::vector<ObstacleSpec>& obstacles, double t);

/// Reference generator: TaskTarget as a function of time.
class Reference {
public:
    Reference(const ScenarioConfig& config, const RobotModel& model, const Vec& q0);
    TaskTarget at(double t) const;
    ReferenceKind kind() const { return m_spec.kind; }
    // Closest point of the periodic-line reference to p (line mode only).
    double line_deviation(const Vec3& p) const;

private:
    ReferenceSpec m_spec;
    TaskTarget m_hold;
    std::vector<Waypoint> m_points;  // jittered waypoints
};

std::filesystem::path data_dir();

}  // namespace oscbf

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oscbf/scenario.hpp"

namespace oscbf {

/// Velocity mode: q += qd_cmd dt, qd = qd_cmd. Torque mode: one RK4 step of
/// the full dynamics with the torque held constant.
RobotState integrate_step(const RobotModel& model, const RobotState& state, const Vec& command, ControlMode mode,
                          double dt, const Vec3& gravity = kDefaultGravity);

/// RK4 step with a state-dependent torque evaluated at every stage.
RobotState integrate_rk4(const RobotModel& model, const RobotState& state,
                         const std::function<Vec(const RobotState&)>& torque, double dt,
                         const Vec3& gravity = kDefaultGravity);

struct LogRecord {
    double t = 0.0;
    Vec q, qd;
    Vec command;
    Vec h;  // per barrier row
    double min_h = 0.0;
    double slack_max = 0.0;
    Vec3 ee_position = Vec3::Zero();
    Eigen::Quaterniond ee_orientation = Eigen::Quaterniond::Identity();
    Vec3 target_position = Vec3::Zero();
    double position_error = 0.0;
    double orientation_error = 0.0;
    double line_deviation = 0.0;
    double null_deviation = 0.0;  // null-space part of the filter's correction
    int iterations = 0;
    QpStatus status = QpStatus::Optimal;
    bool emergency_clamp = false;
    bool torque_saturated = false;  // some joint torque at its limit this step
    double latency = 0.0;  // controller step wall time, seconds
};

struct RunSummary {
    std::string name;
    ControlMode mode = ControlMode::Velocity;
    int steps = 0;
    int barrier_rows = 0;
    int qp_rows = 0;
    double min_h = 0.0;
    std::map<std::string, double> min_h_by_kind;
    double max_slack = 0.0;
    double rms_position_error = 0.0;
    double rms_orientation_error = 0.0;
    double rms_line_deviation = 0.0;
    double final_position_error = 0.0;
    double null_motion = 0.0;  // time integral of the null-space correction
    double mean_hz = 0.0;
    double p5_hz = 0.0;
    double median_latency = 0.0;
    int emergency_clamps = 0;
    int torque_saturated_steps = 0;
    int infeasible_steps = 0;
    int max_iter_steps = 0;
    int degenerate_rows = 0;
    bool diverged = false;
    bool safe = true;
    std::string error;
};

/// Stepwise simulation of one scenario: the run loop and the teleop server
/// both drive this.
class Simulation {
public:
    explicit Simulation(const ScenarioConfig& config);

    const ScenarioConfig& config() const { return m_config; }
    const RobotModel& model() const { return *m_model; }
    const RobotState& state() const { return m_state; }
    double time() const { return m_t; }
    Controller& controller() { return *m_controller; }
    const Controller& controller() const { return *m_controller; }
    const Reference& reference() const { return m_reference; }
    const std::vector<ObstacleSpec>& obstacles() const { return m_obstacles; }
    SceneSnapshot scene() const { return scene_at(m_obstacles, m_t); }
    const SafeCommand& last_command() const { return m_last; }

    /// Advance by one dt using the scenario reference, or `target` if given.
    /// Throws SimDiverged on a non-finite state.
    LogRecord step(const TaskTarget* target = nullptr);

private:
    ScenarioConfig m_config;
    std::unique_ptr<RobotModel> m_model;
    std::vector<ObstacleSpec> m_obstacles;
    Reference m_reference;
    std::unique_ptr<Controller> m_controller;
    RobotState m_state;
    double m_t = 0.0;
    long m_step = 0;
    SafeCommand m_last;
};

struct RunOptions {
    bool keep_log = true;
};

struct RunResult {
    std::vector<LogRecord> log;
    std::vector<std::string> row_labels;
    std::vector<double> latencies;
    RunSummary summary;
};

/// Run to completion. A divergence ends the run early with summary.diverged
/// set; the partial log is kept.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Min h per barrier kind over one batch.
std::map<std::string, double> min_h_by_kind(const BarrierSet& set, const Vec& h);

struct FrequencyStats {
    int constraints = 0;
    double mean_hz = 0.0;
    double p5_hz = 0.0;
    double median_step = 0.0;  // seconds
    int samples = 0;
};

/// Controller-step timing over `trials` runs of the scenario; the first run
/// is a warm-up and is discarded.
FrequencyStats benchmark(const ScenarioConfig& config, int trials);

/// Stats from a list of step latencies.
FrequencyStats frequency_stats(std::vector<double> latencies);

}  // namespace oscbf

#include "oscbf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oscbf {

namespace {

void check_finite(const RobotState& s, double t)
{
    if (!s.finite() || s.q.cwiseAbs().maxCoeff() > 1e6 || s.qd.cwiseAbs().maxCoeff() > 1e6) {
        throw SimDiverged("state diverged at t = " + std::to_string(t));
    }
}

Vec accel(const RobotModel& model, const RobotState& s, const Vec& tau, const Vec3& gravity)
{
    return forward_dynamics(model, s.q, s.qd, tau, gravity);
}

bool at_torque_limit(const RobotModel& model, const Vec& tau)
{
    const auto& lim = model.limits();
    for (int i = 0; i < tau.size(); ++i) {
        if (tau[i] >= lim.tau_max[i] * (1.0 - 1e-9) || tau[i] <= lim.tau_min[i] * (1.0 - 1e-9)) return true;
    }
    return false;
}

double rotation_angle(const Mat3& R, const Mat3& R_des)
{
    return Eigen::AngleAxisd(R * R_des.transpose()).angle();
}

}  // namespace

RobotState integrate_rk4(const RobotModel& model, const RobotState& s,
                         const std::function<Vec(const RobotState&)>& torque, double dt, const Vec3& gravity)
{
    check_state(model, s);
    const auto f = [&](const RobotState& x) { return accel(model, x, torque(x), gravity); };
    const Vec k1v = s.qd;
    const Vec k1a = f(s);
    const RobotState s2{s.q + 0.5 * dt * k1v, s.qd + 0.5 * dt * k1a};
    const Vec k2v = s2.qd;
    const Vec k2a = f(s2);
    const RobotState s3{s.q + 0.5 * dt * k2v, s.qd + 0.5 * dt * k2a};
    const Vec k3v = s3.qd;
    const Vec k3a = f(s3);
    const RobotState s4{s.q + dt * k3v, s.qd + dt * k3a};
    const Vec k4v = s4.qd;
    const Vec k4a = f(s4);
    RobotState out;
    out.q = s.q + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    out.qd = s.qd + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    check_finite(out, 0.0);
    return out;
}

RobotState integrate_step(const RobotModel& model, const RobotState& state, const Vec& command, ControlMode mode,
                          double dt, const Vec3& gravity)
{
    check_state(model, state);
    require_dim(command.size(), model.dof(), "command");
    if (!command.allFinite()) throw SimDiverged("non-finite command");
    if (mode == ControlMode::Velocity) {
        RobotState out{state.q + dt * command, command};
        check_finite(out, 0.0);
        return out;
    }
    return integrate_rk4(model, state, [&](const RobotState&) { return command; }, dt, gravity);
}

// --------------------------------------------------------------------------

namespace {

std::unique_ptr<RobotModel> make_model(const ScenarioConfig& c) { return std::make_unique<RobotModel>(scenario_model(c)); }

}  // namespace

Simulation::Simulation(const ScenarioConfig& config)
    : m_config(config),
      m_model(make_model(config)),
      m_obstacles(scenario_obstacles(config, *m_model, scenario_initial_q(config, *m_model))),
      m_reference(config, *m_model, scenario_initial_q(config, *m_model))
{
    const int n = m_model->dof();
    m_state.q = scenario_initial_q(config, *m_model);
    m_state.qd = config.initial_qd ? *config.initial_qd : Vec::Zero(n);
    check_state(*m_model, m_state);

    ControllerConfig cc;
    cc.mode = config.mode;
    cc.gains = scenario_gains(config, n);
    cc.objective = config.objective;
    cc.slack_penalty = config.slack_penalty;
    cc.rows = config.rows;
    cc.wrench = config.wrench;
    cc.gravity = config.gravity;
    m_controller = std::make_unique<Controller>(*m_model, config.barriers, scene_at(m_obstacles, 0.0), cc);
}

LogRecord Simulation::step(const TaskTarget* target_override)
{
    const RobotModel& model = *m_model;
    const SceneSnapshot scene = scene_at(m_obstacles, m_t);
    const TaskTarget target = target_override ? *target_override : m_reference.at(m_t);

    m_last = m_controller->step(m_state, target, scene);
    const BarrierBatch& batch = m_controller->last_batch();
    const OpSpaceQuantities& op = m_controller->last_op_space();

    LogRecord rec;
    rec.t = m_t;
    rec.q = m_state.q;
    rec.qd = m_state.qd;
    rec.command = m_last.value;
    rec.h = batch.h;
    rec.min_h = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < batch.h.size(); ++r) {
        if (!batch.degenerate[r]) rec.min_h = std::min(rec.min_h, batch.h[r]);
    }
    rec.slack_max = m_last.max_slack;
    rec.ee_position = op.position;
    rec.ee_orientation = Eigen::Quaterniond(op.rotation).normalized();
    rec.target_position = target.position;
    rec.position_error = (op.position - target.position).norm();
    rec.orientation_error = rotation_angle(op.rotation, target.rotation);
    if (m_reference.kind() == ReferenceKind::PeriodicLine) rec.line_deviation = m_reference.line_deviation(op.position);
    rec.null_deviation = m_last.null_deviation;
    rec.iterations = m_last.iterations;
    rec.status = m_last.status;
    rec.emergency_clamp = m_last.emergency_clamp;
    rec.latency = m_last.step_time;

    const double dt = m_config.dt;
    if (m_config.mode == ControlMode::Torque) {
        const Vec tau = clamp_to_limits(model, ControlMode::Torque, m_last.value);
        rec.torque_saturated = at_torque_limit(model, tau);
        m_state = integrate_step(model, m_state, tau, ControlMode::Torque, dt, m_config.gravity);
    } else if (m_config.velocity_tracking) {
        const double kv = m_config.velocity_tracking->kv;
        const Vec qd_cmd = m_last.value;
        const auto loop = [&](const RobotState& s) {
            const Vec bias = rnea(model, s.q, s.qd, Vec::Zero(model.dof()), m_config.gravity);
            const Vec tau = mass_matrix(model, s.q) * (kv * (qd_cmd - s.qd)) + bias;
            return clamp_to_limits(model, ControlMode::Torque, tau);
        };
        rec.torque_saturated = at_torque_limit(model, loop(m_state));
        m_state = integrate_rk4(model, m_state, loop, dt, m_config.gravity);
    } else {
        m_state = integrate_step(model, m_state, m_last.value, ControlMode::Velocity, dt, m_config.gravity);
    }
    ++m_step;
    m_t = static_cast<double>(m_step) * dt;
    check_finite(m_state, m_t);
    return rec;
}

std::map<std::string, double> min_h_by_kind(const BarrierSet& set, const Vec& h)
{
    std::map<std::string, double> out;
    for (int r = 0; r < set.size() && r < h.size(); ++r) {
        const std::string kind(to_string(set.rows()[r].kind));
        auto it = out.find(kind);
        if (it == out.end()) {
            out.emplace(kind, h[r]);
        } else {
            it->second = std::min(it->second, h[r]);
        }
    }
    return out;
}

FrequencyStats frequency_stats(std::vector<double> lat)
{
    FrequencyStats s;
    s.samples = static_cast<int>(lat.size());
    if (lat.empty()) return s;
    const double mean = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
    std::sort(lat.begin(), lat.end());
    const auto pct = [&](double p) {
        const double idx = p * static_cast<double>(lat.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(idx));
        const auto hi = std::min(lo + 1, lat.size() - 1);
        return lat[lo] + (idx - static_cast<double>(lo)) * (lat[hi] - lat[lo]);
    };
    s.mean_hz = mean > 0.0 ? 1.0 / mean : 0.0;
    const double p95 = pct(0.95);
    s.p5_hz = p95 > 0.0 ? 1.0 / p95 : 0.0;
    s.median_step = pct(0.5);
    return s;
}

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options)
{
    RunResult result;
    RunSummary& sum = result.summary;
    sum.name = config.name;
    sum.mode = config.mode;

    Simulation sim(config);
    const BarrierSet& set = sim.controller().barriers();
    for (const auto& r : set.rows()) result.row_labels.push_back(r.label);
    sum.barrier_rows = set.size();
    sum.qp_rows = sim.controller().constraint_count();
    sum.min_h = std::numeric_limits<double>::infinity();

    const long steps = std::lround(config.duration / config.dt);
    double se_pos = 0.0, se_ori = 0.0, se_line = 0.0;
    long n_metric = 0;
    result.latencies.reserve(static_cast<std::size_t>(steps));
    if (options.keep_log) result.log.reserve(static_cast<std::size_t>(steps));
    try {
        for (long k = 0; k < steps; ++k) {
            LogRecord rec = sim.step();
            const SafeCommand& cmd = sim.last_command();
            ++sum.steps;
            sum.min_h = std::min(sum.min_h, rec.min_h);
            const BarrierBatch& batch = sim.controller().last_batch();
            for (int r = 0; r < set.size(); ++r) {
                if (batch.degenerate[r]) continue;
                const std::string kind(to_string(set.rows()[r].kind));
                auto it = sum.min_h_by_kind.find(kind);
                if (it == sum.min_h_by_kind.end()) {
                    sum.min_h_by_kind.emplace(kind, rec.h[r]);
                } else {
                    it->second = std::min(it->second, rec.h[r]);
                }
            }
            sum.max_slack = std::max(sum.max_slack, rec.slack_max);
            sum.emergency_clamps += rec.emergency_clamp ? 1 : 0;
            sum.torque_saturated_steps += rec.torque_saturated ? 1 : 0;
            sum.null_motion += rec.null_deviation * config.dt;
            sum.infeasible_steps += rec.status == QpStatus::Infeasible ? 1 : 0;
            sum.max_iter_steps += rec.status == QpStatus::MaxIters ? 1 : 0;
            sum.degenerate_rows += cmd.row_stats.degenerate;
            if (rec.t >= config.transient) {
                se_pos += rec.position_error * rec.position_error;
                se_ori += rec.orientation_error * rec.orientation_error;
                se_line += rec.line_deviation * rec.line_deviation;
                ++n_metric;
            }
            sum.final_position_error = rec.position_error;
            result.latencies.push_back(rec.latency);
            if (options.keep_log) result.log.push_back(std::move(rec));
        }
    } catch (const SimDiverged& e) {
        sum.diverged = true;
        sum.error = e.what();
    }
    if (n_metric > 0) {
        sum.rms_position_error = std::sqrt(se_pos / static_cast<double>(n_metric));
        sum.rms_orientation_error = std::sqrt(se_ori / static_cast<double>(n_metric));
        sum.rms_line_deviation = std::sqrt(se_line / static_cast<double>(n_metric));
    }
    if (set.size() == 0) sum.min_h = 0.0;
    const FrequencyStats fs = frequency_stats(result.latencies);
    sum.mean_hz = fs.mean_hz;
    sum.p5_hz = fs.p5_hz;
    sum.median_latency = fs.median_step;
    sum.safe = !sum.diverged && (set.size() == 0 || sum.min_h >= -config.safety_tolerance);
    return result;
}

FrequencyStats benchmark(const ScenarioConfig& config, int trials)
{
    if (trials < 2) throw std::invalid_argument("benchmark needs at least 2 trials (the first is discarded)");
    std::vector<double> all;
    int constraints = 0;
    for (int k = 0; k < trials; ++k) {
        RunResult r = run_scenario(config, RunOptions{false});
        constraints = r.summary.barrier_rows;
        if (k == 0) continue;
        all.insert(all.end(), r.latencies.begin(), r.latencies.end());
    }
    FrequencyStats s = frequency_stats(std::move(all));
    s.constraints = constraints;
    return s;
}

}  // namespace oscbf

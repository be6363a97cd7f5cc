#include "oscbf/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>

namespace oscbf {

namespace {

Vec json_vec(const nlohmann::json& j, const char* what)
{
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + " must contain numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Vec3 json_vec3(const nlohmann::json& j, const char* what)
{
    const Vec v = json_vec(j, what);
    if (v.size() != 3) throw ConfigError(std::string(what) + " must have 3 entries");
    return v;
}

// Scalar broadcast or explicit vector of length n.
Vec json_gain(const nlohmann::json& j, int n, const char* what)
{
    if (j.is_number()) return Vec::Constant(n, j.get<double>());
    Vec v = json_vec(j, what);
    if (v.size() != n) throw ConfigError(std::string(what) + " has wrong length");
    return v;
}

Mat3 json_rotation(const nlohmann::json& j)
{
    if (j.contains("rpy")) return rpy_to_rotation(json_vec3(j["rpy"], "rpy"));
    if (j.contains("quaternion")) {
        const Vec qv = json_vec(j["quaternion"], "quaternion");
        if (qv.size() != 4) throw ConfigError("quaternion must be [w, x, y, z]");
        Eigen::Quaterniond q(qv[0], qv[1], qv[2], qv[3]);
        if (std::abs(q.norm() - 1.0) > 1e-6) throw ConfigError("quaternion must be unit-norm");
        return q.toRotationMatrix();
    }
    throw ConfigError("orientation needs rpy or quaternion");
}

std::filesystem::path resolve_robot(const std::filesystem::path& p, const std::filesystem::path& base_dir)
{
    if (p.is_absolute()) return p;
    for (const auto& root : {base_dir, base_dir / "..", data_dir(), std::filesystem::current_path()}) {
        if (root.empty()) continue;
        const auto candidate = root / p;
        if (std::filesystem::exists(candidate)) return std::filesystem::weakly_canonical(candidate);
    }
    return data_dir() / p;
}

}  // namespace

std::filesystem::path data_dir()
{
    if (const char* env = std::getenv("OSCBF_DATA_DIR"); env && *env) return env;
    return OSCBF_DATA_DIR;
}

Obstacle ObstacleSpec::at(double t) const
{
    Obstacle o;
    o.radius = radius;
    o.dynamic = moving();
    if (!moving()) {
        o.center = center;
        return o;
    }
    const double t0 = times.front();
    const double t1 = times.back();
    double tau = t;
    if (periodic && t1 > t0 && t > t0) tau = t0 + std::fmod(t - t0, t1 - t0);
    if (tau <= t0) {
        o.center = points.front();
        return o;
    }
    if (tau >= t1) {
        o.center = points.back();
        return o;
    }
    std::size_t k = 0;
    while (k + 1 < times.size() && times[k + 1] < tau) ++k;
    const double span = times[k + 1] - times[k];
    const double s = (tau - times[k]) / span;
    o.center = points[k] + s * (points[k + 1] - points[k]);
    o.velocity = (points[k + 1] - points[k]) / span;
    return o;
}

SceneSnapshot scene_at(const std::vector<ObstacleSpec>& obstacles, double t)
{
    SceneSnapshot s;
    s.t = t;
    s.obstacles.reserve(obstacles.size());
    for (const auto& o : obstacles) s.obstacles.push_back(o.at(t));
    return s;
}

void ScenarioConfig::validate() const
{
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(duration >= dt)) throw ConfigError("duration must be >= dt");
    if (!(alpha > 0.0) || !(alpha2 > 0.0)) throw ConfigError("alpha gains must be positive");
    if (!(slack_penalty > 0.0)) throw ConfigError("slack_penalty must be positive");
    if (!(torque_limit_scale > 0.0) || !(velocity_limit_scale > 0.0)) throw ConfigError("limit scales must be positive");
    for (const auto& o : obstacles) {
        if (!(o.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
        if (o.times.size() != o.points.size()) throw ConfigError("obstacle waypoint times/points mismatch");
        for (std::size_t k = 1; k < o.times.size(); ++k) {
            if (!(o.times[k] > o.times[k - 1])) throw ConfigError("obstacle waypoint times must increase");
        }
    }
    if (clutter) {
        if (clutter->count < 0) throw ConfigError("clutter count must be >= 0");
        if (!(clutter->radius_min > 0.0) || clutter->radius_max < clutter->radius_min) {
            throw ConfigError("clutter radii must satisfy 0 < min <= max");
        }
        if (!(clutter->box_min.array() < clutter->box_max.array()).all()) throw ConfigError("clutter box min < max");
    }
    if (reference.kind == ReferenceKind::PeriodicLine && !(reference.period > 0.0)) {
        throw ConfigError("periodic line needs a positive period");
    }
    if (rows.prune_k < 0) throw ConfigError("pruning k must be >= 0");
    if (velocity_tracking && !(velocity_tracking->kv > 0.0)) throw ConfigError("velocity_tracking.kv must be > 0");
}

ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    try {
        ScenarioConfig c;
        c.source = doc;
        c.name = doc.value("name", std::string("scenario"));
        c.robot = resolve_robot(doc.at("robot").get<std::string>(), base_dir);
        c.mode = control_mode_from_string(doc.value("mode", std::string("velocity")));
        c.duration = doc.value("duration", 1.0);
        c.dt = doc.value("dt", 1e-3);
        if (doc.contains("gravity")) c.gravity = json_vec3(doc["gravity"], "gravity");
        c.seed = doc.value("seed", std::uint64_t{0});
        if (doc.contains("initial_q")) c.initial_q = json_vec(doc["initial_q"], "initial_q");
        if (doc.contains("initial_qd")) c.initial_qd = json_vec(doc["initial_qd"], "initial_qd");
        c.alpha = doc.value("alpha", kDefaultAlpha);
        c.alpha2 = doc.value("alpha2", c.alpha);
        c.slack_penalty = doc.value("slack_penalty", kDefaultSlackPenalty);
        c.objective = objective_kind_from_string(doc.value("objective", std::string("oscbf")));
        c.torque_limit_scale = doc.value("torque_limit_scale", 1.0);
        c.velocity_limit_scale = doc.value("velocity_limit_scale", 1.0);
        c.transient = doc.value("transient", 0.0);
        c.safety_tolerance = doc.value("safety_tolerance", 1e-3);
        if (doc.contains("log_rows")) c.log_rows = doc["log_rows"].get<bool>();

        if (doc.contains("gains")) {
            if (!doc["gains"].is_object()) throw ConfigError("gains must be an object");
            c.gains_doc = doc["gains"];
        }

        for (const auto& b : doc.value("barriers", nlohmann::json::array())) {
            c.barriers.push_back(barrier_spec_from_json(b, c.alpha, c.alpha2));
        }
        for (const auto& o : doc.value("obstacles", nlohmann::json::array())) {
            ObstacleSpec spec;
            spec.radius = o.at("radius").get<double>();
            if (o.contains("center")) spec.center = json_vec3(o["center"], "obstacle center");
            for (const auto& w : o.value("waypoints", nlohmann::json::array())) {
                spec.times.push_back(w.at("t").get<double>());
                spec.points.push_back(json_vec3(w.at("position"), "obstacle waypoint"));
            }
            if (!spec.points.empty() && !o.contains("center")) spec.center = spec.points.front();
            spec.periodic = o.value("periodic", false);
            c.obstacles.push_back(std::move(spec));
        }
        if (doc.contains("clutter")) {
            const auto& j = doc["clutter"];
            ClutterSpec cl;
            cl.count = j.value("count", 0);
            if (j.contains("min")) cl.box_min = json_vec3(j["min"], "clutter min");
            if (j.contains("max")) cl.box_max = json_vec3(j["max"], "clutter max");
            cl.radius_min = j.value("radius_min", cl.radius_min);
            cl.radius_max = j.value("radius_max", cl.radius_max);
            cl.clearance = j.value("clearance", cl.clearance);
            cl.max_attempts = j.value("max_attempts", cl.max_attempts);
            c.clutter = cl;
        }
        if (doc.contains("reference")) {
            const auto& r = doc["reference"];
            const std::string kind = r.value("kind", std::string("hold"));
            ReferenceSpec& ref = c.reference;
            if (kind == "hold") {
                ref.kind = ReferenceKind::Hold;
            } else if (kind == "waypoints" || kind == "sweep") {
                ref.kind = ReferenceKind::Waypoints;
            } else if (kind == "periodic_line") {
                ref.kind = ReferenceKind::PeriodicLine;
            } else if (kind == "teleop") {
                ref.kind = ReferenceKind::Teleop;
            } else {
                throw ConfigError("unknown reference kind '" + kind + "'");
            }
            ref.interpolate = r.value("interpolate", true);
            ref.jitter = r.value("jitter", 0.0);
            for (const auto& w : r.value("waypoints", nlohmann::json::array())) {
                Waypoint wp;
                wp.t = w.at("t").get<double>();
                wp.position = json_vec3(w.at("position"), "waypoint position");
                if (w.contains("rpy") || w.contains("quaternion")) wp.rotation = json_rotation(w);
                ref.waypoints.push_back(wp);
            }
            for (std::size_t k = 1; k < ref.waypoints.size(); ++k) {
                if (!(ref.waypoints[k].t > ref.waypoints[k - 1].t)) throw ConfigError("waypoint times must increase");
            }
            if (ref.kind == ReferenceKind::Waypoints && ref.waypoints.empty()) {
                throw ConfigError("waypoint reference needs at least one waypoint");
            }
            if (r.contains("start")) ref.line_start = json_vec3(r["start"], "line start");
            if (r.contains("end")) ref.line_end = json_vec3(r["end"], "line end");
            ref.period = r.value("period", ref.period);
            if (r.contains("q_des")) ref.q_des = json_vec(r["q_des"], "q_des");
        }
        if (doc.contains("pruning")) c.rows.prune_k = doc["pruning"].value("k", 0);
        c.rows.hocbf_enabled = doc.value("hocbf", true);
        if (doc.contains("wrench_limit")) {
            WrenchLimits w;
            w.F_min = json_vec(doc["wrench_limit"].at("min"), "wrench min");
            w.F_max = json_vec(doc["wrench_limit"].at("max"), "wrench max");
            c.wrench = w;
        }
        if (doc.contains("velocity_tracking")) {
            VelocityTracking vt;
            vt.kv = doc["velocity_tracking"].value("kv", vt.kv);
            c.velocity_tracking = vt;
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

void apply_override(nlohmann::json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    // Numeric parts index into existing arrays.
    const auto index_of = [&](const nlohmann::json& arr, const std::string& part) {
        if (part.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("override path expects an array index: " + key);
        }
        const std::size_t i = std::stoul(part);
        if (i >= arr.size()) throw ConfigError("override index out of range: " + key);
        return i;
    };
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("bad override key: " + key);
        nlohmann::json* next = nullptr;
        if (node->is_array()) {
            next = &(*node)[index_of(*node, part)];
        } else if (dot == std::string::npos || node->contains(part)) {
            next = &(*node)[part];
        } else {
            next = &((*node)[part] = nlohmann::json::object());
        }
        if (dot == std::string::npos) {
            *next = value;
            break;
        }
        node = next;
        if (!node->is_object() && !node->is_array()) throw ConfigError("override path is not an object: " + key);
        start = dot + 1;
    }
}

ScenarioConfig load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("scenario is not valid JSON: " + path.string());
    for (const auto& o : overrides) apply_override(doc, o);
    return scenario_from_json(doc, path.parent_path());
}

Gains scenario_gains(const ScenarioConfig& config, int dof)
{
    Gains g = Gains::defaults(dof, config.mode);
    const auto& j = config.gains_doc;
    if (j.is_null()) return g;
    for (const auto& [key, value] : j.items()) {
        if (key == "K_po") g.K_po = json_gain(value, 6, "K_po");
        else if (key == "K_do") g.K_do = json_gain(value, 6, "K_do");
        else if (key == "W_o") g.W_o = json_gain(value, 6, "W_o");
        else if (key == "K_pj") g.K_pj = json_gain(value, dof, "K_pj");
        else if (key == "K_dj") g.K_dj = json_gain(value, dof, "K_dj");
        else if (key == "W_j") g.W_j = json_gain(value, dof, "W_j");
        else throw ConfigError("unknown gain '" + key + "'");
    }
    g.validate(dof);
    return g;
}

RobotModel scenario_model(const ScenarioConfig& config)
{
    RobotModel base = load_robot_model(config.robot);
    if (config.torque_limit_scale == 1.0 && config.velocity_limit_scale == 1.0) return base;
    nlohmann::json j = base.to_json();
    auto scale = [](nlohmann::json& arr, double s) {
        for (auto& v : arr) v = v.get<double>() * s;
    };
    scale(j["limits"]["tau_min"], config.torque_limit_scale);
    scale(j["limits"]["tau_max"], config.torque_limit_scale);
    scale(j["limits"]["qd_min"], config.velocity_limit_scale);
    scale(j["limits"]["qd_max"], config.velocity_limit_scale);
    return robot_model_from_json(j);
}

Vec scenario_initial_q(const ScenarioConfig& config, const RobotModel& model)
{
    if (config.initial_q) {
        require_dim(config.initial_q->size(), model.dof(), "initial_q");
        return *config.initial_q;
    }
    return 0.5 * (model.limits().q_min + model.limits().q_max);
}

std::vector<ObstacleSpec> scenario_obstacles(const ScenarioConfig& config, const RobotModel& model, const Vec& q0)
{
    std::vector<ObstacleSpec> out = config.obstacles;
    if (!config.clutter || config.clutter->count == 0) return out;

    const ClutterSpec& cl = *config.clutter;
    const auto fk = forward_kinematics(model, q0);
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int placed = 0;
    for (int attempt = 0; attempt < cl.max_attempts && placed < cl.count; ++attempt) {
        ObstacleSpec o;
        for (int k = 0; k < 3; ++k) o.center[k] = cl.box_min[k] + unit(rng) * (cl.box_max[k] - cl.box_min[k]);
        o.radius = cl.radius_min + unit(rng) * (cl.radius_max - cl.radius_min);
        bool ok = true;
        for (std::size_t s = 0; s < model.spheres().size() && ok; ++s) {
            const double gap = (fk.sphere_centers[s] - o.center).norm() - model.spheres()[s].radius - o.radius;
            ok = gap > cl.clearance;
        }
        if (!ok) continue;
        out.push_back(o);
        ++placed;
    }
    if (placed < cl.count) {
        throw ConfigError("clutter: could only place " + std::to_string(placed) + " of " +
                          std::to_string(cl.count) + " obstacles");
    }
    return out;
}

// --------------------------------------------------------------------------

Reference::Reference(const ScenarioConfig& config, const RobotModel& model, const Vec& q0)
    : m_spec(config.reference), m_hold(TaskTarget::hold(model, q0))
{
    if (m_spec.q_des) {
        require_dim(m_spec.q_des->size(), model.dof(), "reference q_des");
        m_hold.q_des = *m_spec.q_des;
    }
    m_points = m_spec.waypoints;
    if (m_spec.jitter > 0.0) {
        std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<double> u(-m_spec.jitter, m_spec.jitter);
        for (auto& w : m_points) {
            for (int k = 0; k < 3; ++k) w.position[k] += u(rng);
        }
    }
}

TaskTarget Reference::at(double t) const
{
    TaskTarget target = m_hold;
    switch (m_spec.kind) {
    case ReferenceKind::Hold:
    case ReferenceKind::Teleop:
        break;
    case ReferenceKind::Waypoints: {
        const auto rot = [&](const Waypoint& w) { return w.rotation ? *w.rotation : m_hold.rotation; };
        if (t < m_points.front().t) break;
        if (t >= m_points.back().t) {
            target.position = m_points.back().position;
            target.rotation = rot(m_points.back());
            break;
        }
        std::size_t k = 0;
        while (k + 1 < m_points.size() && m_points[k + 1].t <= t) ++k;
        const Waypoint& a = m_points[k];
        const Waypoint& b = m_points[k + 1];
        if (!m_spec.interpolate) {
            target.position = a.position;
            target.rotation = rot(a);
            break;
        }
        const double s = (t - a.t) / (b.t - a.t);
        target.position = a.position + s * (b.position - a.position);
        const Eigen::Quaterniond qa(rot(a));
        const Eigen::Quaterniond qb(rot(b));
        target.rotation = qa.slerp(s, qb).normalized().toRotationMatrix();
        break;
    }
    case ReferenceKind::PeriodicLine: {
        const double w = 2.0 * std::numbers::pi / m_spec.period;
        const Vec3 d = m_spec.line_end - m_spec.line_start;
        target.position = m_spec.line_start + 0.5 * (1.0 - std::cos(w * t)) * d;
        target.twist.head<3>() = 0.5 * w * std::sin(w * t) * d;
        target.twist_rate.head<3>() = 0.5 * w * w * std::cos(w * t) * d;
        break;
    }
    }
    return target;
}

double Reference::line_deviation(const Vec3& p) const
{
    const Vec3 d = m_spec.line_end - m_spec.line_start;
    const double len = d.norm();
    if (len == 0.0) return (p - m_spec.line_start).norm();
    const Vec3 u = d / len;
    const Vec3 r = p - m_spec.line_start;
    return (r - r.dot(u) * u).norm();
}

}  // namespace oscbf

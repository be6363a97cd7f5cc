#include <cmath>

#include "oscbf/teleop.hpp"

namespace oscbf::teleop {

namespace {

using nlohmann::json;

json vec_json(const Eigen::Ref<const Vec>& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json quat_json(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Vec read_vec(const json& j, const char* what, int n)
{
    if (!j.is_array() || (n >= 0 && static_cast<int>(j.size()) != n)) {
        throw WireError(std::string(what) + ": expected an array of " + std::to_string(n) + " numbers");
    }
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw WireError(std::string(what) + ": non-numeric entry");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    if (!v.allFinite()) throw WireError(std::string(what) + ": non-finite entry");
    return v;
}

Eigen::Quaterniond read_quat(const json& j)
{
    const Vec v = read_vec(j, "quaternion", 4);
    if (std::abs(v.norm() - 1.0) > 1e-6) throw WireError("quaternion: not unit norm");
    return Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
}

void check_header(const json& doc, const char* type)
{
    if (!doc.is_object()) throw WireError("message is not a JSON object");
    if (!doc.contains("v") || !doc["v"].is_number_integer() || doc["v"].get<int>() != kWireVersion) {
        throw WireError("unsupported or missing protocol version");
    }
    if (doc.value("type", std::string()) != type) throw WireError(std::string("expected type '") + type + "'");
}

}  // namespace

json to_json(const WireStateFrame& f)
{
    json by_kind = json::object();
    for (const auto& [k, v] : f.min_h_by_kind) by_kind[k] = v;
    json obstacles = json::array();
    for (const auto& c : f.obstacle_centers) obstacles.push_back(vec_json(c));
    return {{"v", kWireVersion},
            {"type", "state"},
            {"t", f.t},
            {"q", vec_json(f.q)},
            {"ee", {{"position", vec_json(f.position)}, {"quaternion", quat_json(f.orientation)}}},
            {"target", {{"position", vec_json(f.target_position)}}},
            {"min_h", by_kind},
            {"min_h_all", f.min_h},
            {"slack_max", f.slack_max},
            {"mode", std::string(to_string(f.mode))},
            {"status", std::string(to_string(f.status))},
            {"ack", f.command_seq},
            {"obstacles", obstacles}};
}

WireStateFrame state_frame_from_json(const json& doc)
{
    check_header(doc, "state");
    try {
        WireStateFrame f;
        f.t = doc.at("t").get<double>();
        f.q = read_vec(doc.at("q"), "q", -1);
        f.position = read_vec(doc.at("ee").at("position"), "ee.position", 3);
        f.orientation = read_quat(doc.at("ee").at("quaternion"));
        f.target_position = read_vec(doc.at("target").at("position"), "target.position", 3);
        for (const auto& [k, v] : doc.at("min_h").items()) f.min_h_by_kind[k] = v.get<double>();
        f.min_h = doc.at("min_h_all").get<double>();
        f.slack_max = doc.at("slack_max").get<double>();
        f.mode = control_mode_from_string(doc.at("mode").get<std::string>());
        const std::string status = doc.at("status").get<std::string>();
        for (QpStatus s : {QpStatus::Optimal, QpStatus::MaxIters, QpStatus::Infeasible}) {
            if (to_string(s) == status) f.status = s;
        }
        f.command_seq = doc.at("ack").get<std::uint64_t>();
        for (const auto& c : doc.at("obstacles")) f.obstacle_centers.push_back(read_vec(c, "obstacle", 3));
        return f;
    } catch (const json::exception& e) {
        throw WireError(std::string("state frame: ") + e.what());
    }
}

json to_json(const WireCommand& c)
{
    json j = {{"v", kWireVersion},
              {"type", "target"},
              {"position", vec_json(c.position)},
              {"quaternion", quat_json(c.orientation)},
              {"t", c.client_time},
              {"seq", c.seq}};
    if (c.q_des) j["q_des"] = vec_json(*c.q_des);
    return j;
}

WireCommand parse_command(const std::string& text, int dof)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw WireError(std::string("malformed JSON: ") + e.what());
    }
    check_header(doc, "target");
    WireCommand c;
    if (!doc.contains("position")) throw WireError("position: missing");
    c.position = read_vec(doc["position"], "position", 3);
    if (doc.contains("quaternion")) c.orientation = read_quat(doc["quaternion"]);
    if (doc.contains("q_des") && !doc["q_des"].is_null()) c.q_des = read_vec(doc["q_des"], "q_des", dof);
    if (doc.contains("t")) {
        if (!doc["t"].is_number()) throw WireError("t: expected a number");
        c.client_time = doc["t"].get<double>();
    }
    if (doc.contains("seq")) {
        if (!doc["seq"].is_number_unsigned() && !doc["seq"].is_number_integer()) throw WireError("seq: expected an integer");
        c.seq = doc["seq"].get<std::uint64_t>();
    }
    return c;
}

json error_message(const std::string& reason) { return {{"v", kWireVersion}, {"type", "error"}, {"message", reason}}; }

json hello_message(const Simulation& sim)
{
    json obstacles = json::array();
    for (const auto& o : sim.scene().obstacles) {
        obstacles.push_back({{"center", vec_json(o.center)}, {"radius", o.radius}, {"moving", o.dynamic}});
    }
    json barriers = json::array();
    for (const auto& s : sim.controller().barriers().specs()) barriers.push_back(oscbf::to_json(s));
    return {{"v", kWireVersion},
            {"type", "hello"},
            {"scenario", sim.config().name},
            {"mode", std::string(to_string(sim.config().mode))},
            {"dt", sim.config().dt},
            {"robot", sim.model().to_json()},
            {"obstacles", obstacles},
            {"barriers", barriers}};
}

WireStateFrame make_frame(const Simulation& sim, const LogRecord& rec, std::uint64_t command_seq)
{
    WireStateFrame f;
    f.t = rec.t;
    f.q = rec.q;
    f.position = rec.ee_position;
    f.orientation = rec.ee_orientation.normalized();
    f.target_position = rec.target_position;
    f.min_h = rec.min_h;
    f.slack_max = rec.slack_max;
    f.mode = sim.config().mode;
    f.status = rec.status;
    f.command_seq = command_seq;
    const BarrierSet& set = sim.controller().barriers();
    const BarrierBatch& batch = sim.controller().last_batch();
    for (int r = 0; r < set.size(); ++r) {
        if (batch.degenerate[r]) continue;
        const std::string kind(to_string(set.rows()[r].kind));
        auto it = f.min_h_by_kind.find(kind);
        if (it == f.min_h_by_kind.end()) {
            f.min_h_by_kind.emplace(kind, rec.h[r]);
        } else {
            it->second = std::min(it->second, rec.h[r]);
        }
    }
    for (const auto& o : sim.scene().obstacles) f.obstacle_centers.push_back(o.center);
    return f;
}

}  // namespace oscbf::teleop

#include "oscbf/robot_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace oscbf {

namespace {

using json = nlohmann::json;

Vec3 vec3_from(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) {
        throw ModelError(std::string(what) + ": expected a 3-vector");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec vec_from(const json& j, int n, const char* what)
{
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
        throw ModelError(std::string(what) + ": expected " + std::to_string(n) + " entries");
    }
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
    return v;
}

Pose pose_from(const json& j)
{
    Pose T = Pose::Identity();
    if (j.is_null()) return T;
    if (j.contains("xyz")) T.translation() = vec3_from(j["xyz"], "xyz");
    if (j.contains("rpy")) {
        T.linear() = rpy_to_rotation(vec3_from(j["rpy"], "rpy"));
    } else if (j.contains("quaternion")) {
        const auto& q = j["quaternion"];
        if (!q.is_array() || q.size() != 4) throw ModelError("quaternion: expected [w, x, y, z]");
        Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                q[3].get<double>());
        T.linear() = quat.normalized().toRotationMatrix();
    }
    return T;
}

json pose_to_json(const Pose& T)
{
    const Vec3 p = T.translation();
    const Vec3 rpy = rotation_to_rpy(T.rotation());
    return {{"xyz", {p.x(), p.y(), p.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
}

json vec_to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

bool is_spd(const Mat3& I)
{
    if (!I.isApprox(I.transpose(), 1e-12)) return false;
    Eigen::SelfAdjointEigenSolver<Mat3> es(I);
    return es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

Mat3 rpy_to_rotation(const Vec3& rpy)
{
    return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
        .toRotationMatrix();
}

Vec3 rotation_to_rpy(const Mat3& R)
{
    const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    double roll, yaw;
    if (std::abs(std::cos(pitch)) > 1e-9) {
        roll = std::atan2(R(2, 1), R(2, 2));
        yaw = std::atan2(R(1, 0), R(0, 0));
    } else {
        roll = 0.0;
        yaw = std::atan2(-R(0, 1), R(1, 1));
    }
    return {roll, pitch, yaw};
}

RobotModel::RobotModel(std::string name,
                       std::vector<JointSpec> joints,
                       std::vector<LinkInertial> links,
                       std::vector<CollisionSphere> spheres,
                       std::vector<std::pair<int, int>> self_collision_pairs,
                       JointLimits limits,
                       Pose ee_frame,
                       std::vector<int> task_axes)
    : m_name(std::move(name)),
      m_joints(std::move(joints)),
      m_links(std::move(links)),
      m_spheres(std::move(spheres)),
      m_pairs(std::move(self_collision_pairs)),
      m_limits(std::move(limits)),
      m_ee(ee_frame),
      m_task_axes(std::move(task_axes))
{
    validate();
}

void RobotModel::validate() const
{
    const int n = dof();
    if (n == 0) throw ModelError("robot model has no joints");
    if (static_cast<int>(m_links.size()) != n) throw ModelError("one link inertial per joint required");
    for (const auto& j : m_joints) {
        if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw ModelError("joint axis must have unit norm");
        if (!j.origin.linear().isUnitary(1e-9)) throw ModelError("joint origin rotation not orthonormal");
    }
    for (const auto& l : m_links) {
        if (!(l.mass > 0.0)) throw ModelError("link mass must be positive");
        if (!is_spd(l.inertia)) throw ModelError("link inertia must be symmetric positive-definite");
    }
    for (const auto& s : m_spheres) {
        if (s.link < 0 || s.link >= n) throw ModelError("collision sphere references an invalid link");
        if (!(s.radius > 0.0)) throw ModelError("collision sphere radius must be positive");
    }
    const int ns = static_cast<int>(m_spheres.size());
    for (const auto& [a, b] : m_pairs) {
        if (a < 0 || b < 0 || a >= ns || b >= ns) throw ModelError("self-collision pair index out of range");
        const int la = m_spheres[a].link, lb = m_spheres[b].link;
        if (std::abs(la - lb) <= 1) throw ModelError("self-collision pair on the same or adjacent links");
    }
    const auto& L = m_limits;
    for (const Vec* v : {&L.q_min, &L.q_max, &L.qd_min, &L.qd_max, &L.tau_min, &L.tau_max}) {
        if (v->size() != n) throw ModelError("joint limit vectors must have one entry per joint");
    }
    if (!(L.q_min.array() < L.q_max.array()).all()) throw ModelError("q_min < q_max violated");
    if (!(L.qd_min.array() <= 0.0).all() || !(L.qd_max.array() >= 0.0).all()) {
        throw ModelError("velocity limit interval must contain 0");
    }
    if (!(L.tau_min.array() <= 0.0).all() || !(L.tau_max.array() >= 0.0).all()) {
        throw ModelError("torque limit interval must contain 0");
    }
    if (m_task_axes.empty() || m_task_axes.size() > 6) throw ModelError("task_axes must select 1..6 rows");
    std::set<int> seen;
    for (int a : m_task_axes) {
        if (a < 0 || a > 5 || !seen.insert(a).second) throw ModelError("task_axes entries must be distinct in 0..5");
    }
}

Mat RobotModel::select_task_rows(const Mat& six_by_k) const
{
    Mat out(task_dim(), six_by_k.cols());
    for (int i = 0; i < task_dim(); ++i) out.row(i) = six_by_k.row(m_task_axes[i]);
    return out;
}

Vec RobotModel::select_task_rows(const Vec6& v) const
{
    Vec out(task_dim());
    for (int i = 0; i < task_dim(); ++i) out[i] = v[m_task_axes[i]];
    return out;
}

nlohmann::json RobotModel::to_json() const
{
    json doc;
    doc["name"] = m_name;
    json joints = json::array();
    for (const auto& j : m_joints) {
        joints.push_back({{"type", j.type == JointType::Revolute ? "revolute" : "prismatic"},
                          {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                          {"origin", pose_to_json(j.origin)}});
    }
    doc["joints"] = joints;
    json links = json::array();
    for (const auto& l : m_links) {
        const Mat3& I = l.inertia;
        links.push_back({{"mass", l.mass},
                         {"com", {l.com.x(), l.com.y(), l.com.z()}},
                         {"inertia", {I(0, 0), I(0, 1), I(0, 2), I(1, 1), I(1, 2), I(2, 2)}}});
    }
    doc["links"] = links;
    json spheres = json::array();
    for (const auto& s : m_spheres) {
        spheres.push_back({{"link", s.link}, {"center", {s.center.x(), s.center.y(), s.center.z()}}, {"radius", s.radius}});
    }
    doc["collision_spheres"] = spheres;
    json pairs = json::array();
    for (const auto& [a, b] : m_pairs) pairs.push_back({a, b});
    doc["self_collision_pairs"] = pairs;
    doc["limits"] = {{"q_min", vec_to_json(m_limits.q_min)},   {"q_max", vec_to_json(m_limits.q_max)},
                     {"qd_min", vec_to_json(m_limits.qd_min)}, {"qd_max", vec_to_json(m_limits.qd_max)},
                     {"tau_min", vec_to_json(m_limits.tau_min)}, {"tau_max", vec_to_json(m_limits.tau_max)}};
    doc["ee_frame"] = pose_to_json(m_ee);
    doc["task_axes"] = m_task_axes;
    return doc;
}

RobotModel robot_model_from_json(const nlohmann::json& doc)
{
    try {
        std::vector<JointSpec> joints;
        for (const auto& j : doc.at("joints")) {
            JointSpec spec;
            const std::string type = j.value("type", "revolute");
            if (type == "revolute") {
                spec.type = JointType::Revolute;
            } else if (type == "prismatic") {
                spec.type = JointType::Prismatic;
            } else {
                throw ModelError("unknown joint type '" + type + "'");
            }
            spec.axis = j.contains("axis") ? vec3_from(j["axis"], "axis") : Vec3::UnitZ();
            spec.origin = pose_from(j.value("origin", json{}));
            joints.push_back(spec);
        }
        const int n = static_cast<int>(joints.size());

        std::vector<LinkInertial> links;
        for (const auto& l : doc.at("links")) {
            LinkInertial li;
            li.mass = l.at("mass").get<double>();
            li.com = vec3_from(l.at("com"), "com");
            const auto& I = l.at("inertia");
            if (!I.is_array() || I.size() != 6) throw ModelError("inertia: expected [ixx, ixy, ixz, iyy, iyz, izz]");
            li.inertia << I[0].get<double>(), I[1].get<double>(), I[2].get<double>(),
                          I[1].get<double>(), I[3].get<double>(), I[4].get<double>(),
                          I[2].get<double>(), I[4].get<double>(), I[5].get<double>();
            links.push_back(li);
        }

        std::vector<CollisionSphere> spheres;
        for (const auto& s : doc.value("collision_spheres", json::array())) {
            spheres.push_back({s.at("link").get<int>(), vec3_from(s.at("center"), "center"), s.at("radius").get<double>()});
        }
        std::vector<std::pair<int, int>> pairs;
        for (const auto& p : doc.value("self_collision_pairs", json::array())) {
            pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        }

        const auto& lim = doc.at("limits");
        JointLimits limits;
        limits.q_min = vec_from(lim.at("q_min"), n, "q_min");
        limits.q_max = vec_from(lim.at("q_max"), n, "q_max");
        limits.qd_min = vec_from(lim.at("qd_min"), n, "qd_min");
        limits.qd_max = vec_from(lim.at("qd_max"), n, "qd_max");
        limits.tau_min = vec_from(lim.at("tau_min"), n, "tau_min");
        limits.tau_max = vec_from(lim.at("tau_max"), n, "tau_max");

        std::vector<int> axes = doc.value("task_axes", std::vector<int>{0, 1, 2, 3, 4, 5});
        return RobotModel(doc.value("name", "robot"), std::move(joints), std::move(links), std::move(spheres),
                          std::move(pairs), std::move(limits), pose_from(doc.value("ee_frame", json{})),
                          std::move(axes));
    } catch (const json::exception& e) {
        throw ModelError(std::string("robot description: ") + e.what());
    }
}

RobotModel load_robot_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open robot description " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(path.string() + ": " + e.what());
    }
    return robot_model_from_json(doc);
}

void check_state(const RobotModel& model, const RobotState& state)
{
    require_dim(state.q.size(), model.dof(), "q");
    require_dim(state.qd.size(), model.dof(), "qd");
}

}  // namespace oscbf

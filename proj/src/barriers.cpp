#include "oscbf/barriers.hpp"

#include <cmath>
#include <stdexcept>

namespace oscbf {

namespace {

constexpr double kDegenerateDistance = 1e-9;

struct KindName {
    BarrierKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {BarrierKind::JointPositionLimit, "joint_position_limit"},
    {BarrierKind::JointVelocityLimit, "joint_velocity_limit"},
    {BarrierKind::OpPositionBox, "op_position_box"},
    {BarrierKind::OpVelocityLimit, "op_velocity_limit"},
    {BarrierKind::Singularity, "singularity"},
    {BarrierKind::CollisionPair, "collision_pair"},
    {BarrierKind::WholeBodyBox, "whole_body_box"},
    {BarrierKind::SelfCollisionPair, "self_collision_pair"},
    {BarrierKind::DynamicObstacle, "dynamic_obstacle"},
};

constexpr const char* kFaceNames[6] = {"min_x", "min_y", "min_z", "max_x", "max_y", "max_z"};

Vec json_vec(const nlohmann::json& j, const char* what)
{
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Vec3 json_vec3(const nlohmann::json& j, const char* what)
{
    const Vec v = json_vec(j, what);
    if (v.size() != 3) throw ConfigError(std::string(what) + " must have 3 entries");
    return v;
}

std::string row_label(BarrierKind kind, const std::string& detail)
{
    std::string s(to_string(kind));
    s += '[';
    s += detail;
    s += ']';
    return s;
}

}  // namespace

std::string_view to_string(BarrierKind kind)
{
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "unknown";
}

BarrierKind barrier_kind_from_string(std::string_view name)
{
    for (const auto& k : kKindNames) {
        if (name == k.name) return k.kind;
    }
    throw ConfigError("unknown barrier kind '" + std::string(name) + "'");
}

bool is_velocity_barrier(BarrierKind kind)
{
    return kind == BarrierKind::JointVelocityLimit || kind == BarrierKind::OpVelocityLimit ||
           kind == BarrierKind::DynamicObstacle;
}

RowRole row_role(BarrierKind kind, PlantModel plant)
{
    if (plant == PlantModel::Kinematic) {
        if (kind == BarrierKind::JointVelocityLimit || kind == BarrierKind::OpVelocityLimit) {
            return RowRole::InputConstraint;
        }
        // The dynamic obstacle treats the measured qd as exogenous here.
        return RowRole::Rd1;
    }
    return is_velocity_barrier(kind) ? RowRole::Rd1 : RowRole::Rd2;
}

void BarrierSpec::validate() const
{
    if (!(alpha > 0.0) || !(alpha2 > 0.0)) throw ConfigError("barrier gains must be positive");
    if (!std::isfinite(alpha) || !std::isfinite(alpha2)) throw ConfigError("barrier gains must be finite");
    if (kind == BarrierKind::OpPositionBox || kind == BarrierKind::WholeBodyBox) {
        if (!(box_min.array() < box_max.array()).all()) throw ConfigError("box min must be < max elementwise");
    }
    if (kind == BarrierKind::Singularity && !(epsilon > 0.0)) throw ConfigError("singularity epsilon must be > 0");
    if (kind == BarrierKind::DynamicObstacle && !(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    if (lower.has_value() != upper.has_value()) throw ConfigError("lower and upper limits must be given together");
    if (lower) {
        if (lower->size() != upper->size()) throw ConfigError("lower/upper size mismatch");
        if (!(lower->array() < upper->array()).all()) throw ConfigError("lower limits must be < upper limits");
    }
    if (kind == BarrierKind::OpVelocityLimit && !lower) throw ConfigError("op_velocity_limit needs lower/upper");
}

BarrierSpec barrier_spec_from_json(const nlohmann::json& j, double default_alpha, double default_alpha2)
{
    try {
        BarrierSpec s;
        s.kind = barrier_kind_from_string(j.at("kind").get<std::string>());
        s.alpha = j.value("alpha", default_alpha);
        s.alpha2 = j.value("alpha2", default_alpha2);
        s.id = j.value("id", std::string(to_string(s.kind)));
        if (j.contains("lower")) s.lower = json_vec(j["lower"], "lower");
        if (j.contains("upper")) s.upper = json_vec(j["upper"], "upper");
        if (j.contains("min")) s.box_min = json_vec3(j["min"], "min");
        if (j.contains("max")) s.box_max = json_vec3(j["max"], "max");
        if (j.contains("faces")) {
            s.faces.fill(false);
            for (const auto& f : j["faces"]) {
                const auto name = f.get<std::string>();
                bool found = false;
                for (int k = 0; k < 6; ++k) {
                    if (name == kFaceNames[k]) s.faces[k] = found = true;
                }
                if (!found) throw ConfigError("unknown box face '" + name + "'");
            }
        }
        s.epsilon = j.value("epsilon", kDefaultSingularityEpsilon);
        s.gamma = j.value("gamma", kDefaultGamma);
        if (j.contains("spheres")) s.spheres = j["spheres"].get<std::vector<int>>();
        if (j.contains("obstacles")) s.obstacles = j["obstacles"].get<std::vector<int>>();
        if (j.contains("pairs")) s.pairs = j["pairs"].get<std::vector<std::pair<int, int>>>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("barrier spec: ") + e.what());
    }
}

nlohmann::json to_json(const BarrierSpec& s)
{
    nlohmann::json j;
    j["kind"] = std::string(to_string(s.kind));
    j["id"] = s.id;
    j["alpha"] = s.alpha;
    j["alpha2"] = s.alpha2;
    if (s.lower) j["lower"] = std::vector<double>(s.lower->data(), s.lower->data() + s.lower->size());
    if (s.upper) j["upper"] = std::vector<double>(s.upper->data(), s.upper->data() + s.upper->size());
    if (s.kind == BarrierKind::OpPositionBox || s.kind == BarrierKind::WholeBodyBox) {
        j["min"] = {s.box_min.x(), s.box_min.y(), s.box_min.z()};
        j["max"] = {s.box_max.x(), s.box_max.y(), s.box_max.z()};
        auto faces = nlohmann::json::array();
        for (int k = 0; k < 6; ++k) {
            if (s.faces[k]) faces.push_back(kFaceNames[k]);
        }
        j["faces"] = faces;
    }
    if (s.kind == BarrierKind::Singularity) j["epsilon"] = s.epsilon;
    if (s.kind == BarrierKind::DynamicObstacle) j["gamma"] = s.gamma;
    if (!s.spheres.empty()) j["spheres"] = s.spheres;
    if (!s.obstacles.empty()) j["obstacles"] = s.obstacles;
    if (!s.pairs.empty()) j["pairs"] = s.pairs;
    return j;
}

SceneSnapshot SceneSnapshot::advanced(double dt) const
{
    SceneSnapshot out = *this;
    out.t += dt;
    for (auto& o : out.obstacles) o.center += dt * o.velocity;
    return out;
}

double manipulability(const Mat& J)
{
    if (J.rows() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(J);
    return svd.singularValues().prod();
}

double manipulability(const RobotModel& model, const Vec& q)
{
    return manipulability(model.select_task_rows(Mat(jacobian(model, q))));
}

// --------------------------------------------------------------------------
// BarrierSet

BarrierSet::BarrierSet(const RobotModel& model, std::vector<BarrierSpec> specs, const SceneSnapshot& scene)
    : m_model(&model), m_specs(std::move(specs))
{
    const int n = model.dof();
    const int n_spheres = static_cast<int>(model.spheres().size());
    const int n_obs = static_cast<int>(scene.obstacles.size());
    const auto check_sphere = [&](int s) {
        if (s < 0 || s >= n_spheres) throw ConfigError("sphere index out of range: " + std::to_string(s));
    };
    const auto check_obstacle = [&](int o) {
        if (o < 0 || o >= n_obs) throw ConfigError("obstacle index out of range: " + std::to_string(o));
    };
    const auto all_spheres = [&](const BarrierSpec& s) {
        std::vector<int> out = s.spheres;
        if (out.empty()) {
            for (int i = 0; i < n_spheres; ++i) out.push_back(i);
        }
        for (int i : out) check_sphere(i);
        return out;
    };

    for (int si = 0; si < static_cast<int>(m_specs.size()); ++si) {
        const BarrierSpec& s = m_specs[si];
        s.validate();
        const auto add = [&](BarrierRowInfo info) {
            info.spec = si;
            info.kind = s.kind;
            m_rows.push_back(std::move(info));
        };
        switch (s.kind) {
        case BarrierKind::JointPositionLimit:
        case BarrierKind::JointVelocityLimit: {
            const bool pos = s.kind == BarrierKind::JointPositionLimit;
            const Vec lo = s.lower ? *s.lower : (pos ? model.limits().q_min : model.limits().qd_min);
            const Vec hi = s.upper ? *s.upper : (pos ? model.limits().q_max : model.limits().qd_max);
            if (lo.size() != n) throw ConfigError("joint limit override must have one entry per joint");
            for (int side = 0; side < 2; ++side) {
                for (int i = 0; i < n; ++i) {
                    BarrierRowInfo r;
                    r.index = i;
                    r.upper = side == 1;
                    r.bound = side == 0 ? lo[i] : hi[i];
                    r.label = row_label(s.kind, "q" + std::to_string(i) + (side == 0 ? ",min" : ",max"));
                    add(std::move(r));
                }
            }
            break;
        }
        case BarrierKind::OpVelocityLimit: {
            if (s.lower->size() != model.task_dim()) {
                throw ConfigError("op_velocity_limit needs one entry per task axis");
            }
            m_needs_ee_partials = true;
            for (int side = 0; side < 2; ++side) {
                for (int k = 0; k < model.task_dim(); ++k) {
                    BarrierRowInfo r;
                    r.index = k;
                    r.upper = side == 1;
                    r.bound = side == 0 ? (*s.lower)[k] : (*s.upper)[k];
                    r.label = row_label(s.kind, "axis" + std::to_string(model.task_axes()[k]) +
                                                    (side == 0 ? ",min" : ",max"));
                    add(std::move(r));
                }
            }
            break;
        }
        case BarrierKind::OpPositionBox:
            for (int f = 0; f < 6; ++f) {
                if (!s.faces[f]) continue;
                BarrierRowInfo r;
                r.axis = f % 3;
                r.upper = f >= 3;
                r.bound = r.upper ? s.box_max[r.axis] : s.box_min[r.axis];
                r.label = row_label(s.kind, kFaceNames[f]);
                add(std::move(r));
            }
            break;
        case BarrierKind::WholeBodyBox:
            for (int sp : all_spheres(s)) {
                for (int f = 0; f < 6; ++f) {
                    if (!s.faces[f]) continue;
                    BarrierRowInfo r;
                    r.index = sp;
                    r.axis = f % 3;
                    r.upper = f >= 3;
                    r.bound = r.upper ? s.box_max[r.axis] : s.box_min[r.axis];
                    r.label = row_label(s.kind, "s" + std::to_string(sp) + "," + kFaceNames[f]);
                    add(std::move(r));
                }
            }
            break;
        case BarrierKind::Singularity: {
            m_needs_ee_partials = true;
            BarrierRowInfo r;
            r.bound = s.epsilon;
            r.label = row_label(s.kind, "ee");
            add(std::move(r));
            break;
        }
        case BarrierKind::CollisionPair:
        case BarrierKind::DynamicObstacle: {
            std::vector<int> obs = s.obstacles;
            if (obs.empty()) {
                for (int o = 0; o < n_obs; ++o) {
                    if (s.kind == BarrierKind::CollisionPair || scene.obstacles[o].dynamic) obs.push_back(o);
                }
            }
            for (int o : obs) check_obstacle(o);
            for (int sp : all_spheres(s)) {
                for (int o : obs) {
                    BarrierRowInfo r;
                    r.index = sp;
                    r.other = o;
                    r.label = row_label(s.kind, "s" + std::to_string(sp) + ",o" + std::to_string(o));
                    add(std::move(r));
                }
            }
            break;
        }
        case BarrierKind::SelfCollisionPair: {
            const auto& pairs = s.pairs.empty() ? model.self_collision_pairs() : s.pairs;
            for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
                check_sphere(pairs[p].first);
                check_sphere(pairs[p].second);
                if (pairs[p].first == pairs[p].second) throw ConfigError("self-collision pair uses one sphere twice");
                BarrierRowInfo r;
                r.index = pairs[p].first;
                r.other = pairs[p].second;
                r.label = row_label(s.kind, "s" + std::to_string(r.index) + ",s" + std::to_string(r.other));
                add(std::move(r));
            }
            break;
        }
        }
    }
}

bool BarrierSet::any_rd2_rows(PlantModel plant) const
{
    for (const auto& r : m_rows) {
        if (row_role(r.kind, plant) == RowRole::Rd2) return true;
    }
    return false;
}

namespace {

// Lazily computed per-evaluation quantities shared between rows.
struct EvalScratch {
    const RobotModel& model;
    const KinematicsCache& kin;
    const Vec& qd;

    bool have_ee = false;
    Mat J_task;            // k x n
    Mat dnu_dq;            // k x n, columns (dJ/dq_j) qd
    double mu = 0.0;
    Vec dmu_dq;

    std::vector<Mat3X> sphere_dv_dq;  // 3 x n, columns (dJ_s/dq_j) qd
    std::vector<char> have_sphere;

    EvalScratch(const RobotModel& m, const KinematicsCache& k, const Vec& v)
        : model(m), kin(k), qd(v), have_sphere(m.spheres().size(), 0)
    {
        sphere_dv_dq.resize(m.spheres().size());
    }

    void ensure_ee()
    {
        if (have_ee) return;
        have_ee = true;
        const int n = model.dof();
        J_task = model.select_task_rows(Mat(kin.ee_jacobian));
        const auto dJ = jacobian_partials(model, kin.fk, n - 1, kin.fk.ee.translation());
        dnu_dq.resize(J_task.rows(), n);
        for (int j = 0; j < n; ++j) dnu_dq.col(j) = model.select_task_rows(Vec6(dJ[j] * qd));

        const Mat G = J_task * J_task.transpose();
        Eigen::LLT<Mat> llt(G);
        dmu_dq = Vec::Zero(n);
        if (llt.info() != Eigen::Success) {
            mu = manipulability(J_task);
            return;
        }
        mu = llt.matrixLLT().diagonal().prod();
        const Mat GiJ = llt.solve(J_task);
        for (int j = 0; j < n; ++j) {
            const Mat dJt = model.select_task_rows(Mat(dJ[j]));
            dmu_dq[j] = mu * GiJ.cwiseProduct(dJt).sum();
        }
    }

    const Mat3X& sphere_dv(int s)
    {
        if (!have_sphere[s]) {
            have_sphere[s] = 1;
            const int n = model.dof();
            const auto dJ = jacobian_partials(model, kin.fk, model.spheres()[s].link, kin.fk.sphere_centers[s]);
            sphere_dv_dq[s].resize(3, n);
            for (int j = 0; j < n; ++j) sphere_dv_dq[s].col(j) = dJ[j].topRows<3>() * qd;
        }
        return sphere_dv_dq[s];
    }
};

}  // namespace

void BarrierSet::evaluate(const KinematicsCache& kin, const RobotState& state, const SceneSnapshot& scene,
                          BarrierBatch& out) const
{
    const int n = m_model->dof();
    const int m = size();
    require_dim(state.q.size(), n, "q");
    require_dim(state.qd.size(), n, "qd");
    out.h.resize(m);
    out.dh_dq.setZero(m, n);
    out.dh_dqd.setZero(m, n);
    out.dh_dt.setZero(m);
    out.curvature.setZero(m);
    out.degenerate.assign(m, 0);

    EvalScratch sc(*m_model, kin, state.qd);
    for (int r = 0; r < m; ++r) {
        const BarrierRowInfo& info = m_rows[r];
        const BarrierSpec& spec = m_specs[info.spec];
        const double sign = info.upper ? -1.0 : 1.0;
        switch (info.kind) {
        case BarrierKind::JointPositionLimit:
            out.h[r] = sign * (state.q[info.index] - info.bound);
            out.dh_dq(r, info.index) = sign;
            break;
        case BarrierKind::JointVelocityLimit:
            out.h[r] = sign * (state.qd[info.index] - info.bound);
            out.dh_dqd(r, info.index) = sign;
            break;
        case BarrierKind::OpPositionBox:
            out.h[r] = sign * (kin.fk.ee.translation()[info.axis] - info.bound);
            out.dh_dq.row(r) = sign * kin.ee_jacobian.row(info.axis);
            break;
        case BarrierKind::WholeBodyBox: {
            const double radius = m_model->spheres()[info.index].radius;
            out.h[r] = sign * (kin.fk.sphere_centers[info.index][info.axis] - info.bound) - radius;
            out.dh_dq.row(r) = sign * kin.sphere_jacobians[info.index].row(info.axis);
            break;
        }
        case BarrierKind::OpVelocityLimit: {
            sc.ensure_ee();
            const double nu = sc.J_task.row(info.index).dot(state.qd);
            out.h[r] = sign * (nu - info.bound);
            out.dh_dq.row(r) = sign * sc.dnu_dq.row(info.index);
            out.dh_dqd.row(r) = sign * sc.J_task.row(info.index);
            break;
        }
        case BarrierKind::Singularity:
            sc.ensure_ee();
            out.h[r] = sc.mu - info.bound;
            out.dh_dq.row(r) = sc.dmu_dq.transpose();
            break;
        case BarrierKind::CollisionPair:
        case BarrierKind::DynamicObstacle: {
            const Obstacle& ob = scene.obstacles.at(info.other);
            const double rs = m_model->spheres()[info.index].radius;
            const Vec3 d = kin.fk.sphere_centers[info.index] - ob.center;
            const double dist = d.norm();
            out.h[r] = dist - rs - ob.radius;
            if (dist < kDegenerateDistance) {
                out.degenerate[r] = 1;
                break;
            }
            const Vec3 nrm = d / dist;
            const Mat3X& Js = kin.sphere_jacobians[info.index];
            out.dh_dq.row(r) = nrm.transpose() * Js;
            out.dh_dt[r] = -nrm.dot(ob.velocity);
            if (info.kind == BarrierKind::DynamicObstacle && spec.gamma > 0.0) {
                const Vec3 v_rel = Js * state.qd - ob.velocity;
                const double speed = v_rel.norm();
                out.h[r] -= spec.gamma * speed;
                if (speed > 0.0) {
                    const Vec3 u = v_rel / speed;
                    out.dh_dq.row(r) -= spec.gamma * u.transpose() * sc.sphere_dv(info.index);
                    out.dh_dqd.row(r) = -spec.gamma * u.transpose() * Js;
                }
            }
            break;
        }
        case BarrierKind::SelfCollisionPair: {
            const auto& sa = m_model->spheres()[info.index];
            const auto& sb = m_model->spheres()[info.other];
            const Vec3 d = kin.fk.sphere_centers[info.index] - kin.fk.sphere_centers[info.other];
            const double dist = d.norm();
            out.h[r] = dist - sa.radius - sb.radius;
            if (dist < kDegenerateDistance) {
                out.degenerate[r] = 1;
                break;
            }
            out.dh_dq.row(r) =
                (d / dist).transpose() * (kin.sphere_jacobians[info.index] - kin.sphere_jacobians[info.other]);
            break;
        }
        }
    }
}

void BarrierSet::evaluate_with_curvature(const KinematicsCache& kin, const RobotState& state,
                                         const SceneSnapshot& scene, PlantModel plant, BarrierBatch& out,
                                         double step) const
{
    evaluate(kin, state, scene, out);
    if (!any_rd2_rows(plant)) return;

    RobotState plus{state.q + step * state.qd, state.qd};
    RobotState minus{state.q - step * state.qd, state.qd};
    const KinematicsCache kp(*m_model, plus.q);
    const KinematicsCache km(*m_model, minus.q);
    BarrierBatch bp, bm;
    evaluate(kp, plus, scene.advanced(step), bp);
    evaluate(km, minus, scene.advanced(-step), bm);
    const Vec phi_p = bp.dh_dq * state.qd + bp.dh_dt;
    const Vec phi_m = bm.dh_dq * state.qd + bm.dh_dt;
    for (int r = 0; r < size(); ++r) {
        if (row_role(m_rows[r].kind, plant) != RowRole::Rd2) continue;
        if (bp.degenerate[r] || bm.degenerate[r]) {
            out.degenerate[r] = 1;
            continue;
        }
        out.curvature[r] = (phi_p[r] - phi_m[r]) / (2.0 * step);
    }
}

// --------------------------------------------------------------------------
// Single-spec API

std::vector<BarrierEvaluation> eval_barrier(const BarrierSpec& spec, const RobotModel& model, const RobotState& state,
                                            const SceneSnapshot& scene, PlantModel plant)
{
    check_state(model, state);
    const BarrierSet set(model, {spec}, scene);
    const KinematicsCache kin(model, state.q);
    BarrierBatch batch;
    set.evaluate_with_curvature(kin, state, scene, plant, batch);

    std::vector<BarrierEvaluation> out;
    out.reserve(set.size());
    for (int r = 0; r < set.size(); ++r) {
        if (batch.degenerate[r]) {
            throw DegenerateGeometry("coincident sphere centers in " + set.rows()[r].label);
        }
        BarrierEvaluation e;
        e.h = batch.h[r];
        e.dh_dq = batch.dh_dq.row(r).transpose();
        e.dh_dqd = batch.dh_dqd.row(r).transpose();
        e.dh_dt = batch.dh_dt[r];
        e.curvature = batch.curvature[r];
        e.role = row_role(spec.kind, plant);
        e.relative_degree = e.role == RowRole::InputConstraint ? 0 : (e.role == RowRole::Rd1 ? 1 : 2);
        e.label = set.rows()[r].label;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<BarrierGradient> barrier_gradient(const BarrierSpec& spec, const RobotModel& model,
                                              const RobotState& state, const SceneSnapshot& scene)
{
    std::vector<BarrierGradient> out;
    for (auto& e : eval_barrier(spec, model, state, scene)) out.push_back({std::move(e.dh_dq), std::move(e.dh_dqd)});
    return out;
}

PlantTerms kinematic_plant_terms(const RobotState& state)
{
    PlantTerms p;
    p.plant = PlantModel::Kinematic;
    p.qd = state.qd;
    return p;
}

PlantTerms torque_plant_terms(const Vec& qd, const Mat& M_inv, const Vec& c_plus_g)
{
    PlantTerms p;
    p.plant = PlantModel::Torque;
    p.qd = qd;
    p.M_inv = M_inv;
    p.bias_acc = M_inv * c_plus_g;
    return p;
}

LinearConstraintRow build_rd1_constraint(const BarrierEvaluation& e, double alpha, const PlantTerms& plant)
{
    if (e.relative_degree != 1) throw std::invalid_argument("build_rd1_constraint: " + e.label + " is not RD1");
    LinearConstraintRow row;
    if (plant.plant == PlantModel::Kinematic) {
        row.a = e.dh_dq;
        row.b = -alpha * e.h - e.dh_dt;
    } else {
        // hdot = dh_dq qd + dh_dt + dh_dqd M^-1 (u - c - g)
        row.a = plant.M_inv.transpose() * e.dh_dqd;
        row.b = -alpha * e.h - e.dh_dq.dot(plant.qd) - e.dh_dt + e.dh_dqd.dot(plant.bias_acc);
    }
    return row;
}

LinearConstraintRow build_rd2_constraint(const BarrierEvaluation& e, double alpha, double alpha2,
                                         const PlantTerms& plant)
{
    if (e.relative_degree != 2 || plant.plant != PlantModel::Torque) {
        throw std::invalid_argument("build_rd2_constraint: " + e.label + " is not RD2");
    }
    const double hdot = e.dh_dq.dot(plant.qd) + e.dh_dt;
    LinearConstraintRow row;
    row.a = plant.M_inv.transpose() * e.dh_dq;
    row.b = -alpha2 * (hdot + alpha * e.h) - alpha * hdot - e.curvature + e.dh_dq.dot(plant.bias_acc);
    return row;
}

LinearConstraintRow build_input_constraint(const BarrierEvaluation& e, const RobotState& state)
{
    if (e.relative_degree != 0) throw std::invalid_argument("build_input_constraint: " + e.label);
    LinearConstraintRow row;
    row.a = e.dh_dqd;
    row.b = e.dh_dqd.dot(state.qd) - e.h;
    row.slackable = false;
    return row;
}

}  // namespace oscbf

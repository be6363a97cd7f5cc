#include "oscbf/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oscbf/dynamics.hpp"

namespace oscbf::validation {

// ---------------------------------------------------------------- QP oracle

std::optional<Vec> enumerate_qp(const Mat& P, const Vec& q, const Mat& A, const Vec& b, int max_active)
{
    const int n = static_cast<int>(q.size());
    const int m = static_cast<int>(b.size());
    require_dim(P.rows(), n, "P");
    require_dim(A.rows(), m, "A rows");
    if (m > 0) require_dim(A.cols(), n, "A cols");
    if (max_active < 0) max_active = std::min(n, m);

    // With z_S known the primal is x = P^-1 (A_S^T z_S - q); z_S solves
    // (A_S P^-1 A_S^T) z_S = b_S + A_S P^-1 q.
    const Eigen::LLT<Mat> llt(P);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("enumerate_qp: P must be positive definite");
    const Mat Pinv = llt.solve(Mat::Identity(n, n));
    const Vec x_free = -Pinv * q;
    const Mat G = A * Pinv * A.transpose();
    const Vec r = b - A * x_free;
    const double feas_tol = 1e-9 * (1.0 + b.cwiseAbs().maxCoeff());

    const auto accept = [&](const std::vector<int>& S, Vec& x) {
        const int k = static_cast<int>(S.size());
        Vec z = Vec::Zero(k);
        if (k > 0) {
            Mat Gs(k, k);
            Vec rs(k);
            for (int i = 0; i < k; ++i) {
                rs[i] = r[S[i]];
                for (int j = 0; j < k; ++j) Gs(i, j) = G(S[i], S[j]);
            }
            Eigen::FullPivLU<Mat> lu(Gs);
            lu.setThreshold(1e-12);
            if (!lu.isInvertible()) return false;
            z = lu.solve(rs);
            if (z.minCoeff() < -1e-10) return false;
        }
        x = x_free;
        for (int i = 0; i < k; ++i) x += z[i] * (Pinv * A.row(S[i]).transpose());
        if (m > 0 && ((A * x - b).array() < -feas_tol).any()) return false;
        return true;
    };

    std::vector<int> S;
    Vec x;
    for (int k = 0; k <= max_active; ++k) {
        S.resize(k);
        for (int i = 0; i < k; ++i) S[i] = i;
        while (true) {
            if (accept(S, x)) return x;
            // next k-combination of {0..m-1}
            int i = k - 1;
            while (i >= 0 && S[i] == m - k + i) --i;
            if (i < 0) break;
            ++S[i];
            for (int j = i + 1; j < k; ++j) S[j] = S[j - 1] + 1;
        }
    }
    return std::nullopt;
}

QpProblem RandomQp::problem() const
{
    QpProblem pb;
    pb.P = P;
    pb.q = q;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        pb.rows.push_back({A.row(i).transpose(), b[i], false, static_cast<int>(i)});
    }
    return pb;
}

RandomQp random_feasible_qp(std::mt19937_64& rng, int max_n, int max_rows)
{
    std::uniform_int_distribution<int> nd(1, max_n), md(1, max_rows);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nd(rng);
    const int m = md(rng);
    const auto randn = [&](int r, int c) {
        Mat M(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) M(i, j) = g(rng);
        }
        return M;
    };
    RandomQp out;
    const Mat L = randn(n, n);
    out.P = L * L.transpose() + 0.1 * Mat::Identity(n, n);
    out.q = 3.0 * randn(n, 1).col(0);
    out.A = randn(m, n);
    const Vec x0 = randn(n, 1).col(0);
    out.b = out.A * x0;
    for (int i = 0; i < m; ++i) out.b[i] -= u(rng);
    return out;
}

double kkt_residual(const Mat& P, const Vec& q, const Mat& A, const Vec& b, const Vec& x, const Vec& z)
{
    const Vec slack = A * x - b;
    double r = (P * x + q - A.transpose() * z).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        r = std::max({r, -slack[i], -z[i], std::abs(z[i] * slack[i])});
    }
    return r;
}

// ------------------------------------------------------- gradient checking

std::vector<ObstacleSpec> gradient_check_obstacles()
{
    ObstacleSpec fixed;
    fixed.center = Vec3(0.45, 0.1, 0.4);
    fixed.radius = 0.08;
    ObstacleSpec mover;
    mover.radius = 0.06;
    mover.times = {0.0, 10.0};
    mover.points = {Vec3(0.6, -0.4, 0.3), Vec3(0.2, 0.5, 0.7)};
    return {fixed, mover};
}

std::vector<BarrierSpec> gradient_check_specs(const RobotModel& model)
{
    std::vector<BarrierSpec> specs;
    for (BarrierKind kind : kAllBarrierKinds) {
        BarrierSpec s;
        s.kind = kind;
        s.id = std::string(to_string(kind));
        switch (kind) {
        case BarrierKind::OpPositionBox:
        case BarrierKind::WholeBodyBox:
            s.box_min = Vec3(-0.6, -0.7, -0.2);
            s.box_max = Vec3(0.8, 0.6, 1.1);
            break;
        case BarrierKind::OpVelocityLimit:
            s.lower = Vec::Constant(model.task_dim(), -0.5);
            s.upper = Vec::Constant(model.task_dim(), 0.5);
            break;
        case BarrierKind::CollisionPair:
        case BarrierKind::DynamicObstacle:
            if (model.spheres().empty()) continue;
            break;
        default:
            break;
        }
        if (kind == BarrierKind::WholeBodyBox && model.spheres().empty()) continue;
        if (kind == BarrierKind::SelfCollisionPair && model.self_collision_pairs().empty()) continue;
        specs.push_back(s);
    }
    return specs;
}

Vec random_configuration(const RobotModel& model, std::mt19937_64& rng, double margin)
{
    const auto& L = model.limits();
    Vec q(model.dof());
    for (int i = 0; i < model.dof(); ++i) {
        const double span = L.q_max[i] - L.q_min[i];
        std::uniform_real_distribution<double> u(L.q_min[i] + margin * span, L.q_max[i] - margin * span);
        q[i] = u(rng);
    }
    return q;
}

GradientCheckResult check_barrier_gradients(const RobotModel& model, const BarrierSpec& spec,
                                            const std::vector<ObstacleSpec>& obstacles,
                                            const GradientCheckOptions& opt)
{
    GradientCheckResult res;
    res.kind = std::string(to_string(spec.kind));
    const int n = model.dof();
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> vel(-1.0, 1.0), time(0.5, 9.5);

    const BarrierSet set(model, {spec}, scene_at(obstacles, 0.0));
    const int rows = set.size();
    BarrierBatch batch, lo, hi;

    const auto values = [&](const RobotState& s, double t, BarrierBatch& out) {
        set.evaluate(KinematicsCache(model, s.q), s, scene_at(obstacles, t), out);
    };
    const auto rel = [](double analytic, double fd, double scale) {
        return std::abs(analytic - fd) / std::max(scale, 1e-3);
    };

    for (int k = 0; k < opt.states; ++k) {
        RobotState s{random_configuration(model, rng), Vec(n)};
        for (int i = 0; i < n; ++i) s.qd[i] = vel(rng);
        const double t = time(rng);
        values(s, t, batch);
        Mat fd_q(rows, n), fd_qd(rows, n);
        for (int j = 0; j < n; ++j) {
            RobotState a = s, b = s;
            a.q[j] += opt.step;
            b.q[j] -= opt.step;
            values(a, t, hi);
            values(b, t, lo);
            fd_q.col(j) = (hi.h - lo.h) / (2.0 * opt.step);
            a = s;
            b = s;
            a.qd[j] += opt.step;
            b.qd[j] -= opt.step;
            values(a, t, hi);
            values(b, t, lo);
            fd_qd.col(j) = (hi.h - lo.h) / (2.0 * opt.step);
        }
        values(s, t + opt.step, hi);
        values(s, t - opt.step, lo);
        const Vec fd_t = (hi.h - lo.h) / (2.0 * opt.step);

        for (int r = 0; r < rows; ++r) {
            if (batch.degenerate[r]) continue;
            const Vec g_q = batch.dh_dq.row(r).transpose().array() + opt.mutation;
            const double scale_q = fd_q.row(r).cwiseAbs().maxCoeff();
            const double scale_qd = fd_qd.row(r).cwiseAbs().maxCoeff();
            for (int j = 0; j < n; ++j) {
                res.max_rel_error = std::max(res.max_rel_error, rel(g_q[j], fd_q(r, j), scale_q));
                res.max_rel_error = std::max(res.max_rel_error, rel(batch.dh_dqd(r, j), fd_qd(r, j), scale_qd));
            }
            res.max_rel_error = std::max(res.max_rel_error, rel(batch.dh_dt[r], fd_t[r], std::abs(fd_t[r])));
            ++res.rows_checked;
        }
        ++res.states;
    }
    res.passed = res.rows_checked > 0 && res.max_rel_error < opt.tolerance;
    return res;
}

// ----------------------------------------------------- dynamics references

RobotModel pendulum_model(double length, double mass)
{
    JointSpec joint;
    joint.axis = Vec3::UnitZ();
    LinkInertial link;
    link.mass = mass;
    link.com = Vec3(length, 0.0, 0.0);
    link.inertia = 1e-9 * Mat3::Identity();
    JointLimits lim;
    lim.q_min = Vec::Constant(1, -10.0);
    lim.q_max = Vec::Constant(1, 10.0);
    lim.qd_min = Vec::Constant(1, -100.0);
    lim.qd_max = Vec::Constant(1, 100.0);
    lim.tau_min = Vec::Constant(1, -100.0);
    lim.tau_max = Vec::Constant(1, 100.0);
    Pose ee = Pose::Identity();
    ee.translation() = Vec3(length, 0.0, 0.0);
    return RobotModel("pendulum", {joint}, {link}, {}, {}, lim, ee, {0});
}

double simulated_pendulum_period(double length, double amplitude, double dt, double duration)
{
    const RobotModel model = pendulum_model(length, 1.0);
    const Vec3 gravity(0.0, -9.81, 0.0);
    const double rest = -std::numbers::pi / 2.0;
    RobotState s{Vec::Constant(1, rest + amplitude), Vec::Zero(1)};
    const auto free = [](const RobotState&) { return Vec::Zero(1); };
    std::vector<double> crossings;
    double t = 0.0;
    double prev = s.q[0] - rest;
    while (t < duration) {
        s = integrate_rk4(model, s, free, dt, gravity);
        t += dt;
        const double cur = s.q[0] - rest;
        if (prev < 0.0 && cur >= 0.0) crossings.push_back(t - dt * cur / (cur - prev));
        prev = cur;
    }
    if (crossings.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

double compensated_energy_drift(const RobotModel& model, const RobotState& start, double dt, double duration)
{
    const Vec3 gravity = kDefaultGravity;
    const auto comp = [&](const RobotState& x) { return bias_forces(model, x.q, Vec::Zero(model.dof()), gravity).gravity; };
    const double e0 = kinetic_energy(model, start.q, start.qd);
    RobotState s = start;
    double worst = 0.0;
    const long steps = std::lround(duration / dt);
    for (long k = 0; k < steps; ++k) {
        s = integrate_rk4(model, s, comp, dt, gravity);
        worst = std::max(worst, std::abs(kinetic_energy(model, s.q, s.qd) - e0));
    }
    return worst / duration;
}

double IdentityErrors::max() const
{
    return std::max({lambda_inverse, jbar_inverse, null_dyn, null_kin, projector});
}

IdentityErrors op_space_identity_errors(const RobotModel& model, const RobotState& state)
{
    const OpSpaceQuantities op = op_space_quantities(model, state);
    const Mat& J = op.J;
    const Eigen::Index k = J.rows();
    // Mass-matrix inverse recomputed by a different factorization.
    const Mat Minv = op.M.fullPivLu().inverse();
    IdentityErrors e;
    e.lambda_inverse = (op.Lambda * (J * Minv * J.transpose()) - Mat::Identity(k, k)).cwiseAbs().maxCoeff();
    e.jbar_inverse = (J * op.J_bar - Mat::Identity(k, k)).cwiseAbs().maxCoeff();
    e.null_dyn = (J * Minv * op.N_dyn_T).cwiseAbs().maxCoeff();
    e.null_kin = (J * op.N_kin).cwiseAbs().maxCoeff();
    e.projector = (op.N_dyn * op.N_dyn - op.N_dyn).cwiseAbs().maxCoeff();
    return e;
}

}  // namespace oscbf::validation

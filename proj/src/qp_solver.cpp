#include "oscbf/qp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace oscbf {

std::string_view to_string(QpStatus status)
{
    switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIters: return "max_iters";
    case QpStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

void QpProblem::validate() const
{
    const int n = num_vars();
    if (P.rows() != n || P.cols() != n) throw DimensionMismatch("QpProblem: P must be n x n");
    if (!P.allFinite() || !q.allFinite()) throw std::invalid_argument("QpProblem: non-finite objective");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("QpProblem: P is not symmetric");
    }
    if (n > 0) {
        const double tol = 1e-9 * std::max(1.0, P.cwiseAbs().maxCoeff());
        Mat shifted = P;
        shifted.diagonal().array() += tol;
        if (Eigen::LLT<Mat>(shifted).info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -tol) throw std::invalid_argument("QpProblem: P is not positive semidefinite");
        }
    }
    if (!(slack_penalty > 0.0)) throw std::invalid_argument("QpProblem: slack penalty must be positive");
    if (!row_penalty.empty()) {
        if (static_cast<int>(row_penalty.size()) != num_rows()) {
            throw DimensionMismatch("QpProblem: row_penalty size must match rows");
        }
        for (double r : row_penalty) {
            if (!(r > 0.0)) throw std::invalid_argument("QpProblem: slack penalty must be positive");
        }
    }
    for (const auto& r : rows) {
        if (r.a.size() != n) throw DimensionMismatch("QpProblem: constraint row has wrong width");
        if (!r.a.allFinite() || !std::isfinite(r.b)) throw std::invalid_argument("QpProblem: non-finite row");
    }
}

double qp_objective(const QpProblem& pb, const Vec& x, const Vec& t)
{
    double f = 0.5 * x.dot(pb.P * x) + pb.q.dot(x);
    for (int i = 0; i < pb.num_rows() && i < t.size(); ++i) {
        if (pb.rows[i].slackable) f += pb.penalty(i) * t[i];
    }
    return f;
}

namespace {

using Clock = std::chrono::steady_clock;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Largest step in (0, 1] keeping v + a dv >= 0.
double max_step(const Vec& v, const Vec& dv)
{
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
}

}  // namespace

QpSolution QpSolver::solve(const QpProblem& pb, const QpSolution* warm)
{
    const auto start = Clock::now();
    pb.validate();
    const int n = pb.num_vars();
    const int m = pb.num_rows();

    // Slack variables live in row space; hard rows carry t = kappa = 0 and a
    // zero mask so the same vector expressions serve both kinds of row.
    m_A.resize(m, n);
    m_b.resize(m);
    m_slack_rows.clear();
    Vec mask = Vec::Zero(m);
    m_rho = Vec::Zero(m);
    for (int i = 0; i < m; ++i) {
        m_A.row(i) = pb.rows[i].a.transpose();
        m_b[i] = pb.rows[i].b;
        if (m_opt.relax_slackable && pb.rows[i].slackable) {
            m_slack_rows.push_back(i);
            mask[i] = 1.0;
            m_rho[i] = pb.penalty(i);
        }
    }
    const int ms = static_cast<int>(m_slack_rows.size());
    const Mat& A = m_A;
    const Vec& b = m_b;
    const Vec& rho = m_rho;
    const auto msk = mask.array();
    const auto hard = (1.0 - mask.array());

    Mat Pr = 0.5 * (pb.P + pb.P.transpose());
    Pr.diagonal().array() += m_opt.regularization;

    QpSolution sol;
    sol.t = Vec::Zero(m);
    sol.z = Vec::Zero(m);

    const auto finish = [&](QpSolution& s) {
        s.objective = qp_objective(pb, s.x, s.t);
        s.solve_time = std::chrono::duration<double>(Clock::now() - start).count();
        return s;
    };

    if (m == 0) {
        const Mat Ps = 0.5 * (pb.P + pb.P.transpose());
        const Eigen::LLT<Mat> llt(Pr);
        sol.x = llt.solve(-pb.q);
        for (int refine = 0; refine < 3; ++refine) sol.x -= llt.solve(Ps * sol.x + pb.q);
        sol.status = QpStatus::Optimal;
        sol.kkt_residual = inf_norm(Ps * sol.x + pb.q) / (1.0 + inf_norm(pb.q));
        return finish(sol);
    }

    Vec x(n);
    if (warm && warm->x.size() == n && warm->x.allFinite()) {
        x = warm->x;
    } else {
        Mat K0 = Pr;
        K0.noalias() += A.transpose() * A;
        x = K0.llt().solve(-pb.q + A.transpose() * b);
    }
    Vec t = mask;
    Vec s = (A * x + t - b).cwiseMax(1.0);
    Vec z = Vec::Ones(m);
    Vec kappa = (msk * (rho.array() - 1.0).max(1.0)).matrix();
    if (m_opt.warm_floor > 0.0 && warm && warm->z.size() == m && warm->t.size() == m && warm->x.size() == n &&
        warm->z.allFinite() && warm->t.allFinite()) {
        // Previous iterate pushed back into the interior.
        const double d = m_opt.warm_floor;
        z = warm->z.cwiseMax(d);
        t = (msk * warm->t.array().max(d)).matrix();
        s = (A * x + t - b).cwiseMax(d);
        kappa = (msk * (rho.array() - z.array()).max(d)).matrix();
    }

    const double b_scale = inf_norm(b);
    const double q_scale = inf_norm(pb.q);
    const double rho_scale = ms > 0 ? inf_norm(rho) : 0.0;
    const double a_scale = 1.0 + A.cwiseAbs().maxCoeff();
    const int n_comp = m + ms;

    std::vector<int> hard_rows;
    for (int i = 0; i < m; ++i) {
        if (mask[i] == 0.0) hard_rows.push_back(i);
    }

    Vec Ax(m), Px(n), Atz(n), r_x(n), r_t(m), r_p(m);
    double rp_rel = 0, rd_rel = 0, mu = 0;
    const auto residuals = [&]() {
        Ax.noalias() = A * x;
        Px.noalias() = Pr * x;
        Atz.noalias() = A.transpose() * z;
        r_x = Px + pb.q - Atz;
        r_t = (msk * (rho.array() - z.array() - kappa.array())).matrix();
        r_p = Ax + t - b - s;
        rp_rel = inf_norm(r_p) / (1.0 + std::max(inf_norm(Ax), b_scale));
        rd_rel = std::max(inf_norm(r_x) / (1.0 + std::max({inf_norm(Px), q_scale, inf_norm(Atz)})),
                          ms > 0 ? inf_norm(r_t) / (1.0 + rho_scale) : 0.0);
        mu = (s.dot(z) + t.dot(kappa)) / n_comp;
    };

    // Farkas test on the hard rows: y >= 0, A_h^T y = 0, b_h^T y > 0.
    Vec Aty(n);
    const auto hard_rows_conflict = [&]() {
        if (hard_rows.empty()) return false;
        double zsum = 0.0;
        for (int i : hard_rows) zsum += z[i];
        if (!(zsum > 0.0)) return false;
        Aty.setZero();
        double bty = 0.0;
        for (int i : hard_rows) {
            const double y = z[i] / zsum;
            Aty += y * A.row(i).transpose();
            bty += y * b[i];
        }
        return inf_norm(Aty) < 1e-7 * a_scale && bty > 1e-6 * (1.0 + b_scale);
    };

    Vec D(m), W(m), k_tt(m), t_safe(m), u(m), rhs_t(m), v(m), Adx(m);
    Vec rhs_x(n), dx(n), dt(m), ds(m), dz(m), dk(m);
    Mat K(n, n), B(m, n);
    Eigen::LLT<Mat> llt(n);
    const auto newton = [&](const Vec& r_sz, const Vec& r_tk) {
        u = r_sz.cwiseQuotient(s) + D.cwiseProduct(r_p);
        rhs_t = (msk * (-r_t.array() - u.array() - r_tk.array() / t_safe.array())).matrix();
        v = rhs_t.cwiseProduct(D).cwiseQuotient(k_tt);
        rhs_x = -r_x;
        rhs_x.noalias() -= A.transpose() * (u + v);
        dx = llt.solve(rhs_x);
        Adx.noalias() = A * dx;
        dt = (msk * (rhs_t.array() - D.array() * Adx.array()) / k_tt.array()).matrix();
        ds = Adx + dt + r_p;
        dz = -r_sz.cwiseQuotient(s) - D.cwiseProduct(ds);
        dk = (-(r_tk.array() + kappa.array() * dt.array()) / t_safe.array()).matrix();
    };
    const auto step_length = [&]() {
        return std::min({max_step(s, ds), max_step(z, dz), max_step(t, dt), max_step(kappa, dk)});
    };

    Vec best_x = x, best_z = z, best_t = t;
    double best_merit = std::numeric_limits<double>::infinity();
    double best_kkt = 0.0;
    sol.status = QpStatus::MaxIters;
    int it = 0;
    Vec sz(m), tk(m), r_sz(m), r_tk(m);
    for (;; ++it) {
        residuals();
        const double merit = std::max({rp_rel, rd_rel, mu});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_z = z;
            best_t = t;
            best_kkt = merit;
        }
        if (rp_rel <= m_opt.tolerance && rd_rel <= m_opt.tolerance && mu <= m_opt.tolerance) {
            sol.status = QpStatus::Optimal;
            break;
        }
        if (!x.allFinite() || !z.allFinite()) break;
        if (it >= 3 && rp_rel > 1e-6 && (hard_rows_conflict() || inf_norm(z) > 1e12)) {
            sol.status = QpStatus::Infeasible;
            break;
        }
        if (it >= m_opt.max_iterations) break;

        D = z.cwiseQuotient(s);
        t_safe = (t.array() + hard).matrix();
        k_tt = (D.array() + msk * kappa.array() / t_safe.array()).matrix();
        W = (D.array() - msk * D.array().square() / k_tt.array()).matrix();
        B = W.cwiseSqrt().asDiagonal() * A;
        K = Pr;
        K.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
        llt.compute(K);
        if (llt.info() != Eigen::Success) break;

        // predictor
        sz = s.cwiseProduct(z);
        tk = t.cwiseProduct(kappa);
        newton(sz, tk);
        const double a_aff = step_length();
        const double mu_aff = ((s + a_aff * ds).dot(z + a_aff * dz) + (t + a_aff * dt).dot(kappa + a_aff * dk)) /
                              n_comp;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        // corrector
        r_sz = (sz.array() + ds.array() * dz.array() - sigma * mu).matrix();
        r_tk = (msk * (tk.array() + dt.array() * dk.array() - sigma * mu)).matrix();
        newton(r_sz, r_tk);
        const double a = std::min(1.0, 0.99 * step_length());

        x += a * dx;
        t += a * dt;
        s += a * ds;
        z += a * dz;
        kappa += a * dk;
    }

    if (sol.status == QpStatus::Optimal) {
        sol.x = x;
        sol.z = z;
        sol.t = t;
        sol.kkt_residual = std::max({rp_rel, rd_rel, mu});
    } else {
        sol.x = best_x;
        sol.z = best_z;
        sol.t = best_t;
        sol.kkt_residual = best_kkt;
    }
    sol.iterations = it;
    sol.t = sol.t.cwiseMax(0.0);

    if (m_opt.polish && sol.status != QpStatus::Infeasible) {
        polish(pb, sol);
    }
    return finish(sol);
}

bool QpSolver::polish(const QpProblem& pb, QpSolution& sol)
{
    const int n = pb.num_vars();
    const int m = pb.num_rows();
    const Mat& A = m_A;
    const Vec& b = m_b;
    const Mat Ps = 0.5 * (pb.P + pb.P.transpose());
    Mat Pr = Ps;
    Pr.diagonal().array() += m_opt.regularization;

    std::vector<char> slackable(m, 0);
    for (int i : m_slack_rows) slackable[i] = 1;

    // Row classification from the interior iterate.
    const Vec r = A * sol.x + sol.t - b;  // row slack s
    std::vector<int> active, slacked;
    Vec q_eff = pb.q;
    for (int i = 0; i < m; ++i) {
        const double rho = pb.penalty(i);
        if (slackable[i] && sol.t[i] > rho - sol.z[i]) {
            slacked.push_back(i);
            q_eff -= rho * A.row(i).transpose();
        } else if (sol.z[i] > std::max(r[i], 0.0)) {
            active.push_back(i);
        }
    }

    const int k = static_cast<int>(active.size());
    const int dim = n + k;
    Mat KKT = Mat::Zero(dim, dim);
    KKT.topLeftCorner(n, n) = Ps;
    Vec rhs(dim);
    rhs.head(n) = -q_eff;
    for (int j = 0; j < k; ++j) {
        KKT.block(0, n + j, n, 1) = A.row(active[j]).transpose();
        KKT.block(n + j, 0, 1, n) = A.row(active[j]);
        rhs[n + j] = b[active[j]];
    }
    // Factor the regularized system, refine against the exact one.
    Mat KKT_reg = KKT;
    KKT_reg.topLeftCorner(n, n) = Pr;
    for (int j = 0; j < k; ++j) KKT_reg(n + j, n + j) = -1e-10;
    Eigen::PartialPivLU<Mat> lu(KKT_reg);
    Vec sol_vec = lu.solve(rhs);
    for (int refine = 0; refine < 3; ++refine) sol_vec += lu.solve(rhs - KKT * sol_vec);
    if (!sol_vec.allFinite()) return false;

    const Vec x = sol_vec.head(n);
    Vec z = Vec::Zero(m);
    Vec t = Vec::Zero(m);
    const double feas_tol = 1e-9 * (1.0 + inf_norm(b));
    for (int j = 0; j < k; ++j) {
        const int i = active[j];
        z[i] = -sol_vec[n + j];
        if (z[i] < -1e-9 * (1.0 + inf_norm(z))) return false;
        if (slackable[i] && z[i] > pb.penalty(i)) return false;
        z[i] = std::max(z[i], 0.0);
    }
    const Vec Ax = A * x;
    for (int i : slacked) {
        z[i] = pb.penalty(i);
        t[i] = b[i] - Ax[i];
        if (t[i] < -feas_tol) return false;
        t[i] = std::max(t[i], 0.0);
    }
    for (int i = 0; i < m; ++i) {
        if (Ax[i] + t[i] < b[i] - feas_tol) return false;
    }

    const Vec Px = Ps * x;
    const Vec Atz = A.transpose() * z;
    const double rd = inf_norm(Px + pb.q - Atz) /
                      (1.0 + std::max({inf_norm(Px), inf_norm(pb.q), inf_norm(Atz)}));
    if (!(rd <= std::max(m_opt.tolerance, sol.kkt_residual))) return false;

    sol.x = x;
    sol.z = z;
    sol.t = t;
    sol.kkt_residual = rd;
    sol.status = QpStatus::Optimal;
    sol.polished = true;
    return true;
}

QpSolution solve(const QpProblem& problem, const std::optional<QpSolution>& warm_start, const QpOptions& options)
{
    QpSolver solver(options);
    return solver.solve(problem, warm_start ? &*warm_start : nullptr);
}

QpProblem relax(const QpProblem& pb)
{
    pb.validate();
    const int n = pb.num_vars();
    std::vector<int> slack_rows;
    for (int i = 0; i < pb.num_rows(); ++i) {
        if (pb.rows[i].slackable) slack_rows.push_back(i);
    }
    const int ms = static_cast<int>(slack_rows.size());
    QpProblem out;
    out.P = Mat::Zero(n + ms, n + ms);
    out.P.topLeftCorner(n, n) = pb.P;
    out.q = Vec::Zero(n + ms);
    out.q.head(n) = pb.q;
    out.slack_penalty = pb.slack_penalty;
    int k = 0;
    for (int i = 0; i < pb.num_rows(); ++i) {
        LinearConstraintRow row;
        row.a = Vec::Zero(n + ms);
        row.a.head(n) = pb.rows[i].a;
        row.b = pb.rows[i].b;
        row.source = pb.rows[i].source;
        row.slackable = false;
        if (pb.rows[i].slackable) {
            row.a[n + k] = 1.0;
            out.q[n + k] = pb.penalty(i);
            ++k;
        }
        out.rows.push_back(std::move(row));
    }
    for (int j = 0; j < ms; ++j) {
        LinearConstraintRow row;
        row.a = Vec::Zero(n + ms);
        row.a[n + j] = 1.0;
        row.b = 0.0;
        row.slackable = false;
        row.source = slack_rows[j];
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace oscbf

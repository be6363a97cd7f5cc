#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "oscbf/barriers.hpp"

namespace oscbf {

inline constexpr double kDefaultSlackPenalty = 1e6;

/// minimize 1/2 x^T P x + q^T x + sum_i rho_i t_i
/// subject to a_i^T x + t_i >= b_i, t_i >= 0 (t_i = 0 for hard rows).
struct QpProblem {
    Mat P;
    Vec q;
    std::vector<LinearConstraintRow> rows;
    double slack_penalty = kDefaultSlackPenalty;
    std::vector<double> row_penalty;  // optional per-row override of slack_penalty

    int num_vars() const { return static_cast<int>(q.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    double penalty(int row) const { return row_penalty.empty() ? slack_penalty : row_penalty[row]; }
    void validate() const;
};

enum class QpStatus { Optimal, MaxIters, Infeasible };
std::string_view to_string(QpStatus status);

struct QpSolution {
    Vec x;
    Vec t;  // per row, zero for hard rows
    Vec z;  // row multipliers
    QpStatus status = QpStatus::MaxIters;
    double kkt_residual = 0.0;
    double objective = 0.0;
    int iterations = 0;
    double solve_time = 0.0;  // seconds
    bool polished = false;
};

struct QpOptions {
    double tolerance = 1e-8;
    int max_iterations = 50;
    double regularization = 1e-9;
    // When false every row is treated as hard.
    bool relax_slackable = true;
    bool polish = true;
    // Warm starts reuse the previous duals and slacks, floored at this value;
    // 0 reuses only x.
    double warm_floor = 1e-3;
};

/// Mehrotra predictor-corrector primal-dual interior point method for dense
/// problems of a few variables and up to a few thousand rows. Keeps its
/// workspace between calls; not thread-safe per instance.
class QpSolver {
public:
    explicit QpSolver(QpOptions options = {}) : m_opt(options) {}

    QpSolution solve(const QpProblem& problem, const QpSolution* warm_start = nullptr);
    const QpOptions& options() const { return m_opt; }
    QpOptions& options() { return m_opt; }

private:
    bool polish(const QpProblem& problem, QpSolution& sol);

    QpOptions m_opt;
    // workspace
    Mat m_A;
    Vec m_b;
    std::vector<int> m_slack_rows;
    Vec m_rho;
};

QpSolution solve(const QpProblem& problem, const std::optional<QpSolution>& warm_start = std::nullopt,
                 const QpOptions& options = {});

/// Explicit slack augmentation over (x, t_slackable): every row becomes hard,
/// with t >= 0 rows appended.
QpProblem relax(const QpProblem& problem);

double qp_objective(const QpProblem& problem, const Vec& x, const Vec& t);

}  // namespace oscbf

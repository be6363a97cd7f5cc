#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oscbf/simulator.hpp"

/// Reference implementations that share no code path with the production
/// algorithms they check, plus the property checks built on them.
namespace oscbf::validation {

// ---------------------------------------------------------------- QP oracle

/// Exact solution of a strictly convex QP with hard rows by enumerating
/// active sets in order of size. Returns nullopt if no KKT point is found
/// with at most `max_active` active rows.
std::optional<Vec> enumerate_qp(const Mat& P, const Vec& q, const Mat& A, const Vec& b, int max_active = -1);

struct RandomQp {
    Mat P;
    Vec q;
    Mat A;
    Vec b;
    QpProblem problem() const;  // all rows hard
};

/// Random feasible strictly convex QP, n <= max_n, rows <= max_rows.
RandomQp random_feasible_qp(std::mt19937_64& rng, int max_n = 10, int max_rows = 30);

/// Stationarity, primal feasibility, dual feasibility and complementarity
/// of (x, z) for min 1/2 x'Px + q'x s.t. Ax >= b.
double kkt_residual(const Mat& P, const Vec& q, const Mat& A, const Vec& b, const Vec& x, const Vec& z);

// ------------------------------------------------------- gradient checking

struct GradientCheckOptions {
    int states = 100;
    std::uint64_t seed = 1;
    double step = 1e-6;
    double tolerance = 1e-5;
    // Added to every analytic dh_dq entry; a non-zero value must make the check fail.
    double mutation = 0.0;
};

struct GradientCheckResult {
    std::string kind;
    int rows_checked = 0;
    int states = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

/// Central-difference check of dh_dq, dh_dqd and dh_dt for one barrier spec
/// at random states (joint positions within limits, velocities within 1 rad/s).
GradientCheckResult check_barrier_gradients(const RobotModel& model, const BarrierSpec& spec,
                                            const std::vector<ObstacleSpec>& obstacles,
                                            const GradientCheckOptions& options = {});

/// One spec per barrier kind, configured to be evaluable on `model`.
std::vector<BarrierSpec> gradient_check_specs(const RobotModel& model);
/// Obstacles used by gradient_check_specs (one static, one moving).
std::vector<ObstacleSpec> gradient_check_obstacles();

// ----------------------------------------------------- dynamics references

/// Single revolute link about z with a point mass at distance l along x
/// (gravity along -y), for the pendulum oracle.
RobotModel pendulum_model(double length, double mass);

/// Period measured from upward zero crossings of a free swing from `amplitude`.
double simulated_pendulum_period(double length, double amplitude, double dt, double duration);

/// Kinetic energy drift rate (J/s) under RK4 with exact gravity compensation.
double compensated_energy_drift(const RobotModel& model, const RobotState& start, double dt, double duration);

struct IdentityErrors {
    double lambda_inverse = 0.0;   // || Lambda (J M^-1 J^T) - I ||
    double jbar_inverse = 0.0;     // || J J_bar - I ||
    double null_dyn = 0.0;         // || J M^-1 N_dyn_T ||
    double null_kin = 0.0;         // || J N_kin ||
    double projector = 0.0;        // || N_dyn N_dyn - N_dyn ||
    double max() const;
};

IdentityErrors op_space_identity_errors(const RobotModel& model, const RobotState& state);

/// Uniform random configuration within the joint limits (shrunk by `margin`).
Vec random_configuration(const RobotModel& model, std::mt19937_64& rng, double margin = 0.05);

// ------------------------------------------------------------------ suite

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteOptions {
    int threads = 1;
    bool include_negative_controls = true;
};

/// Every property check; used by the CLI `validate` command.
std::vector<CheckResult> run_suite(const SuiteOptions& options = {});

/// Conflicting-row scenario: returns the solver status with slack relaxation
/// on or off.
QpStatus conflicting_rows_status(bool relax_slackable);

}  // namespace oscbf::validation

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

#include "oscbf/dynamics.hpp"
#include "oscbf/validation.hpp"

namespace oscbf::validation {

namespace {

std::string fmt(double v)
{
    std::ostringstream o;
    o.precision(3);
    o << v;
    return o.str();
}

std::vector<CheckResult> gradient_checks(const RobotModel& model, std::uint64_t seed)
{
    std::vector<CheckResult> out;
    const auto obstacles = gradient_check_obstacles();
    for (const auto& spec : gradient_check_specs(model)) {
        GradientCheckOptions opt;
        opt.seed = seed;
        const auto r = check_barrier_gradients(model, spec, obstacles, opt);
        out.push_back({"gradient/" + model.name() + "/" + r.kind, r.passed,
                       "max rel error " + fmt(r.max_rel_error) + " over " + std::to_string(r.rows_checked) +
                           " rows, " + std::to_string(r.states) + " states"});
    }
    return out;
}

CheckResult mutation_smoke(const RobotModel& model)
{
    BarrierSpec spec;
    spec.kind = BarrierKind::CollisionPair;
    GradientCheckOptions opt;
    opt.states = 10;
    opt.mutation = 1e-3;
    const auto r = check_barrier_gradients(model, spec, gradient_check_obstacles(), opt);
    return {"gradient/mutation_detected", !r.passed, "mutated gradient error " + fmt(r.max_rel_error)};
}

CheckResult qp_oracle_check(int problems, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    double worst_dx = 0.0, worst_kkt = 0.0;
    int failures = 0;
    for (int k = 0; k < problems; ++k) {
        const RandomQp rq = random_feasible_qp(rng);
        const auto exact = enumerate_qp(rq.P, rq.q, rq.A, rq.b);
        const QpSolution sol = solve(rq.problem());
        if (!exact || sol.status != QpStatus::Optimal) {
            ++failures;
            continue;
        }
        worst_dx = std::max(worst_dx, (sol.x - *exact).norm());
        worst_kkt = std::max(worst_kkt, kkt_residual(rq.P, rq.q, rq.A, rq.b, sol.x, sol.z));
    }
    const bool ok = failures == 0 && worst_dx < 1e-5 && worst_kkt < 1e-6;
    return {"qp/enumeration_oracle", ok,
            "max |dx| " + fmt(worst_dx) + ", max KKT " + fmt(worst_kkt) + ", failures " + std::to_string(failures)};
}

CheckResult identity_check(const RobotModel& model, int states, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> vel(-1.0, 1.0);
    double worst = 0.0;
    int used = 0;
    for (int k = 0; k < states; ++k) {
        RobotState s{random_configuration(model, rng), Vec(model.dof())};
        for (int i = 0; i < model.dof(); ++i) s.qd[i] = vel(rng);
        const OpSpaceQuantities op = op_space_quantities(model, s);
        if (op.damped_inertia || op.damped_pinv) continue;
        worst = std::max(worst, op_space_identity_errors(model, s).max());
        ++used;
    }
    return {"dynamics/op_space_identities/" + model.name(), used > 0 && worst < 1e-8,
            "max error " + fmt(worst) + " over " + std::to_string(used) + " states"};
}

CheckResult pendulum_check()
{
    const double l = 0.8, amp = 5.0 * std::numbers::pi / 180.0, g = 9.81;
    const double T = simulated_pendulum_period(l, amp, 1e-3, 20.0);
    const double inertia = l * l + 1e-9;
    const double exact = 4.0 * std::sqrt(inertia / (g * l)) * std::comp_ellint_1(std::sin(amp / 2.0));
    const double err = std::abs(T - exact) / exact;
    return {"dynamics/pendulum_period", err < 1e-3, "relative error " + fmt(err)};
}

CheckResult energy_check(const RobotModel& model, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> vel(-0.5, 0.5);
    RobotState s{random_configuration(model, rng, 0.2), Vec(model.dof())};
    for (int i = 0; i < model.dof(); ++i) s.qd[i] = vel(rng);
    const double drift = compensated_energy_drift(model, s, 1e-3, 1.0);
    return {"dynamics/energy_drift/" + model.name(), drift < 1e-6, "drift " + fmt(drift) + " J/s"};
}

CheckResult hocbf_negative_control()
{
    const auto path = data_dir() / "scenarios" / "fig5_dynamic.json";
    try {
        const auto with = run_scenario(load_scenario(path, {"mode=torque"}), RunOptions{false}).summary;
        const auto without =
            run_scenario(load_scenario(path, {"mode=torque", "hocbf=false"}), RunOptions{false}).summary;
        const bool ok = with.min_h >= -1e-3 && without.min_h < -1e-3;
        return {"negative_control/hocbf_disabled", ok,
                "min h with HOCBF " + fmt(with.min_h) + ", without " + fmt(without.min_h)};
    } catch (const std::exception& e) {
        return {"negative_control/hocbf_disabled", false, e.what()};
    }
}

CheckResult slack_negative_control()
{
    const QpStatus relaxed = conflicting_rows_status(true);
    const QpStatus hard = conflicting_rows_status(false);
    return {"negative_control/slack_removed", relaxed == QpStatus::Optimal && hard == QpStatus::Infeasible,
            "relaxed " + std::string(to_string(relaxed)) + ", hard " + std::string(to_string(hard))};
}

}  // namespace

QpStatus conflicting_rows_status(bool relax_slackable)
{
    // Joint 0 of a planar arm asked to be both above 0.5 and below 0.2.
    QpProblem pb;
    pb.P = Mat::Identity(2, 2);
    pb.q = Vec::Zero(2);
    Vec e0 = Vec::Zero(2);
    e0[0] = 1.0;
    pb.rows.push_back({e0, 0.5, true, 0});
    pb.rows.push_back({-e0, -0.2, true, 1});
    QpOptions opt;
    opt.relax_slackable = relax_slackable;
    return solve(pb, std::nullopt, opt).status;
}

std::vector<CheckResult> run_suite(const SuiteOptions& options)
{
    const RobotModel panda = load_robot_model(data_dir() / "models" / "panda.json");
    const RobotModel planar = load_robot_model(data_dir() / "models" / "planar3r.json");

    std::vector<std::function<std::vector<CheckResult>()>> jobs;
    jobs.push_back([&] { return gradient_checks(panda, 11); });
    jobs.push_back([&] { return gradient_checks(planar, 12); });
    jobs.push_back([&] { return std::vector<CheckResult>{mutation_smoke(panda)}; });
    jobs.push_back([] { return std::vector<CheckResult>{qp_oracle_check(100, 7)}; });
    jobs.push_back([&] {
        return std::vector<CheckResult>{identity_check(panda, 100, 3), identity_check(planar, 100, 4)};
    });
    jobs.push_back([] { return std::vector<CheckResult>{pendulum_check()}; });
    jobs.push_back([&] { return std::vector<CheckResult>{energy_check(panda, 5)}; });
    jobs.push_back([] { return std::vector<CheckResult>{slack_negative_control()}; });
    if (options.include_negative_controls) {
        jobs.push_back([] { return std::vector<CheckResult>{hocbf_negative_control()}; });
    }

    std::vector<std::vector<CheckResult>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) results[i] = jobs[i]();
    };
    const int threads = std::clamp(options.threads, 1, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<CheckResult> out;
    for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
    return out;
}

}  // namespace oscbf::validation

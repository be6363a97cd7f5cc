// Acceptance run: one PASS/FAIL line per top-level criterion, exit 1 if any
// fails. `--seeds N` shortens the forward-invariance sweep for local use.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "oscbf/bench.hpp"
#include "oscbf/validation.hpp"

using namespace oscbf;

namespace {

struct Verdict {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::filesystem::path scenario(const std::string& name) { return data_dir() / "scenarios" / (name + ".json"); }

template <class T>
std::string str(const T& v)
{
    std::ostringstream o;
    o << v;
    return o.str();
}

// ------------------------------------------------------------ sweep runs

struct SweepRun {
    ControlMode mode = ControlMode::Velocity;
    std::uint64_t seed = 0;
    double min_h = 0.0;
    std::map<std::string, double> min_h_by_kind;
    int quiet_steps = 0;        // all non-singularity rows above 0.2, nominal satisfies every row and input limit
    double quiet_deviation = 0.0;  // max |u* - u_nom| over those steps
    int binding_nominal = 0;       // all h above 0.2 but the nominal violates some row
    double wall_seconds = 0.0;
    bool diverged = false;
    int rows = 0;
};

bool inside_input_limits(const RobotModel& model, ControlMode mode, const Vec& u)
{
    const auto& lim = model.limits();
    const Vec& lo = mode == ControlMode::Velocity ? lim.qd_min : lim.tau_min;
    const Vec& hi = mode == ControlMode::Velocity ? lim.qd_max : lim.tau_max;
    return (u.array() < hi.array()).all() && (u.array() > lo.array()).all();
}

SweepRun sweep_run(ControlMode mode, std::uint64_t seed)
{
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioConfig config = load_scenario(scenario("fig1_all_constraints"));
    config.mode = mode;
    config.seed = seed;
    SweepRun run;
    run.mode = mode;
    run.seed = seed;
    run.min_h = std::numeric_limits<double>::infinity();
    Simulation sim(config);
    const BarrierSet& set = sim.controller().barriers();
    run.rows = set.size();
    const long steps = std::lround(config.duration / config.dt);
    try {
        for (long k = 0; k < steps; ++k) {
            const LogRecord rec = sim.step();
            const SafeCommand& cmd = sim.last_command();
            const BarrierBatch& batch = sim.controller().last_batch();
            bool quiet = true;
            for (int r = 0; r < set.size(); ++r) {
                if (batch.degenerate[r]) continue;
                const std::string kind(to_string(set.rows()[r].kind));
                auto [it, fresh] = run.min_h_by_kind.emplace(kind, rec.h[r]);
                if (!fresh) it->second = std::min(it->second, rec.h[r]);
                run.min_h = std::min(run.min_h, rec.h[r]);
                if (set.rows()[r].kind != BarrierKind::Singularity && rec.h[r] <= 0.2) quiet = false;
            }
            if (quiet) {
                for (const auto& row : sim.controller().last_rows()) {
                    if (!(row.a.dot(cmd.nominal) > row.b)) quiet = false;
                }
                run.binding_nominal += quiet ? 0 : 1;
            }
            if (quiet && inside_input_limits(sim.model(), mode, cmd.nominal)) {
                ++run.quiet_steps;
                run.quiet_deviation = std::max(run.quiet_deviation, (cmd.value - cmd.nominal).cwiseAbs().maxCoeff());
            }
        }
    } catch (const SimDiverged&) {
        run.diverged = true;
    }
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

std::vector<SweepRun> sweep_runs(int seeds)
{
    std::vector<std::pair<ControlMode, std::uint64_t>> jobs;
    for (ControlMode m : {ControlMode::Velocity, ControlMode::Torque}) {
        for (int s = 0; s < seeds; ++s) jobs.emplace_back(m, static_cast<std::uint64_t>(s));
    }
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8u));
    std::vector<SweepRun> out(jobs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < jobs.size();) out[i] = sweep_run(jobs[i].first, jobs[i].second);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

std::string run_name(const SweepRun& r) { return std::string(to_string(r.mode)) + "/seed " + str(r.seed); }

Verdict forward_invariance(const std::vector<SweepRun>& runs)
{
    Verdict v{"forward invariance: all-constraint sweep, 168 rows, both modes"};
    double worst = std::numeric_limits<double>::infinity(), slowest = 0.0;
    std::string where, problems;
    for (const auto& r : runs) {
        if (r.min_h < worst) {
            worst = r.min_h;
            where = run_name(r);
        }
        slowest = std::max(slowest, r.wall_seconds);
        if (r.diverged) problems += " diverged " + run_name(r) + ";";
        if (r.rows != 168) problems += " " + run_name(r) + " has " + str(r.rows) + " rows;";
        if (r.min_h < -1e-3) problems += " " + run_name(r) + " min h " + str(r.min_h) + ";";
        if (r.wall_seconds > 120.0) problems += " " + run_name(r) + " took " + str(r.wall_seconds) + " s;";
    }
    v.passed = problems.empty() && !runs.empty();
    v.detail = str(runs.size()) + " runs, worst min h " + str(worst) + " (" + where + "), slowest run " +
               str(slowest) + " s" + problems;
    return v;
}

Verdict non_conservatism(const std::vector<SweepRun>& runs)
{
    Verdict v{"non-conservatism: every family probed below 0.05, filter inactive when all h > 0.2"};
    std::map<std::string, double> worst_family;  // max over runs of the family's min h
    int quiet_total = 0, binding_total = 0;
    double quiet_dev = 0.0;
    std::string problems;
    for (const auto& r : runs) {
        for (const auto& [kind, h] : r.min_h_by_kind) {
            worst_family[kind] = std::max(worst_family.count(kind) ? worst_family[kind] : -1e300, h);
            if (!(h < 0.05)) problems += " " + run_name(r) + " " + kind + " min h " + str(h) + ";";
        }
        if (r.min_h_by_kind.size() != 5) problems += " " + run_name(r) + " lacks a family;";
        if (r.quiet_steps == 0) problems += " " + run_name(r) + " never has all h > 0.2;";
        quiet_total += r.quiet_steps;
        binding_total += r.binding_nominal;
        quiet_dev = std::max(quiet_dev, r.quiet_deviation);
    }
    if (quiet_dev > 1e-6) problems += " inactive-filter deviation " + str(quiet_dev) + ";";
    v.passed = problems.empty() && !runs.empty();
    std::string fam;
    for (const auto& [k, h] : worst_family) fam += " " + k + " " + str(h);
    v.detail = "largest per-family min h:" + fam + "; " + str(quiet_total) + " inactive steps, max |u*-u_nom| " +
               str(quiet_dev) + " (" + str(binding_total) + " steps with all h > 0.2 but a row binding at the nominal)" +
               problems;
    return v;
}

// ------------------------------------------------------------ single runs

RunSummary summary_of(const std::string& name, const std::vector<std::string>& overrides)
{
    return run_scenario(load_scenario(scenario(name), overrides), RunOptions{false}).summary;
}

Verdict task_consistency()
{
    Verdict v{"task consistency: boundary push vs joint-metric and op-metric objectives"};
    const RunSummary os = summary_of("fig3_boundary_push", {"objective=oscbf"});
    const RunSummary jm = summary_of("fig3_boundary_push", {"objective=joint_metric"});
    const RunSummary om = summary_of("fig3_boundary_push", {"objective=op_metric"});
    const double gap_err = jm.final_position_error - os.final_position_error;
    const double gap_null = om.null_motion - os.null_motion;
    bool safe = true;
    for (const auto* s : {&os, &jm, &om}) safe = safe && s->safe && !s->diverged;
    v.passed = gap_err > 0.0 && gap_null > 0.0 && safe;
    v.detail = "EE error oscbf " + str(os.final_position_error) + " vs joint metric " + str(jm.final_position_error) +
               " (gap " + str(gap_err) + "); null motion oscbf " + str(os.null_motion) + " vs op metric " +
               str(om.null_motion) + " (gap " + str(gap_null) + ")" + (safe ? "" : "; a run was unsafe");
    return v;
}

Verdict dynamic_safety()
{
    Verdict v{"dynamic safety: periodic line with binding torque limits"};
    const RunSummary vel = summary_of("fig5_dynamic", {"mode=velocity"});
    const RunSummary tor = summary_of("fig5_dynamic", {"mode=torque"});
    v.passed = vel.min_h >= -1e-3 && tor.min_h >= -1e-3 && !vel.diverged && !tor.diverged &&
               vel.torque_saturated_steps > 0 && tor.torque_saturated_steps > 0 &&
               tor.rms_line_deviation < vel.rms_line_deviation;
    v.detail = "min h velocity " + str(vel.min_h) + ", torque " + str(tor.min_h) + "; RMS line deviation velocity " +
               str(vel.rms_line_deviation) + ", torque " + str(tor.rms_line_deviation) + "; saturated steps velocity " +
               str(vel.torque_saturated_steps) + ", torque " + str(tor.torque_saturated_steps);
    return v;
}

Verdict performance()
{
    Verdict v{"performance: 168-row median step, collision scaling in rows, velocity vs torque"};
    const ScenarioConfig base = load_scenario(scenario("bench_all"));
    BenchExperiment all_rows;
    for (auto& e : table_experiments(base)) {
        if (e.name == "All") all_rows = e;
    }
    const BenchRow all = bench_experiment(all_rows, 3);
    // Same family at every size so only the row count changes.
    std::vector<BenchRow> rows;
    for (const auto& [obstacles, spheres] : std::vector<std::pair<int, int>>{{1, 1}, {1, 0}, {8, 0}, {20, 0}}) {
        rows.push_back(bench_experiment(collision_scaling_experiment(base, obstacles, spheres), 3));
    }

    const auto hz = [](const FrequencyStats& s) { return s.median_step > 0.0 ? 1.0 / s.median_step : 0.0; };
    std::string problems, table;
    const std::vector<int> expected = {1, 21, 168, 420};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const BenchRow& r = rows[i];
        table += " " + str(r.constraints) + " rows: " + str(hz(r.velocity) / 1e3) + " / " + str(hz(r.torque) / 1e3) +
                 " kHz;";
        if (r.constraints != expected[i]) problems += " expected " + str(expected[i]) + " rows, got " + str(r.constraints) + ";";
        if (hz(r.velocity) < hz(r.torque)) problems += " torque faster at " + str(r.constraints) + " rows;";
        if (i > 0) {
            if (!(hz(r.velocity) < hz(rows[i - 1].velocity))) problems += " velocity not decreasing at " + str(r.constraints) + ";";
            if (!(hz(r.torque) < hz(rows[i - 1].torque))) problems += " torque not decreasing at " + str(r.constraints) + ";";
        }
    }
    if (all.constraints != 168) problems += " all-constraint suite has " + str(all.constraints) + " rows;";
    if (hz(all.velocity) < hz(all.torque)) problems += " torque faster on the all-constraint suite;";
    const double worst_median = std::max(all.velocity.median_step, all.torque.median_step);
    if (worst_median > 1e-3) problems += " 168-row median step " + str(worst_median * 1e3) + " ms;";
    v.passed = problems.empty();
    v.detail = "collision median-step frequency velocity / torque:" + table + " all-constraint suite " +
               str(hz(all.velocity) / 1e3) + " / " + str(hz(all.torque) / 1e3) + " kHz, median step " +
               str(worst_median * 1e3) + " ms" + problems;
    return v;
}

Verdict from_checks(const std::string& name, const std::vector<validation::CheckResult>& all,
                    const std::vector<std::string>& prefixes)
{
    Verdict v{name, true, ""};
    int n = 0;
    std::string failed;
    for (const auto& c : all) {
        const bool match = std::any_of(prefixes.begin(), prefixes.end(),
                                       [&](const std::string& p) { return c.name.rfind(p, 0) == 0; });
        if (!match) continue;
        ++n;
        if (!c.passed) {
            v.passed = false;
            failed += " " + c.name + " (" + c.detail + ");";
        }
    }
    if (n == 0) v.passed = false;
    v.detail = str(n) + " checks" + (failed.empty() ? ", all passed" : "; failed:" + failed);
    return v;
}

}  // namespace

int main(int argc, char** argv)
{
    int seeds = 20;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--seeds") seeds = std::max(1, std::atoi(argv[i + 1]));
    }

    std::vector<Verdict> verdicts;
    const auto report = [&](Verdict v) {
        std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << std::endl;
        verdicts.push_back(std::move(v));
    };
    const auto guarded = [&](const std::string& name, auto&& fn) {
        try {
            report(fn());
        } catch (const std::exception& e) {
            report(Verdict{name, false, std::string("error: ") + e.what()});
        }
    };

    std::vector<SweepRun> runs;
    try {
        runs = sweep_runs(seeds);
    } catch (const std::exception& e) {
        std::cerr << "sweep error: " << e.what() << '\n';
    }
    if (seeds < 20) std::cout << "note: sweep shortened to " << seeds << " seeds" << std::endl;
    report(forward_invariance(runs));
    report(non_conservatism(runs));
    guarded("task consistency", task_consistency);
    guarded("dynamic safety", dynamic_safety);
    guarded("performance", performance);

    validation::SuiteOptions opt;
    opt.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<validation::CheckResult> checks;
    try {
        checks = validation::run_suite(opt);
    } catch (const std::exception& e) {
        std::cerr << "suite error: " << e.what() << '\n';
    }
    report(from_checks("numerical ground truth: gradients, QP oracle, op-space identities, pendulum, energy", checks,
                       {"gradient/", "qp/", "dynamics/"}));
    report(from_checks("negative controls: HOCBF disabled, slack removed", checks, {"negative_control/"}));

    const auto failed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.passed; });
    std::cout << verdicts.size() - static_cast<std::size_t>(failed) << '/' << verdicts.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}

// Command-line front end: run, bench, validate, serve.
//
// Exit codes: 0 ok, 1 validation failure, 2 configuration error,
// 3 safety violation, 4 simulation diverged.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "oscbf/bench.hpp"
#include "oscbf/teleop.hpp"
#include "oscbf/validation.hpp"

namespace {

using namespace oscbf;

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kUnsafe = 3, kDiverged = 4 };

struct CommonArgs {
    std::string scenario;
    std::string positional;
    std::string out = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> prune_k;
    std::optional<double> alpha;
    std::optional<double> w_op, w_joint;
};

void add_scenario_flags(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("scenario_file", a.positional, "Scenario JSON");
    cmd->add_option("--scenario", a.scenario, "Scenario JSON");
    cmd->add_option("--override", a.overrides, "key=value applied to the scenario document (repeatable)")
        ->allow_extra_args(false)
        ->take_all();
    cmd->add_option("--seed", a.seed, "Random seed");
    cmd->add_option("--mode", a.mode, "velocity | torque")->check(CLI::IsMember({"velocity", "torque"}));
    cmd->add_option("--prune-k", a.prune_k, "Closest-K collision pruning (0 = off)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--alpha", a.alpha, "Class-K gain for every barrier")->check(CLI::PositiveNumber);
    cmd->add_option("--w-op", a.w_op, "Scalar operational-space weight")->check(CLI::PositiveNumber);
    cmd->add_option("--w-joint", a.w_joint, "Scalar null-space weight")->check(CLI::PositiveNumber);
}

std::vector<std::string> overrides_of(const CommonArgs& a)
{
    std::vector<std::string> o;
    if (a.mode) o.push_back("mode=" + *a.mode);
    if (a.seed) o.push_back("seed=" + std::to_string(*a.seed));
    if (a.prune_k) o.push_back("pruning.k=" + std::to_string(*a.prune_k));
    if (a.alpha) o.push_back("alpha=" + std::to_string(*a.alpha));
    if (a.w_op) o.push_back("gains.W_o=" + std::to_string(*a.w_op));
    if (a.w_joint) o.push_back("gains.W_j=" + std::to_string(*a.w_joint));
    o.insert(o.end(), a.overrides.begin(), a.overrides.end());
    return o;
}

std::string scenario_path(const CommonArgs& a)
{
    const std::string p = a.scenario.empty() ? a.positional : a.scenario;
    if (p.empty()) throw ConfigError("no scenario given");
    return p;
}

int thread_cap()
{
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("OSCBF_THREADS"); env && *env) {
        try {
            n = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw ConfigError("OSCBF_THREADS must be a positive integer");
        }
    }
    return n;
}

int cmd_run(const CommonArgs& a, bool log_rows)
{
    const ScenarioConfig config = load_scenario(scenario_path(a), overrides_of(a));
    const RunResult result = run_scenario(config);
    const std::filesystem::path out(a.out);
    std::filesystem::create_directories(out);
    const auto model = scenario_model(config);
    write_log_csv(out / "log.csv", result, model.dof(), log_rows || config.log_rows.value_or(false));
    write_json(out / "summary.json", summary_to_json(result.summary));
    const RunSummary& s = result.summary;
    std::cout << config.name << ": " << s.steps << " steps, min h " << s.min_h << ", rms position error "
              << s.rms_position_error << ", " << s.mean_hz / 1e3 << " kHz mean\n";
    if (s.diverged) {
        std::cerr << "diverged: " << s.error << '\n';
        return kDiverged;
    }
    if (!s.safe) {
        std::cerr << "safety violation: min h " << s.min_h << '\n';
        return kUnsafe;
    }
    return kOk;
}

int cmd_bench(const CommonArgs& a, int trials, double duration, bool scaling)
{
    std::vector<std::string> o = overrides_of(a);
    if (duration > 0.0) o.push_back("duration=" + std::to_string(duration));
    const std::string path = a.scenario.empty() && a.positional.empty()
                                 ? (data_dir() / "scenarios" / "bench_all.json").string()
                                 : scenario_path(a);
    const ScenarioConfig base = load_scenario(path, o);
    std::vector<BenchExperiment> experiments = table_experiments(base);
    if (scaling) {
        for (int obstacles : {20, 50}) experiments.push_back(collision_scaling_experiment(base, obstacles));
    }
    std::vector<BenchRow> rows;
    for (const auto& e : experiments) {
        rows.push_back(bench_experiment(e, trials));
        std::cerr << e.name << " done\n";
    }
    const std::filesystem::path out(a.out);
    std::filesystem::create_directories(out);
    write_json(out / "report.json", bench_report_json(rows));
    const std::string md = bench_report_markdown(rows);
    std::ofstream(out / "report.md") << md;
    std::cout << md;
    return kOk;
}

int cmd_validate(const std::string& report)
{
    if (!report.empty()) {
        std::ifstream in(report);
        if (!in) throw ConfigError("cannot open " + report);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            std::cout << "FAIL report: not valid JSON (" << e.what() << ")\n";
            return kCheckFailed;
        }
        const auto problems = validate_bench_report(doc);
        for (const auto& p : problems) std::cout << "FAIL report: " << p << '\n';
        if (problems.empty()) std::cout << "PASS report: " << doc["rows"].size() << " rows\n";
        return problems.empty() ? kOk : kCheckFailed;
    }
    validation::SuiteOptions opt;
    opt.threads = thread_cap();
    const auto results = validation::run_suite(opt);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
    }
    std::cout << results.size() - static_cast<std::size_t>(failed) << '/' << results.size() << " checks passed\n";
    return failed == 0 ? kOk : kCheckFailed;
}

std::atomic<bool> g_interrupted{false};

int cmd_serve(const CommonArgs& a, int port, const std::string& static_dir)
{
    const ScenarioConfig config = load_scenario(scenario_path(a), overrides_of(a));
    teleop::ServerOptions opt;
    opt.port = port;
    if (!static_dir.empty()) {
        opt.static_dir = static_dir;
    } else if (std::filesystem::exists(data_dir() / "ui" / "dist")) {
        opt.static_dir = data_dir() / "ui" / "dist";
    }
    teleop::TeleopServer server(config, opt);
    server.start();
    std::cout << "serving " << config.name << " on port " << server.port() << " (ws path /ws)" << std::endl;
    std::signal(SIGINT, [](int) { g_interrupted = true; });
    std::signal(SIGTERM, [](int) { g_interrupted = true; });
    while (!g_interrupted && !server.stats().diverged) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    const auto st = server.stats();
    std::cout << "steps " << st.sim_steps << ", frames " << st.frames_sent << ", min h " << st.min_h << '\n';
    return st.diverged ? kDiverged : kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Operational-space control barrier function toolkit"};
    app.require_subcommand(1);

    CommonArgs run_args, bench_args, serve_args;
    bool log_rows = false;
    auto* run = app.add_subcommand("run", "Simulate a scenario; writes log.csv and summary.json");
    add_scenario_flags(run, run_args);
    run->add_option("--out", run_args.out, "Output directory");
    run->add_flag("--log-rows", log_rows, "Add one h column per barrier row to the log");

    int trials = 3;
    double duration = 0.0;
    bool scaling = false;
    auto* bench = app.add_subcommand("bench", "Timing table; writes report.md and report.json");
    add_scenario_flags(bench, bench_args);
    bench->add_option("--out", bench_args.out, "Output directory");
    bench->add_option("--trials", trials, "Runs per experiment and mode (first discarded)")->check(CLI::Range(2, 1000));
    bench->add_option("--duration", duration, "Override the simulated duration per run (s)");
    bench->add_flag("--scaling", scaling, "Add 20- and 50-obstacle collision rows (420 and 1050 constraints)");

    std::string report;
    auto* validate = app.add_subcommand("validate", "Run the property-check suite, or check a bench report");
    validate->add_option("--report", report, "Bench report.json to check instead");

    int port = 8080;
    std::string static_dir;
    auto* serve = app.add_subcommand("serve", "Live simulation over WebSocket");
    add_scenario_flags(serve, serve_args);
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
    serve->add_option("--static", static_dir, "Directory of static files to serve over HTTP");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(run_args, log_rows);
        if (*bench) return cmd_bench(bench_args, trials, duration, scaling);
        if (*validate) return cmd_validate(report);
        if (*serve) return cmd_serve(serve_args, port, static_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const SimDiverged& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDiverged;
    }
    return kOk;
}

#include "oscbf/bench.hpp"

#include <algorithm>
#include <numeric>

namespace oscbf {

namespace {

BenchExperiment only(const ScenarioConfig& base, const std::string& name, BarrierKind kind)
{
    BenchExperiment e{name, base};
    e.config.name = name;
    std::erase_if(e.config.barriers, [&](const BarrierSpec& s) { return s.kind != kind; });
    if (e.config.barriers.empty()) throw ConfigError("bench base scenario has no " + std::string(to_string(kind)) + " barrier");
    return e;
}

}  // namespace

std::vector<BenchExperiment> table_experiments(const ScenarioConfig& base)
{
    std::vector<BenchExperiment> out;
    out.push_back(only(base, "Singularity", BarrierKind::Singularity));
    out.push_back(only(base, "EE Position", BarrierKind::OpPositionBox));
    out.push_back(only(base, "Joint Limits", BarrierKind::JointPositionLimit));
    out.push_back(only(base, "Collision Avoidance", BarrierKind::CollisionPair));
    out.push_back(only(base, "Whole-Body Set Containment", BarrierKind::WholeBodyBox));
    BenchExperiment all{"All", base};
    all.config.name = "All";
    out.push_back(all);
    return out;
}

BenchExperiment collision_scaling_experiment(const ScenarioConfig& base, int obstacles, int spheres)
{
    if (obstacles < 1) throw ConfigError("collision scaling needs at least one obstacle");
    std::string name = "Collision x" + std::to_string(obstacles);
    if (spheres > 0) name += " (" + std::to_string(spheres) + " spheres)";
    BenchExperiment e = only(base, name, BarrierKind::CollisionPair);
    if (spheres > 0) {
        for (auto& s : e.config.barriers) {
            s.spheres.resize(static_cast<std::size_t>(spheres));
            std::iota(s.spheres.begin(), s.spheres.end(), 0);
        }
    }
    e.config.obstacles.clear();
    ClutterSpec clutter;
    clutter.count = obstacles;
    e.config.clutter = clutter;
    return e;
}

BenchRow bench_experiment(const BenchExperiment& experiment, int trials)
{
    BenchRow row;
    row.experiment = experiment.name;
    ScenarioConfig c = experiment.config;
    c.mode = ControlMode::Velocity;
    row.velocity = benchmark(c, trials);
    c.mode = ControlMode::Torque;
    row.torque = benchmark(c, trials);
    row.constraints = row.velocity.constraints;
    return row;
}

}  // namespace oscbf

#pragma once

#include <string>
#include <vector>

#include "oscbf/telemetry.hpp"

namespace oscbf {

struct BenchExperiment {
    std::string name;
    ScenarioConfig config;
};

/// The six rows of the timing table: each barrier family of `base` alone,
/// then all of them together.
std::vector<BenchExperiment> table_experiments(const ScenarioConfig& base);

/// Collision rows only, against `obstacles` clutter spheres (21 rows per
/// obstacle on a 21-sphere model). `spheres` > 0 keeps only that many robot
/// spheres.
BenchExperiment collision_scaling_experiment(const ScenarioConfig& base, int obstacles, int spheres = 0);

/// Timing of one experiment in both control modes.
BenchRow bench_experiment(const BenchExperiment& experiment, int trials);

}  // namespace oscbf

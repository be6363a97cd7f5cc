#pragma once

#include <functional>
#include <random>

#include <nlohmann/json.hpp>

#include "oscbf/simulator.hpp"

namespace test {

using namespace oscbf;

inline RobotModel model(const std::string& name) { return load_robot_model(data_dir() / "models" / (name + ".json")); }
inline RobotModel panda() { return model("panda"); }
inline RobotModel planar2r() { return model("planar2r"); }
inline RobotModel planar3r() { return model("planar3r"); }

inline std::filesystem::path scenario_path(const std::string& name) { return data_dir() / "scenarios" / (name + ".json"); }

inline Vec random_q(const RobotModel& m, std::mt19937_64& rng, double margin = 0.1)
{
    Vec q(m.dof());
    for (int i = 0; i < m.dof(); ++i) {
        std::uniform_real_distribution<double> d(m.limits().q_min[i] + margin, m.limits().q_max[i] - margin);
        q[i] = d(rng);
    }
    return q;
}

inline Vec random_vec(int n, std::mt19937_64& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> d(-scale, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

/// Central-difference Jacobian of f at x.
inline Mat central_difference(const std::function<Vec(const Vec&)>& f, const Vec& x, double step = 1e-6)
{
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        Vec xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return J;
}

/// Single-link or multi-link chain written out as JSON, for hand-built cases.
inline nlohmann::json chain_doc(const std::vector<nlohmann::json>& joints, double link_length = 1.0)
{
    nlohmann::json links = nlohmann::json::array();
    for (std::size_t i = 0; i < joints.size(); ++i) {
        links.push_back({{"mass", 1.0}, {"com", {0.5 * link_length, 0.0, 0.0}}, {"inertia", {0.01, 0, 0, 0.01, 0, 0.01}}});
    }
    const int n = static_cast<int>(joints.size());
    const auto filled = [n](double v) { return std::vector<double>(static_cast<std::size_t>(n), v); };
    return {{"name", "chain"},
            {"joints", joints},
            {"links", links},
            {"collision_spheres", nlohmann::json::array()},
            {"self_collision_pairs", nlohmann::json::array()},
            {"limits",
             {{"q_min", filled(-3.0)},
              {"q_max", filled(3.0)},
              {"qd_min", filled(-2.0)},
              {"qd_max", filled(2.0)},
              {"tau_min", filled(-50.0)},
              {"tau_max", filled(50.0)}}},
            {"ee_frame", {{"xyz", {link_length, 0.0, 0.0}}, {"rpy", {0.0, 0.0, 0.0}}}}};
}

}  // namespace test

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace oscbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Pose = Eigen::Isometry3d;

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Damped inversion of J M^-1 J^T failed; callers should rely on the singularity barrier.
struct SingularOpSpaceInertia : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two sphere centers coincide, the distance gradient is undefined.
struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3& v)
{
    Mat3 s;
    s << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return s;
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what)
{
    if (got != want) {
        throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(want) +
                                ", got " + std::to_string(got));
    }
}

}  // namespace oscbf

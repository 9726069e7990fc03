#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace m3p {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline constexpr double kPi = std::numbers::pi;

// Wraps into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

struct RobotState {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Vec2 position() const { return {x, y}; }
    Vec3 vec() const { return {x, y, theta}; }
    static RobotState from_vec(const Vec3 &v) { return {v.x(), v.y(), wrap_angle(v.z())}; }

    bool operator==(const RobotState &) const = default;
};

struct Control {
    double v = 0.0;      // m/s
    double omega = 0.0;  // rad/s

    bool operator==(const Control &) const = default;
};

// Process noise sample (n_v, n_omega).
struct ProcessNoise {
    double n_v = 0.0;
    double n_omega = 0.0;
};

// Errors. Everything the library throws derives from Error so callers can
// tell library failures from std::bad_alloc and friends.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenario file did not parse. `line` is 1-based, 0 when unknown.
struct SchemaError : Error {
    SchemaError(const std::string &msg, int line_no) : Error(msg), line(line_no) {}
    int line = 0;
};

struct ValidationError : Error {
    ValidationError(const std::string &field_name, const std::string &msg)
        : Error(field_name + ": " + msg), field(field_name) {}
    std::string field;
};

struct DegenerateGeometryError : Error {
    using Error::Error;
};
struct SamplingError : Error {
    using Error::Error;
};
struct DegenerateBeliefError : Error {
    using Error::Error;
};
struct FilterDegeneracyError : Error {
    using Error::Error;
};
struct NoTargetError : Error {
    using Error::Error;
};
struct PlanningFailure : Error {
    using Error::Error;
};
struct PlannerStuckError : Error {
    using Error::Error;
};
struct RecoveryTimeout : Error {
    using Error::Error;
};
struct RenderError : Error {
    using Error::Error;
};

}  // namespace m3p

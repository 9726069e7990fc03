#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "m3p/m3p.hpp"

namespace m3p::test {

inline geometry::ConvexPolygon box(double x0, double y0, double x1, double y1) {
    return geometry::ConvexPolygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

inline Environment world(double w, double h, std::vector<Obstacle> obstacles,
                         std::vector<Landmark> landmarks, double radius = 0.2,
                         SensorParams sensor = {}) {
    return Environment(geometry::Aabb{{0.0, 0.0}, {w, h}}, std::move(obstacles),
                       std::move(landmarks), radius, sensor);
}

inline Scenario shipped(const std::string &name) { return load_scenario(resolve_scenario(name)); }

inline GaussianMode mode_at(const RobotState &s, double w = 1.0) {
    GaussianMode m;
    m.weight = w;
    m.mean = s;
    m.cov = Vec3(0.01, 0.01, 0.003).asDiagonal();
    return m;
}

inline bool spd(const Mat3 &m) { return Eigen::LLT<Mat3>(m).info() == Eigen::Success; }

// Frobenius-norm relative error of an analytic matrix against a reference.
template <typename A, typename B>
double relative_error(const A &analytic, const B &reference) {
    const double scale = std::max(reference.norm(), 1e-12);
    return (analytic - reference).norm() / scale;
}

}  // namespace m3p::test

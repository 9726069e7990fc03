#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "m3p/environment.hpp"
#include "m3p/types.hpp"

namespace m3p {

// One range-bearing reading. `landmark_index` is the map index when the
// reading was predicted from a hypothesis; sensed readings carry -1 because the
// sensor only reports the (ambiguous) id.
struct Observation {
    int landmark_id = 0;
    double range = 0.0;
    double bearing = 0.0;
    Mat2 noise_cov = Mat2::Identity();
    int landmark_index = -1;
};

using ObservationVector = std::vector<Observation>;

struct MotionJacobians {
    Mat3 state;   // df/dx
    Mat32 noise;  // df/dw
};

inline RobotState propagate(const RobotState &s, const Control &u, const ProcessNoise &w,
                            double dt) {
    const double v = u.v + w.n_v;
    return {s.x + v * dt * std::cos(s.theta), s.y + v * dt * std::sin(s.theta),
            wrap_angle(s.theta + (u.omega + w.n_omega) * dt)};
}

inline RobotState propagate(const RobotState &s, const Control &u, double dt) {
    return propagate(s, u, ProcessNoise{}, dt);
}

inline MotionJacobians motion_jacobians(const RobotState &s, const Control &u, double dt) {
    const double c = std::cos(s.theta);
    const double sn = std::sin(s.theta);
    MotionJacobians j;
    j.state << 1.0, 0.0, -u.v * dt * sn,  //
        0.0, 1.0, u.v * dt * c,           //
        0.0, 0.0, 1.0;
    j.noise << dt * c, 0.0,  //
        dt * sn, 0.0,        //
        0.0, dt;
    return j;
}

inline Mat2 observation_noise(const SensorParams &sensor, double distance) {
    const double sr = sensor.eta_r * distance + sensor.sigma_b_r;
    const double sb = sensor.eta_theta * distance + sensor.sigma_b_theta;
    Mat2 r = Mat2::Zero();
    r(0, 0) = sr * sr;
    r(1, 1) = sb * sb;
    return r;
}

inline Observation observe_landmark(const SensorParams &sensor, const RobotState &s,
                                    const Landmark &landmark, int index) {
    const Vec2 d = landmark.position - s.position();
    const double range = d.norm();
    return {landmark.id, range, wrap_angle(std::atan2(d.y(), d.x()) - s.theta),
            observation_noise(sensor, range), index};
}

// Noise-free readings of every visible landmark, ascending landmark index.
inline ObservationVector predict_observation(const Environment &env, const RobotState &s) {
    ObservationVector out;
    for (const auto i : env.visible_landmark_indices(s)) {
        out.push_back(observe_landmark(env.sensor(), s, env.landmarks()[i], static_cast<int>(i)));
    }
    return out;
}

// Noisy readings. The attached covariance is evaluated at the measured range,
// which is what a robot that does not know its true distance can compute.
template <typename Rng>
ObservationVector sample_observation(const Environment &env, const RobotState &truth, Rng &rng) {
    ObservationVector out = predict_observation(env, truth);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (auto &z : out) {
        const double sr = std::sqrt(z.noise_cov(0, 0));
        const double sb = std::sqrt(z.noise_cov(1, 1));
        const double nr = unit(rng);
        const double nb = unit(rng);
        if (sr > 0.0 || sb > 0.0) {
            z.range = std::max(0.0, z.range + sr * nr);
            z.bearing = wrap_angle(z.bearing + sb * nb);
            z.noise_cov = observation_noise(env.sensor(), z.range);
        }
        z.landmark_index = -1;
    }
    return out;
}

inline constexpr double kMinLandmarkDistance = 1e-6;

// d(range, bearing) / d(x, y, theta) for one landmark.
inline Mat23 obs_jacobian(const RobotState &s, const Landmark &landmark) {
    const Vec2 d = landmark.position - s.position();
    const double q = d.squaredNorm();
    const double r = std::sqrt(q);
    if (r <= kMinLandmarkDistance) {
        throw DegenerateGeometryError("landmark coincides with robot position");
    }
    Mat23 h;
    h << -d.x() / r, -d.y() / r, 0.0,  //
        d.y() / q, -d.x() / q, -1.0;
    return h;
}

}  // namespace m3p

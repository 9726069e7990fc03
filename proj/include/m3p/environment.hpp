#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "m3p/geometry.hpp"
#include "m3p/types.hpp"

namespace m3p {

struct Landmark {
    // Not unique: several landmarks may share an id, which is what makes data
    // association ambiguous.
    int id = 0;
    Vec2 position{0.0, 0.0};
};

using Obstacle = geometry::ConvexPolygon;

// Range-bearing beacon sensor. Noise std grows linearly with distance:
// sigma_r = eta_r * d + sigma_b_r, sigma_theta = eta_theta * d + sigma_b_theta.
struct SensorParams {
    double range = 4.0;
    double eta_r = 0.08;
    double eta_theta = 0.02;
    double sigma_b_r = 0.05;
    double sigma_b_theta = 0.005;
    bool occlusion = true;
};

class Environment {
   public:
    Environment() = default;
    Environment(geometry::Aabb bounds, std::vector<Obstacle> obstacles,
                std::vector<Landmark> landmarks, double robot_radius, SensorParams sensor)
        : bounds_(bounds),
          obstacles_(std::move(obstacles)),
          landmarks_(std::move(landmarks)),
          robot_radius_(robot_radius),
          sensor_(sensor) {
        validate();
    }

    const geometry::Aabb &bounds() const { return bounds_; }
    const std::vector<Obstacle> &obstacles() const { return obstacles_; }
    const std::vector<Landmark> &landmarks() const { return landmarks_; }
    double robot_radius() const { return robot_radius_; }
    const SensorParams &sensor() const { return sensor_; }

    // Interpolation step used by segment_valid.
    double check_resolution() const { return robot_radius_ / 2.0; }

    bool is_state_valid(const RobotState &s) const { return is_position_valid(s.position()); }

    // Disc of robot_radius (+ inflation) strictly inside bounds and clear of every obstacle.
    bool is_position_valid(const Vec2 &p, double inflation = 0.0) const {
        const double r = robot_radius_ + inflation;
        if (p.x() - r < bounds_.min.x() || p.x() + r > bounds_.max.x() ||
            p.y() - r < bounds_.min.y() || p.y() + r > bounds_.max.y()) {
            return false;
        }
        for (const auto &obstacle : obstacles_) {
            if (obstacle.bounding_box().distance(p) > r) continue;
            if (obstacle.distance(p) <= r) return false;
        }
        return true;
    }

    bool segment_valid(const RobotState &a, const RobotState &b) const {
        return segment_valid(a.position(), b.position());
    }

    // Samples every check_resolution() along the segment. Endpoints are put in
    // a canonical order first so segment_valid(a, b) == segment_valid(b, a) bit for bit.
    bool segment_valid(const Vec2 &a, const Vec2 &b, double inflation = 0.0) const {
        const bool swap = std::make_pair(b.x(), b.y()) < std::make_pair(a.x(), a.y());
        const Vec2 &p = swap ? b : a;
        const Vec2 &q = swap ? a : b;
        const double length = (q - p).norm();
        const auto steps = static_cast<int>(std::ceil(length / check_resolution()));
        if (steps == 0) return is_position_valid(p, inflation);
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            if (!is_position_valid(p + t * (q - p), inflation)) return false;
        }
        return true;
    }

    bool line_of_sight(const Vec2 &from, const Vec2 &to) const {
        if (!sensor_.occlusion) return true;
        for (const auto &obstacle : obstacles_) {
            if (obstacle.intersects_segment(from, to)) return false;
        }
        return true;
    }

    bool is_visible(const Vec2 &from, const Landmark &landmark) const {
        return (landmark.position - from).norm() <= sensor_.range &&
               line_of_sight(from, landmark.position);
    }

    // Indices of visible landmarks, ascending.
    std::vector<std::size_t> visible_landmark_indices(const RobotState &s) const {
        std::vector<std::size_t> out;
        const Vec2 p = s.position();
        for (std::size_t i = 0; i < landmarks_.size(); ++i) {
            if (is_visible(p, landmarks_[i])) out.push_back(i);
        }
        return out;
    }

    std::vector<Landmark> visible_landmarks(const RobotState &s) const {
        std::vector<Landmark> out;
        for (const auto i : visible_landmark_indices(s)) out.push_back(landmarks_[i]);
        return out;
    }

    // Visibility that survives a position perturbation of `margin`: in range by
    // `margin` and line of sight clear from the position and from its two
    // sideways offsets.
    bool robustly_visible(const Vec2 &from, const Landmark &landmark, double margin) const {
        const Vec2 d = landmark.position - from;
        const double dist = d.norm();
        if (dist > sensor_.range - margin) return false;
        if (!sensor_.occlusion) return true;
        if (dist == 0.0) return true;
        const Vec2 side = Vec2(-d.y(), d.x()) / dist * margin;
        return line_of_sight(from, landmark.position) &&
               line_of_sight(from + side, landmark.position) &&
               line_of_sight(from - side, landmark.position);
    }

    // Complement of "robustly invisible": could plausibly be seen after a
    // perturbation of `margin`.
    bool possibly_visible(const Vec2 &from, const Landmark &landmark, double margin) const {
        const Vec2 d = landmark.position - from;
        const double dist = d.norm();
        if (dist > sensor_.range + margin) return false;
        if (!sensor_.occlusion || dist == 0.0) return true;
        const Vec2 side = Vec2(-d.y(), d.x()) / dist * margin;
        return line_of_sight(from, landmark.position) ||
               line_of_sight(from + side, landmark.position) ||
               line_of_sight(from - side, landmark.position);
    }

   private:
    void validate() const {
        if (!(robot_radius_ > 0.0)) throw ValidationError("robot_radius", "must be > 0");
        if (!(bounds_.max.x() > bounds_.min.x() && bounds_.max.y() > bounds_.min.y())) {
            throw ValidationError("bounds", "empty rectangle");
        }
        if (!(sensor_.range > 0.0)) throw ValidationError("sensor.r_sensor", "must be > 0");
        for (std::size_t i = 0; i < obstacles_.size(); ++i) {
            const auto &o = obstacles_[i];
            const std::string field = "obstacles[" + std::to_string(i) + "]";
            if (o.size() < 3) throw ValidationError(field, "needs at least 3 vertices");
            if (!o.is_convex_ccw()) {
                throw ValidationError(field, "must be convex, counter-clockwise, non-self-intersecting");
            }
            for (const auto &v : o.vertices()) {
                if (!bounds_.contains(v)) throw ValidationError(field, "vertex outside bounds");
            }
        }
        for (std::size_t i = 0; i < landmarks_.size(); ++i) {
            if (!bounds_.contains(landmarks_[i].position)) {
                throw ValidationError("landmarks[" + std::to_string(i) + "]", "outside bounds");
            }
        }
    }

    geometry::Aabb bounds_;
    std::vector<Obstacle> obstacles_;
    std::vector<Landmark> landmarks_;
    double robot_radius_ = 0.2;
    SensorParams sensor_;
};

}  // namespace m3p

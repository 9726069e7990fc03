#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "m3p/types.hpp"

namespace m3p::geometry {

inline double cross(const Vec2 &a, const Vec2 &b) { return a.x() * b.y() - a.y() * b.x(); }

inline double point_segment_distance(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Closed segments, touching counts.
inline bool segments_intersect(const Vec2 &p1, const Vec2 &p2, const Vec2 &q1, const Vec2 &q2) {
    const auto orient = [](const Vec2 &a, const Vec2 &b, const Vec2 &c) {
        const double v = cross(b - a, c - a);
        return (v > 0.0) - (v < 0.0);
    };
    const auto on_segment = [](const Vec2 &a, const Vec2 &b, const Vec2 &c) {
        return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) &&
               std::min(a.y(), b.y()) <= c.y() && c.y() <= std::max(a.y(), b.y());
    };
    const int o1 = orient(p1, p2, q1);
    const int o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1);
    const int o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

inline double segment_segment_distance(const Vec2 &p1, const Vec2 &p2, const Vec2 &q1,
                                       const Vec2 &q2) {
    if (segments_intersect(p1, p2, q1, q2)) return 0.0;
    return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                     point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

struct Aabb {
    Vec2 min{0.0, 0.0};
    Vec2 max{0.0, 0.0};

    bool contains(const Vec2 &p) const {
        return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
    }
    double distance(const Vec2 &p) const {
        const double dx = std::max({min.x() - p.x(), 0.0, p.x() - max.x()});
        const double dy = std::max({min.y() - p.y(), 0.0, p.y() - max.y()});
        return std::hypot(dx, dy);
    }
    double width() const { return max.x() - min.x(); }
    double height() const { return max.y() - min.y(); }
};

// Convex polygon, counter-clockwise vertex order.
class ConvexPolygon {
   public:
    ConvexPolygon() = default;
    explicit ConvexPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
        box_.min = Vec2::Constant(std::numeric_limits<double>::infinity());
        box_.max = Vec2::Constant(-std::numeric_limits<double>::infinity());
        for (const auto &v : vertices_) {
            box_.min = box_.min.cwiseMin(v);
            box_.max = box_.max.cwiseMax(v);
        }
    }

    const std::vector<Vec2> &vertices() const { return vertices_; }
    const Aabb &bounding_box() const { return box_; }
    std::size_t size() const { return vertices_.size(); }
    Vec2 edge_start(std::size_t i) const { return vertices_[i]; }
    Vec2 edge_end(std::size_t i) const { return vertices_[(i + 1) % vertices_.size()]; }

    // Interior or boundary.
    bool contains(const Vec2 &p) const {
        if (!box_.contains(p)) return false;
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (cross(edge_end(i) - edge_start(i), p - edge_start(i)) < 0.0) return false;
        }
        return true;
    }

    // Zero inside.
    double distance(const Vec2 &p) const {
        if (contains(p)) return 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            best = std::min(best, point_segment_distance(p, edge_start(i), edge_end(i)));
        }
        return best;
    }

    bool intersects_segment(const Vec2 &a, const Vec2 &b) const {
        const Aabb seg{a.cwiseMin(b), a.cwiseMax(b)};
        if (seg.max.x() < box_.min.x() || seg.min.x() > box_.max.x() ||
            seg.max.y() < box_.min.y() || seg.min.y() > box_.max.y()) {
            return false;
        }
        if (contains(a) || contains(b)) return true;
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (segments_intersect(a, b, edge_start(i), edge_end(i))) return true;
        }
        return false;
    }

    double segment_distance(const Vec2 &a, const Vec2 &b) const {
        if (intersects_segment(a, b)) return 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            best = std::min(best, segment_segment_distance(a, b, edge_start(i), edge_end(i)));
        }
        return best;
    }

    double signed_area() const {
        double area = 0.0;
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            area += cross(edge_start(i), edge_end(i));
        }
        return 0.5 * area;
    }

    // Strictly convex or with collinear runs, CCW, no self intersection.
    bool is_convex_ccw() const {
        const std::size_t n = vertices_.size();
        if (n < 3) return false;
        if (signed_area() <= 0.0) return false;
        double total_turn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 e0 = edge_end(i) - edge_start(i);
            const Vec2 e1 = edge_end((i + 1) % n) - edge_start((i + 1) % n);
            if (e0.squaredNorm() == 0.0) return false;
            if (cross(e0, e1) < 0.0) return false;
            total_turn += std::atan2(cross(e0, e1), e0.dot(e1));
        }
        // Winding once; a star-shaped self-intersecting loop turns 4*pi.
        return std::abs(total_turn - 2.0 * kPi) < 1e-6;
    }

   private:
    std::vector<Vec2> vertices_;
    Aabb box_;
};

}  // namespace m3p::geometry

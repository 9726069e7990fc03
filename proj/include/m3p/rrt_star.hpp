#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "m3p/dynamics.hpp"
#include "m3p/environment.hpp"

namespace m3p {

struct RrtParams {
    int iterations = 5000;
    double goal_bias = 0.05;
    double max_step = 1.0;        // steering distance, m
    double goal_tolerance = 0.2;  // eps_xy, m
    double heading_tolerance = 0.2;  // eps_theta, rad
    // Extra clearance used by the planner on top of the robot radius so that
    // open-loop execution with process noise keeps off the walls.
    double inflation = 0.0;
    double dt = 0.1;
    double v_max = 0.5;
    double omega_max = 1.0;
    std::uint64_t seed = 1;
};

// Finite control sequence at a fixed dt.
struct OpenLoopPolicy {
    std::vector<Control> controls;
    double dt = 0.1;
    int source_mode = -1;
    int target_node = -1;
    std::vector<Vec2> waypoints;  // geometric path, start first

    bool empty() const { return controls.empty(); }
    std::size_t size() const { return controls.size(); }
};

inline double path_length(const std::vector<Vec2> &waypoints) {
    double total = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) total += (waypoints[i] - waypoints[i - 1]).norm();
    return total;
}

namespace detail {

inline void append_rotation(std::vector<Control> &out, RobotState &pose, double heading,
                            const RrtParams &p) {
    const double delta = wrap_angle(heading - pose.theta);
    if (std::abs(delta) < 1e-12) return;
    const auto n = static_cast<int>(std::ceil(std::abs(delta) / (p.omega_max * p.dt) - 1e-12));
    const Control u{0.0, delta / (n * p.dt)};
    for (int i = 0; i < n; ++i) {
        out.push_back(u);
        pose = propagate(pose, u, p.dt);
    }
}

inline void append_translation(std::vector<Control> &out, RobotState &pose, double distance,
                               const RrtParams &p) {
    if (distance < 1e-12) return;
    const auto n = static_cast<int>(std::ceil(distance / (p.v_max * p.dt) - 1e-12));
    const Control u{distance / (n * p.dt), 0.0};
    for (int i = 0; i < n; ++i) {
        out.push_back(u);
        pose = propagate(pose, u, p.dt);
    }
}

}  // namespace detail

// Rotate-toward-waypoint then drive, for every path segment, then turn to the
// goal heading. Each phase is split into equal steps inside the actuation
// limits, so noiseless propagation lands on the waypoints.
inline std::vector<Control> path_to_controls(const RobotState &start,
                                             const std::vector<Vec2> &waypoints,
                                             double goal_heading, const RrtParams &p) {
    std::vector<Control> out;
    RobotState pose = start;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const Vec2 d = waypoints[i] - pose.position();
        const double dist = d.norm();
        if (dist < 1e-9) continue;
        detail::append_rotation(out, pose, std::atan2(d.y(), d.x()), p);
        detail::append_translation(out, pose, dist, p);
    }
    detail::append_rotation(out, pose, goal_heading, p);
    return out;
}

// Geometric RRT* over (x, y). Throws PlanningFailure when no node reaches the
// goal tolerance within the iteration budget.
inline std::vector<Vec2> rrtstar_path(const Environment &env, const Vec2 &start, const Vec2 &goal,
                                      const RrtParams &p) {
    if (!env.is_position_valid(start)) throw PlanningFailure("start state is invalid");
    if (!env.is_position_valid(goal)) throw PlanningFailure("goal state is invalid");
    if ((goal - start).norm() <= 1e-12) return {start};

    struct Node {
        Vec2 pos;
        int parent;
        double cost;
    };
    std::vector<Node> tree{{start, -1, 0.0}};
    tree.reserve(static_cast<std::size_t>(p.iterations) + 1);
    std::vector<std::vector<int>> children(1);

    // Edges leaving the root are checked without inflation: a hypothesis may
    // start closer to a wall than the planning clearance.
    const auto edge_ok = [&](int from, const Vec2 &to) {
        const Vec2 &a = tree[static_cast<std::size_t>(from)].pos;
        if (env.segment_valid(a, to, p.inflation)) return true;
        return from == 0 && env.segment_valid(a, to, 0.0);
    };

    const auto &b = env.bounds();
    const double area = b.width() * b.height();
    const double gamma = 2.0 * std::sqrt(1.5) * std::sqrt(area / kPi);
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> ux(b.min.x(), b.max.x());
    std::uniform_real_distribution<double> uy(b.min.y(), b.max.y());
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    const auto propagate_cost = [&](int root) {
        std::vector<int> stack{root};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (const int c : children[static_cast<std::size_t>(v)]) {
                auto &child = tree[static_cast<std::size_t>(c)];
                child.cost = tree[static_cast<std::size_t>(v)].cost +
                             (child.pos - tree[static_cast<std::size_t>(v)].pos).norm();
                stack.push_back(c);
            }
        }
    };

    std::vector<int> near;
    for (int it = 0; it < p.iterations; ++it) {
        const Vec2 sample = coin(rng) < p.goal_bias ? goal : Vec2(ux(rng), uy(rng));
        int nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < tree.size(); ++i) {
            const double d = (tree[i].pos - sample).squaredNorm();
            if (d < best) {
                best = d;
                nearest = static_cast<int>(i);
            }
        }
        const Vec2 from = tree[static_cast<std::size_t>(nearest)].pos;
        Vec2 to = sample;
        const double dist = (sample - from).norm();
        if (dist > p.max_step) to = from + (sample - from) * (p.max_step / dist);
        if (dist < 1e-9) continue;
        if (!env.is_position_valid(to, p.inflation)) continue;
        if (!edge_ok(nearest, to)) continue;

        const double n = static_cast<double>(tree.size() + 1);
        const double radius = std::min(p.max_step, gamma * std::sqrt(std::log(n) / n));
        near.clear();
        for (std::size_t i = 0; i < tree.size(); ++i) {
            if ((tree[i].pos - to).norm() <= radius) near.push_back(static_cast<int>(i));
        }

        int parent = nearest;
        double cost = tree[static_cast<std::size_t>(nearest)].cost + (to - from).norm();
        for (const int c : near) {
            if (c == nearest) continue;
            const auto &cand = tree[static_cast<std::size_t>(c)];
            const double through = cand.cost + (to - cand.pos).norm();
            if (through < cost && edge_ok(c, to)) {
                cost = through;
                parent = c;
            }
        }
        const int id = static_cast<int>(tree.size());
        tree.push_back({to, parent, cost});
        children.emplace_back();
        children[static_cast<std::size_t>(parent)].push_back(id);

        for (const int c : near) {
            if (c == parent || c == 0) continue;
            auto &cand = tree[static_cast<std::size_t>(c)];
            const double through = cost + (cand.pos - to).norm();
            if (through + 1e-12 < cand.cost && env.segment_valid(to, cand.pos, p.inflation)) {
                auto &siblings = children[static_cast<std::size_t>(cand.parent)];
                siblings.erase(std::remove(siblings.begin(), siblings.end(), c), siblings.end());
                cand.parent = id;
                cand.cost = through;
                children[static_cast<std::size_t>(id)].push_back(c);
                propagate_cost(c);
            }
        }
    }

    // Best node within tolerance; connect straight to the exact goal when possible.
    int best_node = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    bool exact = false;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const double d = (tree[i].pos - goal).norm();
        if (d > p.goal_tolerance) continue;
        const bool direct = d < 1e-12 || edge_ok(static_cast<int>(i), goal);
        const double c = tree[i].cost + (direct ? d : 0.0);
        if (c < best_cost) {
            best_cost = c;
            best_node = static_cast<int>(i);
            exact = direct;
        }
    }
    if (best_node < 0) throw PlanningFailure("no path to goal within the iteration budget");

    std::vector<Vec2> path;
    for (int v = best_node; v >= 0; v = tree[static_cast<std::size_t>(v)].parent) {
        path.push_back(tree[static_cast<std::size_t>(v)].pos);
    }
    std::reverse(path.begin(), path.end());
    if (exact && (path.back() - goal).norm() > 1e-12) path.push_back(goal);
    return path;
}

inline OpenLoopPolicy rrtstar_plan(const Environment &env, const RobotState &start,
                                   const RobotState &goal, const RrtParams &p) {
    OpenLoopPolicy policy;
    policy.dt = p.dt;
    policy.waypoints = rrtstar_path(env, start.position(), goal.position(), p);
    policy.controls = path_to_controls(start, policy.waypoints, goal.theta, p);
    return policy;
}

}  // namespace m3p

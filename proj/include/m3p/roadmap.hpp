#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "m3p/environment.hpp"

namespace m3p {

// Undirected roadmap over poses; edges are straight segments that pass
// segment_valid with the configured clearance.
class Roadmap {
   public:
    struct Neighbor {
        std::size_t node = 0;
        double cost = 0.0;
    };

    Roadmap() = default;

    Roadmap(const Environment &env, std::vector<RobotState> nodes, double connection_radius,
            double inflation)
        : radius_(connection_radius), inflation_(inflation) {
        for (const auto &n : nodes) add_isolated(n);
        for (std::size_t a = 0; a < nodes_.size(); ++a) {
            for (std::size_t b = a + 1; b < nodes_.size(); ++b) {
                const double d = distance(a, b);
                if (d <= radius_ && env.segment_valid(nodes_[a].position(), nodes_[b].position(),
                                                      inflation_)) {
                    connect(a, b, d);
                }
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<RobotState> &nodes() const { return nodes_; }
    const std::vector<Neighbor> &neighbors(std::size_t v) const { return adjacency_[v]; }

    // Adds `pose` and links it to up to k nearest nodes reachable by a valid
    // segment. Falls back to the unpadded check when no padded link exists.
    std::size_t add_node(const Environment &env, const RobotState &pose, int k) {
        std::vector<std::size_t> order(nodes_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = (nodes_[a].position() - pose.position()).squaredNorm();
            const double db = (nodes_[b].position() - pose.position()).squaredNorm();
            return da < db || (da == db && a < b);
        });
        const std::size_t id = add_isolated(pose);
        for (const double pad : {inflation_, 0.0}) {
            int linked = 0;
            for (const auto v : order) {
                if (linked >= k) break;
                if (env.segment_valid(pose.position(), nodes_[v].position(), pad)) {
                    connect(id, v, distance(id, v));
                    ++linked;
                }
            }
            if (linked > 0 || pad == 0.0) break;
        }
        return id;
    }

    // A* with the Euclidean heuristic. Empty result when unreachable.
    std::vector<std::size_t> shortest_path(std::size_t from, std::size_t to) const {
        const std::size_t n = nodes_.size();
        std::vector<double> g(n, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> parent(n, n);
        std::vector<char> closed(n, 0);
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
        g[from] = 0.0;
        open.push({distance(from, to), from});
        while (!open.empty()) {
            const auto [f, v] = open.top();
            open.pop();
            if (closed[v]) continue;
            closed[v] = 1;
            if (v == to) break;
            for (const auto &e : adjacency_[v]) {
                const double cand = g[v] + e.cost;
                if (cand < g[e.node]) {
                    g[e.node] = cand;
                    parent[e.node] = v;
                    open.push({cand + distance(e.node, to), e.node});
                }
            }
        }
        if (!closed[to]) return {};
        std::vector<std::size_t> path{to};
        while (path.back() != from) path.push_back(parent[path.back()]);
        std::reverse(path.begin(), path.end());
        return path;
    }

   private:
    double distance(std::size_t a, std::size_t b) const {
        return (nodes_[a].position() - nodes_[b].position()).norm();
    }

    std::size_t add_isolated(const RobotState &pose) {
        nodes_.push_back(pose);
        adjacency_.emplace_back();
        return nodes_.size() - 1;
    }

    void connect(std::size_t a, std::size_t b, double cost) {
        adjacency_[a].push_back({b, cost});
        adjacency_[b].push_back({a, cost});
    }

    std::vector<RobotState> nodes_;
    std::vector<std::vector<Neighbor>> adjacency_;
    double radius_ = 0.0;
    double inflation_ = 0.0;
};

}  // namespace m3p

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <set>
#include <vector>

#include "m3p/belief.hpp"
#include "m3p/environment.hpp"

namespace m3p {

// Poses linked by how many landmark ids they co-observe. Heavily weighted
// edges mean "these two places look alike".
class UniquenessGraph {
   public:
    struct Edge {
        std::size_t a = 0;
        std::size_t b = 0;
        int weight = 0;
    };

    UniquenessGraph() = default;

    UniquenessGraph(std::vector<RobotState> nodes, std::vector<std::vector<int>> visible_ids)
        : nodes_(std::move(nodes)), visible_ids_(std::move(visible_ids)) {
        for (auto &ids : visible_ids_) std::sort(ids.begin(), ids.end());
        const std::size_t n = nodes_.size();
        weights_.assign(n * n, 0);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                const int w = shared_count(visible_ids_[a], visible_ids_[b]);
                weights_[a * n + b] = w;
                weights_[b * n + a] = w;
                if (w > 0) edges_.push_back({a, b, w});
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<RobotState> &nodes() const { return nodes_; }
    const std::vector<int> &visible_ids(std::size_t node) const { return visible_ids_[node]; }
    const std::vector<Edge> &edges() const { return edges_; }
    int weight(std::size_t a, std::size_t b) const { return weights_[a * nodes_.size() + b]; }

    // Multiset intersection of two sorted id lists.
    static int shared_count(const std::vector<int> &a, const std::vector<int> &b) {
        int count = 0;
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] < b[j]) {
                ++i;
            } else if (b[j] < a[i]) {
                ++j;
            } else {
                ++count;
                ++i;
                ++j;
            }
        }
        return count;
    }

   private:
    std::vector<RobotState> nodes_;
    std::vector<std::vector<int>> visible_ids_;
    std::vector<int> weights_;
    std::vector<Edge> edges_;
};

inline UniquenessGraph build_uniqueness_graph(const Environment &env,
                                              const std::vector<RobotState> &roadmap_nodes) {
    std::vector<std::vector<int>> ids;
    ids.reserve(roadmap_nodes.size());
    for (const auto &node : roadmap_nodes) {
        std::vector<int> seen;
        for (const auto &l : env.visible_landmarks(node)) seen.push_back(l.id);
        ids.push_back(std::move(seen));
    }
    return UniquenessGraph(roadmap_nodes, std::move(ids));
}

// Nodes within `radius` of the mean (x, y); falls back to the single nearest
// node (lowest index on ties) when the disc is empty.
inline std::vector<std::size_t> neighborhood(const UniquenessGraph &g, const RobotState &mean,
                                             double radius) {
    std::vector<std::size_t> out;
    std::size_t nearest = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < g.size(); ++v) {
        const double d = (g.nodes()[v].position() - mean.position()).norm();
        if (d <= radius) out.push_back(v);
        if (d < nearest_dist) {
            nearest_dist = d;
            nearest = v;
        }
    }
    if (out.empty() && g.size() > 0) out.push_back(nearest);
    return out;
}

// Total edge weight from `v` into the union of the given node sets.
inline int cross_weight(const UniquenessGraph &g, std::size_t v,
                        const std::set<std::size_t> &rivals) {
    int w = 0;
    for (const auto p : rivals) {
        if (p != v) w += g.weight(v, p);
    }
    return w;
}

// Disambiguation target for mode i: the node of its neighborhood that shares
// the least with every rival mode's neighborhood. Ties go to the lowest index.
inline std::size_t find_target(const UniquenessGraph &g,
                               const std::vector<std::vector<std::size_t>> &neighborhoods,
                               std::size_t i) {
    if (i >= neighborhoods.size() || neighborhoods[i].empty()) {
        throw NoTargetError("mode " + std::to_string(i) + " has an empty neighborhood");
    }
    std::set<std::size_t> rivals;
    for (std::size_t j = 0; j < neighborhoods.size(); ++j) {
        if (j != i) rivals.insert(neighborhoods[j].begin(), neighborhoods[j].end());
    }
    std::vector<std::size_t> candidates = neighborhoods[i];
    std::sort(candidates.begin(), candidates.end());
    std::size_t best = candidates.front();
    int best_weight = std::numeric_limits<int>::max();
    for (const auto v : candidates) {
        const int w = cross_weight(g, v, rivals);
        if (w < best_weight) {
            best_weight = w;
            best = v;
        }
    }
    return best;
}

inline std::vector<std::vector<std::size_t>> mode_neighborhoods(const UniquenessGraph &g,
                                                                const GmmBelief &belief,
                                                                double radius) {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(belief.size());
    for (const auto &m : belief.modes()) out.push_back(neighborhood(g, m.mean, radius));
    return out;
}

inline std::size_t find_target(const UniquenessGraph &g, const GmmBelief &belief, std::size_t i,
                               double radius) {
    return find_target(g, mode_neighborhoods(g, belief, radius), i);
}

}  // namespace m3p

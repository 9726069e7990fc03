#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "m3p/belief.hpp"
#include "m3p/rrt_star.hpp"
#include "m3p/uniqueness_graph.hpp"

namespace m3p {

struct GainParams {
    double c_fail = 1e6;
    // Literal pseudocode variants: gain += n_T - n_0 and
    // delta_j = w_j * sum_i gain_ij. Off by default.
    bool literal_sign = false;
    bool literal_aggregate = false;
};

struct CandidateSet {
    std::vector<OpenLoopPolicy> policies;
};

// gain[i][j]: expected gain of policy j if the robot truly sits at mode i.
struct GainMatrix {
    std::vector<std::vector<double>> gain;
    std::vector<double> aggregate;
};

// Deterministic most-likely rollout of policy under the assumption that mode
// `truth_mode` is the true state. Returns the reduction in the number of modes,
// minus c_fail / k if any mode reaches an invalid state at step k.
inline double expected_info_gain(const Environment &env, const GmmBelief &belief,
                                 const OpenLoopPolicy &policy, std::size_t truth_mode,
                                 const BeliefParams &params, const GainParams &gain = {}) {
    if (policy.empty()) return 0.0;
    RobotState x = belief[truth_mode].mean;
    const auto n0 = static_cast<double>(belief.size());
    GmmBelief b = belief;
    double delta = 0.0;
    for (std::size_t k = 1; k <= policy.size(); ++k) {
        const Control &u = policy.controls[k - 1];
        x = propagate(x, u, params.filter.dt);
        const ObservationVector z = predict_observation(env, x);
        b = belief_step(env, b, u, z, params);
        const bool collided = std::any_of(b.modes().begin(), b.modes().end(), [&](const auto &m) {
            return !env.is_state_valid(m.mean);
        });
        if (collided) {
            delta -= gain.c_fail / static_cast<double>(k);
            break;
        }
    }
    const auto nt = static_cast<double>(b.size());
    delta += gain.literal_sign ? (nt - n0) : (n0 - nt);
    return delta;
}

inline GainMatrix compute_gain_matrix(const Environment &env, const GmmBelief &belief,
                                      const CandidateSet &candidates, const BeliefParams &params,
                                      const GainParams &gain = {}) {
    GainMatrix out;
    const std::size_t n = belief.size();
    const std::size_t m = candidates.policies.size();
    out.gain.assign(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out.gain[i][j] = expected_info_gain(env, belief, candidates.policies[j], i, params, gain);
        }
    }
    out.aggregate.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (gain.literal_aggregate) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += out.gain[i][j];
            const auto src = candidates.policies[j].source_mode;
            const double w = src >= 0 && static_cast<std::size_t>(src) < n
                                 ? belief[static_cast<std::size_t>(src)].weight
                                 : 0.0;
            out.aggregate[j] = w * sum;
        } else {
            for (std::size_t i = 0; i < n; ++i) out.aggregate[j] += belief[i].weight * out.gain[i][j];
        }
    }
    return out;
}

// First index of the maximum.
inline std::size_t argmax_first(const std::vector<double> &values) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < values.size(); ++j) {
        if (values[j] > values[best]) best = j;
    }
    return best;
}

struct PolicyParams {
    BeliefParams belief;
    GainParams gain;
    RrtParams rrt;
    double target_radius = 4.0;
};

struct PolicySelection {
    CandidateSet candidates;
    GainMatrix gains;
    std::size_t selected = 0;
    std::vector<int> targets;  // per mode, -1 when excluded
    double radius = 0.0;
    std::size_t rollouts = 0;

    const OpenLoopPolicy &policy() const { return candidates.policies[selected]; }
};

// Candidate per mode (target node + RRT* to it), every candidate scored under
// every mode hypothesis, the best weighted gain wins (lowest index on ties).
inline PolicySelection select_policy(const Environment &env, const GmmBelief &belief,
                                     const UniquenessGraph &graph, const PolicyParams &params,
                                     std::uint64_t seed) {
    PolicySelection out;
    out.radius = params.target_radius;
    const auto hoods = mode_neighborhoods(graph, belief, params.target_radius);
    out.targets.assign(belief.size(), -1);
    for (std::size_t i = 0; i < belief.size(); ++i) {
        std::size_t target = 0;
        try {
            target = find_target(graph, hoods, i);
        } catch (const NoTargetError &) {
            continue;
        }
        RrtParams rrt = params.rrt;
        rrt.seed = seed * 1000003ULL + i;
        try {
            OpenLoopPolicy policy = rrtstar_plan(env, belief[i].mean, graph.nodes()[target], rrt);
            if (policy.empty()) continue;
            policy.source_mode = static_cast<int>(i);
            policy.target_node = static_cast<int>(target);
            out.targets[i] = static_cast<int>(target);
            out.candidates.policies.push_back(std::move(policy));
        } catch (const PlanningFailure &) {
        }
    }
    if (out.candidates.policies.empty()) {
        throw PlannerStuckError("no candidate policy could be generated");
    }
    out.gains = compute_gain_matrix(env, belief, out.candidates, params.belief, params.gain);
    out.rollouts = belief.size() * out.candidates.policies.size();
    out.selected = argmax_first(out.gains.aggregate);
    return out;
}

}  // namespace m3p

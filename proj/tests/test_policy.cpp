#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace m3p;
using test::box;
using test::reference_gain;
using test::mode_at;
using test::world;

namespace {

OpenLoopPolicy straight(int steps, double v = 0.5, double omega = 0.0) {
    OpenLoopPolicy p;
    p.controls.assign(static_cast<std::size_t>(steps), Control{v, omega});
    return p;
}

// Modes far apart; only mode 0 can see landmark 1.
GmmBelief spread_belief(const Environment &, int n) {
    std::vector<GaussianMode> modes;
    for (int i = 0; i < n; ++i) modes.push_back(mode_at({2.0 + 10.0 * i, 2.0, 0.0}, 1.0 / n));
    return GmmBelief(std::move(modes));
}

}  // namespace

TEST(RrtStar, StartAtGoalGivesEmptyPolicy) {
    const auto env = world(10, 10, {}, {});
    const auto p = rrtstar_plan(env, {5, 5, 0.3}, {5, 5, 0.3}, {});
    EXPECT_TRUE(p.empty());
}

TEST(RrtStar, StraightCorridorIsNearlyStraight) {
    const auto env = world(10, 2, {}, {});
    RrtParams rp;
    rp.seed = 3;
    const auto p = rrtstar_plan(env, {1, 1, 0}, {9, 1, 0}, rp);
    EXPECT_LE(path_length(p.waypoints), 8.0 * 1.05);
    EXPECT_GE(path_length(p.waypoints), 8.0 - 1e-9);
}

TEST(RrtStar, SealedGoalFails) {
    const auto env = world(10, 10, {box(6, 6, 9, 6.5), box(6, 8.5, 9, 9), box(6, 6.5, 6.5, 8.5), box(8.5, 6.5, 9, 8.5)}, {});
    RrtParams rp;
    rp.iterations = 1500;
    EXPECT_THROW(rrtstar_plan(env, {2, 2, 0}, {7.5, 7.5, 0}, rp), PlanningFailure);
}

TEST(RrtStar, ControlsRespectLimitsAndReachGoal) {
    const auto env = world(10, 10, {box(4, 0, 5, 7)}, {});
    // Edges are checked at r/2 spacing, which guarantees clearance r * sqrt(15/16).
    const auto shrunk = world(10, 10, {box(4, 0, 5, 7)}, {}, 0.2 * std::sqrt(15.0 / 16.0));
    RrtParams rp;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        rp.seed = seed;
        const RobotState start{2, 2, 0}, goal{8, 2, 1.0};
        const auto p = rrtstar_plan(env, start, goal, rp);
        RobotState s = start;
        for (const auto &u : p.controls) {
            EXPECT_LE(std::abs(u.v), rp.v_max + 1e-12);
            EXPECT_LE(std::abs(u.omega), rp.omega_max + 1e-12);
            s = propagate(s, u, rp.dt);
            EXPECT_TRUE(shrunk.is_state_valid(s));
        }
        EXPECT_LE((s.position() - goal.position()).norm(), rp.goal_tolerance);
        EXPECT_NEAR(wrap_angle(s.theta - goal.theta), 0.0, 1e-9);
        for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
            EXPECT_TRUE(env.segment_valid(p.waypoints[i - 1], p.waypoints[i], 0.0));
        }
    }
}

TEST(RrtStar, SameSeedSamePlan) {
    const auto env = world(10, 10, {box(4, 0, 5, 7)}, {});
    const auto a = rrtstar_plan(env, {2, 2, 0}, {8, 2, 0}, {});
    const auto b = rrtstar_plan(env, {2, 2, 0}, {8, 2, 0}, {});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.controls[i].v, b.controls[i].v);
        EXPECT_EQ(a.controls[i].omega, b.controls[i].omega);
    }
}

TEST(InfoGain, EmptyPolicyIsZero) {
    const auto env = world(40, 4, {}, {{1, {3, 2}}});
    EXPECT_EQ(expected_info_gain(env, spread_belief(env, 3), {}, 0, {}), 0.0);
}

TEST(InfoGain, CollisionAtFourthStep) {
    const auto env = world(4, 2, {box(1.375, 0, 4, 2)}, {});
    const GmmBelief b({mode_at({1.0, 1.0, 0.0})});
    EXPECT_TRUE(env.is_state_valid(propagate(propagate(propagate({1, 1, 0}, {0.5, 0}, 0.1), {0.5, 0}, 0.1), {0.5, 0}, 0.1)));
    EXPECT_EQ(expected_info_gain(env, b, straight(10), 0, {}), -2.5e5);
}

TEST(InfoGain, ReductionFromFourToOne) {
    const auto env = world(40, 4, {}, {{1, {3, 2}}});
    const auto b = spread_belief(env, 4);
    EXPECT_EQ(expected_info_gain(env, b, straight(5, 0.0), 0, {}), 3.0);
    GainParams literal;
    literal.literal_sign = true;
    EXPECT_EQ(expected_info_gain(env, b, straight(5, 0.0), 0, {}, literal), -3.0);
}

TEST(InfoGain, MatchesReferenceRollout) {
    const auto env = world(12, 12, {box(5.5, 0, 6.5, 5)}, {{1, {3, 9}}, {1, {9, 9}}, {2, {3, 3}}, {3, {10, 2}}});
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> pos(1.0, 11.0), th(-kPi, kPi), v(-0.5, 0.5), w(-1.0, 1.0);
    const BeliefParams bp;
    int done = 0;
    while (done < 200) {
        const int n = 1 + static_cast<int>(rng() % 3);
        std::vector<GaussianMode> modes;
        for (int i = 0; i < n; ++i) {
            RobotState s{pos(rng), pos(rng), th(rng)};
            while (!env.is_state_valid(s)) s = {pos(rng), pos(rng), th(rng)};
            modes.push_back(mode_at(s, 1.0 / n));
        }
        const GmmBelief b(std::move(modes));
        OpenLoopPolicy p;
        const int len = 1 + static_cast<int>(rng() % 10);
        for (int k = 0; k < len; ++k) p.controls.push_back({v(rng), w(rng)});
        for (std::size_t i = 0; i < b.size(); ++i) {
            double penalty = 0.0;
            const double integer = reference_gain(env, b, p, i, bp, 1e6, penalty);
            const double got = expected_info_gain(env, b, p, i, bp);
            EXPECT_EQ(std::round(got - penalty), integer);
            EXPECT_NEAR(got - integer, penalty, 1e-9);
        }
        ++done;
    }
}

TEST(InfoGain, NeverGainsModesAndIsDeterministic) {
    const auto env = world(40, 4, {}, {{1, {3, 2}}, {1, {13, 2}}});
    const auto b = spread_belief(env, 4);
    const auto p = straight(8, 0.3, 0.2);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double g = expected_info_gain(env, b, p, i, {});
        EXPECT_GE(g, 0.0);
        EXPECT_LE(g, 3.0);
        EXPECT_EQ(g, expected_info_gain(env, b, p, i, {}));
    }
}

TEST(GainMatrix, WeightedAggregateAndLiteralVariant) {
    const auto env = world(40, 4, {}, {{1, {3, 2}}});
    std::vector<GaussianMode> modes;
    const double w[] = {0.5, 0.3, 0.2};
    for (int i = 0; i < 3; ++i) modes.push_back(mode_at({2.0 + 10.0 * i, 2.0, 0.0}, w[i]));
    const GmmBelief b(std::move(modes));
    CandidateSet c;
    c.policies = {straight(3, 0.0), straight(4, 0.1)};
    c.policies[0].source_mode = 1;
    c.policies[1].source_mode = 2;
    const auto g = compute_gain_matrix(env, b, c, {});
    ASSERT_EQ(g.gain.size(), 3u);
    for (std::size_t j = 0; j < 2; ++j) {
        double expected = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(g.gain[i][j], expected_info_gain(env, b, c.policies[j], i, {}));
            expected += w[i] * g.gain[i][j];
        }
        EXPECT_NEAR(g.aggregate[j], expected, 1e-15);
    }

    GainParams literal;
    literal.literal_aggregate = true;
    const auto l = compute_gain_matrix(env, b, c, {}, literal);
    for (std::size_t j = 0; j < 2; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 3; ++i) sum += l.gain[i][j];
        EXPECT_NEAR(l.aggregate[j], w[c.policies[j].source_mode] * sum, 1e-15);
    }
}

TEST(GainMatrix, ArgmaxTakesFirstOfTies) {
    EXPECT_EQ(argmax_first({1.0, 3.0, 3.0}), 1u);
    EXPECT_EQ(argmax_first({-2.0, -2.0}), 0u);
    EXPECT_EQ(argmax_first({0.0, 1.0, 0.5}), 1u);
}

TEST(SelectPolicy, FourRoomCandidatesAndRollouts) {
    const auto sc = test::shipped("fourroom");
    std::vector<GaussianMode> modes;
    for (int k = 0; k < 4; ++k) modes.push_back(mode_at({2.5 + 6.0 * k, 2.0, kPi / 2}, 0.25));
    const GmmBelief b(std::move(modes));
    const auto graph = build_uniqueness_graph(sc.env, sc.roadmap_nodes);
    const auto rp = recovery_params(sc);
    const PolicyParams pp{rp.belief, rp.gain, rp.rrt, rp.target_radius};
    const auto sel = select_policy(sc.env, b, graph, pp, 1);
    EXPECT_GE(sel.candidates.policies.size(), 1u);
    EXPECT_LE(sel.candidates.policies.size(), 4u);
    EXPECT_EQ(sel.rollouts, 4 * sel.candidates.policies.size());
    EXPECT_EQ(sel.selected, argmax_first(sel.gains.aggregate));
    for (const auto &p : sel.candidates.policies) {
        EXPECT_EQ(sel.targets[static_cast<std::size_t>(p.source_mode)], p.target_node);
    }
}

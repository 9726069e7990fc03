#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "support.hpp"

using namespace m3p;
using test::box;
using test::mode_at;
using test::world;

namespace {

std::vector<Control> forward(int n) { return std::vector<Control>(static_cast<std::size_t>(n), Control{0.5, 0.0}); }

// Settled belief for a scenario with its kidnap destination as the truth,
// computed once per scenario with noiseless sensing.
const GmmBelief &settled(const std::string &name) {
    static std::map<std::string, GmmBelief> cache;
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    const auto sc = test::shipped(name);
    SimWorld sim(sc.env, sc.kidnap.destination, Mat2::Zero(), sc.planner.dt, {}, 1);
    sim.set_noiseless_sensing(true);
    const SensingFn sense = [&]() {
        const Control u{0.0, sc.planner.sweep_rate};
        return std::make_pair(u, sim.step(u).z);
    };
    std::mt19937_64 rng(2);
    auto b = sample_initial_belief(sc.env, sc.planner.initial, sense, belief_params(sc), rng);
    return cache.emplace(name, std::move(b)).first->second;
}

class CountingObserver : public MissionObserver {
   public:
    std::vector<std::size_t> modes;
    std::vector<std::size_t> rollouts;
    std::vector<std::size_t> expected_rollouts;
    void on_epoch(int, std::size_t, const GmmBelief &, const PolicySelection &sel,
                  const EpochRecord &rec) override {
        modes.push_back(rec.modes);
        rollouts.push_back(rec.rollouts);
        expected_rollouts.push_back(sel.candidates.policies.size() * rec.modes);
    }
};

}  // namespace

TEST(Foresee, OpenSpaceIsClear) {
    const auto env = world(20, 20, {}, {});
    const GmmBelief b({mode_at({5, 5, 0}), mode_at({10, 10, 1.0})});
    EXPECT_FALSE(foresee_violation(env, b, forward(20), 10, 0.1));
}

TEST(Foresee, HorizonBoundary) {
    // Forward at 0.05 m per step from x = 1 hits the wall at step 4.
    const auto env = world(4, 2, {box(1.375, 0, 4, 2)}, {});
    const GmmBelief b({mode_at({1.0, 1.0, 0.0})});
    const auto u = forward(10);
    EXPECT_TRUE(foresee_violation(env, b, u, 4, 0.1));
    EXPECT_FALSE(foresee_violation(env, b, u, 3, 0.1));
    EXPECT_FALSE(foresee_violation(env, b, std::span<const Control>(u.data(), 3), 10, 0.1));
    const GmmBelief near({mode_at({1.16, 1.0, 0.0})});
    EXPECT_TRUE(foresee_violation(env, near, u, 1, 0.1));
}

TEST(Foresee, AnyModeCounts) {
    const auto env = world(4, 2, {box(1.375, 0, 4, 2)}, {});
    const GmmBelief b({mode_at({0.5, 1.0, kPi}), mode_at({1.1, 1.0, 0.0})});
    EXPECT_TRUE(foresee_violation(env, b, forward(10), 10, 0.1));
}

TEST(Phases, TransitionTable) {
    const Phase all[] = {Phase::GaussianNav, Phase::LostDetected, Phase::MultimodalRecovery,
                         Phase::Reconnect, Phase::Done, Phase::Failed};
    const std::vector<std::pair<Phase, Phase>> allowed{
        {Phase::GaussianNav, Phase::LostDetected},  {Phase::GaussianNav, Phase::Done},
        {Phase::LostDetected, Phase::MultimodalRecovery}, {Phase::LostDetected, Phase::Reconnect},
        {Phase::MultimodalRecovery, Phase::Reconnect}, {Phase::Reconnect, Phase::GaussianNav},
        {Phase::GaussianNav, Phase::Failed},        {Phase::LostDetected, Phase::Failed},
        {Phase::MultimodalRecovery, Phase::Failed}, {Phase::Reconnect, Phase::Failed}};
    for (const auto from : all) {
        for (const auto to : all) {
            const bool expected = std::find(allowed.begin(), allowed.end(), std::make_pair(from, to)) != allowed.end();
            EXPECT_EQ(transition_allowed(from, to), expected) << phase_name(from) << " -> " << phase_name(to);
        }
    }
}

TEST(Recover, UnimodalBeliefReturnsAtOnce) {
    const auto sc = test::shipped("fourroom");
    SimWorld sim(sc, 1);
    const auto graph = build_uniqueness_graph(sc.env, sc.roadmap_nodes);
    const auto r = m3p_recover(sim, GmmBelief({mode_at(sc.start)}), graph, recovery_params(sc), 1);
    EXPECT_EQ(r.steps, 0);
    EXPECT_TRUE(r.epochs.empty());
    EXPECT_EQ(sim.clock(), 0);
}

TEST(Recover, SmallBudgetTimesOut) {
    const auto sc = test::shipped("fourroom");
    SimWorld sim(sc.env, sc.kidnap.destination, Mat2::Zero(), sc.planner.dt, {}, 1);
    const auto graph = build_uniqueness_graph(sc.env, sc.roadmap_nodes);
    EXPECT_THROW(m3p_recover(sim, settled("fourroom"), graph, recovery_params(sc), 1, nullptr, 3),
                 RecoveryTimeout);
    EXPECT_EQ(sim.clock(), 3);
}

class NoiselessRecovery : public ::testing::TestWithParam<std::pair<std::string, std::size_t>> {};

TEST_P(NoiselessRecovery, ConvergesToTruth) {
    const auto [name, count] = GetParam();
    const auto sc = test::shipped(name);
    const auto &full = settled(name);
    const RobotState truth = sc.kidnap.destination;
    ASSERT_GE(full.size(), count);

    // The true mode plus the nearest `count - 1` others.
    std::vector<GaussianMode> modes(full.modes().begin(), full.modes().end());
    std::sort(modes.begin(), modes.end(), [&](const auto &a, const auto &b) {
        return (a.mean.position() - truth.position()).norm() < (b.mean.position() - truth.position()).norm();
    });
    modes.resize(count);
    for (auto &m : modes) m.weight = 1.0 / static_cast<double>(count);
    GmmBelief b(std::move(modes));
    if (count == 1) {
        EXPECT_TRUE(b.is_unimodal());
        return;
    }

    SimWorld sim(sc.env, truth, Mat2::Zero(), sc.planner.dt, {}, 5);
    sim.set_noiseless_sensing(true);
    auto rp = recovery_params(sc);
    rp.belief.filter.process_cov = Mat2::Zero();
    const auto graph = build_uniqueness_graph(sc.env, sc.roadmap_nodes);
    CountingObserver obs;
    const auto r = m3p_recover(sim, b, graph, rp, 3, &obs);
    ASSERT_TRUE(r.belief.is_unimodal());
    EXPECT_LT((r.belief[0].mean.position() - sim.truth().position()).norm(), 0.2);
    EXPECT_LT(std::abs(wrap_angle(r.belief[0].mean.theta - sim.truth().theta)), 0.1);
    ASSERT_FALSE(obs.modes.empty());
    EXPECT_EQ(obs.modes.front(), count);
    for (std::size_t e = 0; e < obs.modes.size(); ++e) {
        EXPECT_EQ(obs.rollouts[e], obs.expected_rollouts[e]);
        if (e > 0) {
            EXPECT_LE(obs.modes[e], obs.modes[e - 1]);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(
    Scenarios, NoiselessRecovery,
    ::testing::Values(std::make_pair(std::string("fourroom"), std::size_t{2}),
                      std::make_pair(std::string("fourroom"), std::size_t{3}),
                      std::make_pair(std::string("fourroom"), std::size_t{4}),
                      std::make_pair(std::string("sixcorridor"), std::size_t{2}),
                      std::make_pair(std::string("sixcorridor"), std::size_t{4}),
                      std::make_pair(std::string("sixcorridor"), std::size_t{6})),
    [](const auto &info) { return info.param.first + "_" + std::to_string(info.param.second); });

TEST(Mission, NoKidnapStaysGaussian) {
    auto sc = test::shipped("fourroom");
    sc.kidnap.enabled = false;
    const auto r = run_mission(sc, {3, nullptr});
    EXPECT_EQ(r.final_phase, Phase::Done);
    EXPECT_TRUE(r.recoveries.empty());
    EXPECT_EQ(r.recovery_epochs(), 0u);
    EXPECT_LE(r.goal_error, sc.planner.goal_tolerance + 0.3);
    ASSERT_EQ(r.phases.size(), 1u);
    EXPECT_EQ(r.phases[0].to, Phase::Done);
}

TEST(Mission, KidnapToItsOwnStartIsHarmless) {
    auto sc = test::shipped("fourroom");
    sc.kidnap.enabled = true;
    sc.kidnap.time_step = 1;
    sc.kidnap.trigger_region.reset();
    sc.kidnap.destination = sc.start;
    const auto r = run_mission(sc, {4, nullptr});
    EXPECT_EQ(r.final_phase, Phase::Done);
    EXPECT_EQ(r.collisions, 0);
}

TEST(Mission, ShippedKidnapRecovers) {
    const auto sc = test::shipped("fourroom");
    const auto r = run_mission(sc, {1, nullptr});
    EXPECT_EQ(r.final_phase, Phase::Done);
    ASSERT_GE(r.recoveries.size(), 1u);
    EXPECT_GE(r.recoveries[0].initial_modes, 2u);
    for (const auto &rec : r.recoveries) {
        for (std::size_t k = 1; k < rec.mode_counts.size(); ++k) {
            EXPECT_LT(rec.mode_counts[k], rec.mode_counts[k - 1]);
        }
    }
    for (std::size_t k = 1; k < r.phases.size(); ++k) {
        EXPECT_EQ(r.phases[k].from, r.phases[k - 1].to);
        EXPECT_TRUE(transition_allowed(r.phases[k].from, r.phases[k].to));
    }
}

#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "m3p/belief.hpp"
#include "m3p/policy.hpp"
#include "m3p/roadmap.hpp"
#include "m3p/scenario.hpp"
#include "m3p/simulator.hpp"
#include "m3p/uniqueness_graph.hpp"

namespace m3p {

enum class Phase { GaussianNav, LostDetected, MultimodalRecovery, Reconnect, Done, Failed };

inline const char *phase_name(Phase p) {
    switch (p) {
        case Phase::GaussianNav: return "GAUSSIAN_NAV";
        case Phase::LostDetected: return "LOST_DETECTED";
        case Phase::MultimodalRecovery: return "MULTIMODAL_RECOVERY";
        case Phase::Reconnect: return "RECONNECT";
        case Phase::Done: return "DONE";
        case Phase::Failed: return "FAILED";
    }
    return "UNKNOWN";
}

inline bool transition_allowed(Phase from, Phase to) {
    if (to == Phase::Failed) return from != Phase::Done && from != Phase::Failed;
    switch (from) {
        case Phase::GaussianNav: return to == Phase::LostDetected || to == Phase::Done;
        case Phase::LostDetected: return to == Phase::MultimodalRecovery || to == Phase::Reconnect;
        case Phase::MultimodalRecovery: return to == Phase::Reconnect;
        case Phase::Reconnect: return to == Phase::GaussianNav;
        default: return false;
    }
}

// GAUSSIAN_NAV holds one mode, MULTIMODAL_RECOVERY at least two.
struct MissionState {
    Phase phase = Phase::GaussianNav;
    GmmBelief belief;
    std::size_t cursor = 0;
};

class RobotCollisionError : public Error {
   public:
    RobotCollisionError(const std::string &msg, int step) : Error(msg), step_(step) {}
    int step() const { return step_; }

   private:
    int step_;
};

// True iff the noiseless propagation of any mode mean reaches an invalid state
// within the next min(horizon, remaining) controls.
inline bool foresee_violation(const Environment &env, const GmmBelief &belief,
                              std::span<const Control> remaining, int horizon, double dt) {
    const std::size_t n = std::min(remaining.size(), static_cast<std::size_t>(std::max(0, horizon)));
    for (const auto &m : belief.modes()) {
        RobotState s = m.mean;
        for (std::size_t k = 0; k < n; ++k) {
            s = propagate(s, remaining[k], dt);
            if (!env.is_state_valid(s)) return true;
        }
    }
    return false;
}

struct RecoveryParams {
    BeliefParams belief;
    GainParams gain;
    RrtParams rrt;
    double target_radius = 4.0;
    double max_target_radius = 0.0;  // 0: bounds diagonal
    int lookahead = 10;
    int max_steps = 5000;
};

inline BeliefParams belief_params(const Scenario &sc) {
    BeliefParams p;
    p.filter.dt = sc.planner.dt;
    p.filter.process_cov = sc.process_cov;
    p.filter.gate = sc.planner.gate;
    p.weights.gamma_rate = sc.planner.gamma_rate;
    p.weights.miss_penalty = sc.planner.miss_penalty;
    p.weights.miss_margin = sc.planner.miss_margin;
    p.prune_threshold = sc.planner.prune_threshold;
    return p;
}

inline RecoveryParams recovery_params(const Scenario &sc) {
    RecoveryParams p;
    p.belief = belief_params(sc);
    p.gain.c_fail = sc.planner.c_fail;
    p.gain.literal_sign = sc.planner.literal_pseudocode;
    p.gain.literal_aggregate = sc.planner.literal_pseudocode;
    p.rrt = sc.planner.rrt;
    p.target_radius = sc.planner.target_radius;
    p.max_target_radius = sc.planner.max_target_radius;
    p.lookahead = sc.planner.lookahead;
    p.max_steps = sc.planner.max_recovery_steps;
    return p;
}

struct EpochRecord {
    int t = 0;
    std::size_t modes = 0;
    std::size_t candidates = 0;
    std::size_t rollouts = 0;        // |candidates| * modes for the accepted matrix
    std::size_t rollouts_total = 0;  // including rejected radii
    double radius = 0.0;
    int source_mode = -1;
    int target_node = -1;
    std::size_t executed = 0;
    std::string end_reason;
    double wall_ms = 0.0;
};

// A change in the number of modes during recovery.
struct PruneEvent {
    int t = 0;
    RobotState truth;
    std::vector<RobotState> before;
    std::vector<RobotState> after;
};

struct RecoveryResult {
    GmmBelief belief;
    int steps = 0;
    std::vector<EpochRecord> epochs;
    std::vector<PruneEvent> prunes;
};

// Hooks for tracing. Default implementations ignore everything.
class MissionObserver {
   public:
    virtual ~MissionObserver() = default;
    virtual void on_step(int /*t*/, Phase /*phase*/, const Control & /*u*/,
                         const SimStep & /*step*/, const GmmBelief & /*belief*/) {}
    virtual void on_epoch(int /*t*/, std::size_t /*index*/, const GmmBelief & /*belief*/,
                          const PolicySelection & /*selection*/, const EpochRecord & /*record*/) {}
    virtual void on_phase(int /*t*/, Phase /*from*/, Phase /*to*/) {}
};

inline double bounds_diagonal(const Environment &env) {
    return std::hypot(env.bounds().width(), env.bounds().height());
}

// select_policy with radius doubling: widen while no candidate exists or no
// candidate promises a positive gain; at the widest radius take what exists.
inline PolicySelection select_with_widening(const Environment &env, const GmmBelief &belief,
                                            const UniquenessGraph &graph,
                                            const RecoveryParams &p, std::uint64_t seed,
                                            std::size_t &rollouts_total) {
    PolicyParams pp{p.belief, p.gain, p.rrt, p.target_radius};
    const double widest =
        p.max_target_radius > 0.0 ? p.max_target_radius : bounds_diagonal(env);
    for (;;) {
        const bool last = pp.target_radius >= widest;
        try {
            PolicySelection sel = select_policy(env, belief, graph, pp, seed);
            rollouts_total += sel.rollouts;
            if (last || sel.gains.aggregate[sel.selected] > 0.0) return sel;
        } catch (const PlannerStuckError &) {
            if (last) throw;
        }
        pp.target_radius = std::min(2.0 * pp.target_radius, widest);
    }
}

// Receding-horizon recovery: pick the most informative candidate, execute it
// step by step on the simulator, replan whenever the mode count changes, a
// mode is about to hit an obstacle, or the policy runs out.
inline RecoveryResult m3p_recover(SimWorld &sim, GmmBelief belief, const UniquenessGraph &graph,
                                  const RecoveryParams &p, std::uint64_t seed,
                                  MissionObserver *observer = nullptr, int step_budget = -1) {
    const Environment &env = sim.env();
    const int budget = step_budget >= 0 ? std::min(step_budget, p.max_steps) : p.max_steps;
    RecoveryResult out;
    while (!belief.is_unimodal()) {
        if (out.steps >= budget) throw RecoveryTimeout("recovery step budget exhausted");
        EpochRecord rec;
        rec.t = sim.clock();
        rec.modes = belief.size();
        const auto started = std::chrono::steady_clock::now();
        const std::uint64_t epoch_seed = seed * 7919ULL + out.epochs.size();
        PolicySelection sel = select_with_widening(env, belief, graph, p, epoch_seed, rec.rollouts_total);
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        rec.candidates = sel.candidates.policies.size();
        rec.rollouts = sel.rollouts;
        rec.radius = sel.radius;
        rec.source_mode = sel.policy().source_mode;
        rec.target_node = sel.policy().target_node;

        const auto &controls = sel.policy().controls;
        const std::size_t n_before = belief.size();
        rec.end_reason = "exhausted";
        std::size_t k = 0;
        std::vector<RobotState> means_before;
        for (const auto &m : belief.modes()) means_before.push_back(m.mean);
        while (k < controls.size()) {
            const std::span<const Control> rest(controls.data() + k, controls.size() - k);
            if (k > 0 && foresee_violation(env, belief, rest, p.lookahead, p.belief.filter.dt)) {
                rec.end_reason = "violation";
                break;
            }
            if (out.steps >= budget) {
                rec.executed = k;
                out.epochs.push_back(rec);
                throw RecoveryTimeout("recovery step budget exhausted");
            }
            const Control u = controls[k++];
            const SimStep st = sim.step(u);
            ++out.steps;
            if (st.collided) {
                throw RobotCollisionError("robot collided during recovery", sim.clock());
            }
            belief = belief_step(env, belief, u, st.z, p.belief);
            if (observer) observer->on_step(sim.clock(), Phase::MultimodalRecovery, u, st, belief);
            if (belief.size() != n_before) {
                PruneEvent ev;
                ev.t = sim.clock();
                ev.truth = st.truth;
                ev.before = means_before;
                for (const auto &m : belief.modes()) ev.after.push_back(m.mean);
                out.prunes.push_back(std::move(ev));
                rec.end_reason = "modes";
                break;
            }
        }
        rec.executed = k;
        if (observer) observer->on_epoch(rec.t, out.epochs.size(), belief, sel, rec);
        out.epochs.push_back(rec);
    }
    out.belief = std::move(belief);
    return out;
}

// Drives toward `target`: turn in place when the heading error is large,
// otherwise drive with proportional steering.
inline Control waypoint_control(const RobotState &est, const Vec2 &target, double dt, double v_max,
                                double omega_max) {
    const Vec2 d = target - est.position();
    const double dist = d.norm();
    if (dist < 1e-9) return {0.0, 0.0};
    const double err = wrap_angle(std::atan2(d.y(), d.x()) - est.theta);
    const double omega = std::clamp(err / dt * 0.5, -omega_max, omega_max);
    if (std::abs(err) > 0.35) return {0.0, omega};
    return {std::min(v_max, dist / dt) * std::cos(err), omega};
}

struct MissionOptions {
    std::uint64_t seed = 1;
    MissionObserver *observer = nullptr;
};

struct PhaseChange {
    int t = 0;
    Phase from = Phase::GaussianNav;
    Phase to = Phase::GaussianNav;
};

struct RecoveryRecord {
    int start_t = 0;
    std::size_t initial_modes = 0;
    std::vector<std::size_t> mode_counts;  // initial count, then after each change
    std::vector<EpochRecord> epochs;
    std::vector<PruneEvent> prunes;
    RobotState truth_at_start;
    RobotState result;
};

struct MissionReport {
    Phase final_phase = Phase::GaussianNav;
    int steps = 0;
    int collisions = 0;
    int failure_step = -1;
    std::string failure_reason;
    std::vector<PhaseChange> phases;
    std::vector<RecoveryRecord> recoveries;
    RobotState final_truth;
    RobotState final_estimate;
    double goal_error = 0.0;  // truth to goal, m
    double wall_seconds = 0.0;

    std::size_t recovery_epochs() const {
        std::size_t n = 0;
        for (const auto &r : recoveries) n += r.epochs.size();
        return n;
    }
    std::size_t final_modes = 1;
};

inline std::vector<Vec2> roadmap_waypoints(const Roadmap &rm, const std::vector<std::size_t> &path,
                                           const RobotState &goal) {
    std::vector<Vec2> out;
    for (std::size_t i = 1; i < path.size(); ++i) out.push_back(rm.nodes()[path[i]].position());
    if (out.empty() || (out.back() - goal.position()).norm() > 1e-9) out.push_back(goal.position());
    return out;
}

// Full mission: roadmap navigation with a unimodal filter, lost detection,
// global re-localization, multi-modal recovery and reconnection to the roadmap.
inline MissionReport run_mission(const Scenario &sc, const MissionOptions &opts) {
    const auto wall_start = std::chrono::steady_clock::now();
    const Environment &env = sc.env;
    const PlannerConfig &cfg = sc.planner;
    const BeliefParams bp = belief_params(sc);
    const RecoveryParams rp = recovery_params(sc);
    MissionObserver null_observer;
    MissionObserver &obs = opts.observer ? *opts.observer : null_observer;

    SimWorld sim(sc, opts.seed);
    std::mt19937_64 sampler(opts.seed ^ 0x9E3779B97F4A7C15ULL);
    const UniquenessGraph graph = build_uniqueness_graph(env, sc.roadmap_nodes);
    Roadmap roadmap(env, sc.roadmap_nodes, cfg.connection_radius, cfg.rrt.inflation);
    const std::size_t goal_id = roadmap.add_node(env, sc.goal, cfg.reconnect_k);

    MissionReport report;
    MissionState state;
    state.belief = GmmBelief({GaussianMode{1.0, sc.start, sc.start_cov, 0.0}});

    const auto change = [&](Phase to) {
        if (!transition_allowed(state.phase, to)) {
            throw Error(std::string("illegal phase transition ") + phase_name(state.phase) + " -> " +
                        phase_name(to));
        }
        report.phases.push_back({sim.clock(), state.phase, to});
        obs.on_phase(sim.clock(), state.phase, to);
        state.phase = to;
    };
    const auto fail = [&](const std::string &why) {
        report.failure_step = sim.clock();
        report.failure_reason = why;
        change(Phase::Failed);
    };

    std::vector<Vec2> waypoints;
    const auto plan_to_goal = [&](const RobotState &from) {
        const std::size_t id = roadmap.add_node(env, from, cfg.reconnect_k);
        const auto path = roadmap.shortest_path(id, goal_id);
        if (path.empty()) return false;
        waypoints = roadmap_waypoints(roadmap, path, sc.goal);
        state.cursor = 0;
        return true;
    };

    std::vector<InnovationRecord> history;
    if (!plan_to_goal(sc.start)) fail("no roadmap path from start to goal");

    try {
        while (state.phase != Phase::Done && state.phase != Phase::Failed) {
            if (sim.clock() >= cfg.max_mission_steps) {
                fail("mission step budget exhausted");
                break;
            }
            switch (state.phase) {
                case Phase::GaussianNav: {
                    const RobotState est = state.belief[0].mean;
                    if ((est.position() - sc.goal.position()).norm() <= cfg.goal_tolerance) {
                        change(Phase::Done);
                        break;
                    }
                    while (state.cursor + 1 < waypoints.size() &&
                           (waypoints[state.cursor] - est.position()).norm() < cfg.waypoint_tolerance) {
                        ++state.cursor;
                    }
                    const Control u =
                        waypoint_control(est, waypoints[state.cursor], cfg.dt, cfg.v_max, cfg.omega_max);
                    const SimStep st = sim.step(u);
                    if (st.collided) {
                        ++report.collisions;
                        fail("robot collided while navigating");
                        break;
                    }
                    GaussianMode mode = ekf_predict(state.belief[0], u, bp.filter);
                    const auto assoc = associate(predict_observation(env, mode.mean), st.z);
                    history.push_back(innovation_record(env, mode, assoc));
                    if (assoc.n_matched > 0) mode = ekf_update(env, mode, assoc, bp.filter);
                    state.belief = GmmBelief({mode});
                    obs.on_step(sim.clock(), state.phase, u, st, state.belief);
                    if (detect_lost(history, cfg.lost_window, cfg.lost_quantile)) {
                        change(Phase::LostDetected);
                    }
                    break;
                }
                case Phase::LostDetected: {
                    std::pair<Control, SimStep> last_sense;
                    const SensingFn sense = [&]() {
                        const Control u{0.0, cfg.sweep_rate};
                        const SimStep st = sim.step(u);
                        if (st.collided) throw RobotCollisionError("robot collided while sensing", sim.clock());
                        last_sense = {u, st};
                        return std::make_pair(u, st.z);
                    };
                    const auto on_settle = [&](const GmmBelief &b) {
                        obs.on_step(sim.clock(), Phase::LostDetected, last_sense.first, last_sense.second, b);
                    };
                    state.belief = sample_initial_belief(env, cfg.initial, sense, bp, sampler, on_settle);
                    change(state.belief.is_unimodal() ? Phase::Reconnect : Phase::MultimodalRecovery);
                    RecoveryRecord rec;
                    rec.start_t = sim.clock();
                    rec.initial_modes = state.belief.size();
                    rec.truth_at_start = sim.truth();
                    rec.mode_counts.push_back(state.belief.size());
                    if (state.phase == Phase::MultimodalRecovery) {
                        const int remaining = cfg.max_mission_steps - sim.clock();
                        RecoveryResult rr = m3p_recover(sim, state.belief, graph, rp,
                                                        opts.seed + 1000ULL * report.recoveries.size(),
                                                        &obs, std::max(0, remaining));
                        state.belief = std::move(rr.belief);
                        rec.epochs = std::move(rr.epochs);
                        for (const auto &ev : rr.prunes) rec.mode_counts.push_back(ev.after.size());
                        rec.prunes = std::move(rr.prunes);
                        change(Phase::Reconnect);
                    }
                    rec.result = state.belief[0].mean;
                    report.recoveries.push_back(std::move(rec));
                    break;
                }
                case Phase::Reconnect: {
                    history.clear();
                    state.belief[0].weight = 1.0;
                    state.belief[0].beta = 0.0;
                    if (!plan_to_goal(state.belief[0].mean)) {
                        fail("no roadmap path after reconnecting");
                        break;
                    }
                    change(Phase::GaussianNav);
                    break;
                }
                default: break;
            }
        }
    } catch (const RobotCollisionError &e) {
        ++report.collisions;
        fail(e.what());
    } catch (const RecoveryTimeout &e) {
        fail(e.what());
    } catch (const PlannerStuckError &e) {
        fail(e.what());
    } catch (const DegenerateBeliefError &e) {
        fail(e.what());
    } catch (const FilterDegeneracyError &e) {
        fail(e.what());
    } catch (const SamplingError &e) {
        fail(e.what());
    }

    report.final_phase = state.phase;
    report.steps = sim.clock();
    report.final_truth = sim.truth();
    report.final_modes = state.belief.size();
    report.final_estimate = state.belief[state.belief.most_likely()].mean;
    report.goal_error = (sim.truth().position() - sc.goal.position()).norm();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return report;
}

}  // namespace m3p

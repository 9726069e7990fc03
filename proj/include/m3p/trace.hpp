#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include <json.hpp>

#include "m3p/m3p.hpp"

namespace m3p {

using TraceJson = nlohmann::ordered_json;

// Modes beyond this count are summarized (count only) in step records; the
// settling phase of global localization can hold hundreds of hypotheses.
inline constexpr std::size_t kTraceModeLimit = 64;

namespace trace_json {

inline TraceJson pose(const RobotState &s) { return TraceJson::array({s.x, s.y, s.theta}); }
inline TraceJson point(const Vec2 &p) { return TraceJson::array({p.x(), p.y()}); }

inline TraceJson environment(const Environment &env) {
    TraceJson j;
    j["bounds"] = {{"xmin", env.bounds().min.x()},
                   {"ymin", env.bounds().min.y()},
                   {"xmax", env.bounds().max.x()},
                   {"ymax", env.bounds().max.y()}};
    j["robot_radius"] = env.robot_radius();
    TraceJson obstacles = TraceJson::array();
    for (const auto &o : env.obstacles()) {
        TraceJson poly = TraceJson::array();
        for (const auto &v : o.vertices()) poly.push_back(point(v));
        obstacles.push_back(std::move(poly));
    }
    j["obstacles"] = std::move(obstacles);
    TraceJson landmarks = TraceJson::array();
    for (const auto &l : env.landmarks()) {
        landmarks.push_back({{"id", l.id}, {"x", l.position.x()}, {"y", l.position.y()}});
    }
    j["landmarks"] = std::move(landmarks);
    const auto &s = env.sensor();
    j["sensor"] = {{"r_sensor", s.range},          {"eta_r", s.eta_r},
                   {"eta_theta", s.eta_theta},      {"sigma_b_r", s.sigma_b_r},
                   {"sigma_b_theta", s.sigma_b_theta}, {"occlusion", s.occlusion}};
    return j;
}

inline TraceJson modes(const GmmBelief &belief) {
    TraceJson arr = TraceJson::array();
    for (const auto &m : belief.modes()) {
        TraceJson sigma = TraceJson::array();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) sigma.push_back(m.cov(r, c));
        }
        arr.push_back({{"w", m.weight}, {"mu", pose(m.mean)}, {"sigma", std::move(sigma)},
                       {"beta", m.beta}});
    }
    return arr;
}

inline TraceJson observations(const ObservationVector &z) {
    TraceJson arr = TraceJson::array();
    for (const auto &o : z) arr.push_back(TraceJson::array({o.landmark_id, o.range, o.bearing}));
    return arr;
}

}  // namespace trace_json

// JSONL trace: header, graph, then step / epoch / phase records and a summary.
// Contains no wall-clock data, so a (scenario, seed) pair always produces the
// same bytes.
class TraceWriter : public MissionObserver {
   public:
    explicit TraceWriter(std::ostream &out) : out_(&out) {}

    void write(const TraceJson &record) { *out_ << record.dump() << '\n'; }

    void header(const Scenario &sc, std::uint64_t seed) {
        TraceJson j;
        j["type"] = "header";
        j["scenario"] = sc.name;
        j["seed"] = seed;
        j["dt"] = sc.planner.dt;
        j["env"] = trace_json::environment(sc.env);
        TraceJson nodes = TraceJson::array();
        for (const auto &n : sc.roadmap_nodes) nodes.push_back(trace_json::pose(n));
        j["roadmap_nodes"] = std::move(nodes);
        j["start"] = trace_json::pose(sc.start);
        j["goal"] = trace_json::pose(sc.goal);
        write(j);
    }

    void graph(const UniquenessGraph &g) {
        TraceJson j;
        j["type"] = "graph";
        TraceJson ids = TraceJson::array();
        for (std::size_t v = 0; v < g.size(); ++v) ids.push_back(g.visible_ids(v));
        j["visible_ids"] = std::move(ids);
        TraceJson edges = TraceJson::array();
        for (const auto &e : g.edges()) edges.push_back(TraceJson::array({e.a, e.b, e.weight}));
        j["edges"] = std::move(edges);
        write(j);
    }

    void on_step(int t, Phase phase, const Control &u, const SimStep &step,
                 const GmmBelief &belief) override {
        TraceJson j;
        j["type"] = "step";
        j["t"] = t;
        j["phase"] = phase_name(phase);
        j["truth"] = trace_json::pose(step.truth);
        j["u"] = TraceJson::array({u.v, u.omega});
        j["z"] = trace_json::observations(step.z);
        j["n_modes"] = belief.size();
        if (belief.size() <= kTraceModeLimit) j["modes"] = trace_json::modes(belief);
        if (step.kidnapped) j["kidnapped"] = true;
        write(j);
    }

    void on_epoch(int t, std::size_t index, const GmmBelief &belief, const PolicySelection &sel,
                  const EpochRecord &rec) override {
        TraceJson j;
        j["type"] = "epoch";
        j["t"] = t;
        j["index"] = index;
        j["modes"] = rec.modes;
        j["radius"] = sel.radius;
        TraceJson cands = TraceJson::array();
        for (const auto &p : sel.candidates.policies) {
            TraceJson wps = TraceJson::array();
            for (const auto &w : p.waypoints) wps.push_back(trace_json::point(w));
            cands.push_back({{"source", p.source_mode},
                             {"target", p.target_node},
                             {"steps", p.size()},
                             {"waypoints", std::move(wps)}});
        }
        j["candidates"] = std::move(cands);
        j["gain"] = sel.gains.gain;
        j["aggregate"] = sel.gains.aggregate;
        j["selected"] = sel.selected;
        j["rollouts"] = rec.rollouts;
        j["rollouts_total"] = rec.rollouts_total;
        j["executed"] = rec.executed;
        j["end_reason"] = rec.end_reason;
        j["modes_after"] = belief.size();
        write(j);
    }

    void on_phase(int t, Phase from, Phase to) override {
        write({{"type", "phase"}, {"t", t}, {"from", phase_name(from)}, {"to", phase_name(to)}});
    }

    void summary(const MissionReport &r) {
        TraceJson j;
        j["type"] = "summary";
        j["phase"] = phase_name(r.final_phase);
        j["steps"] = r.steps;
        j["recovery_epochs"] = r.recovery_epochs();
        j["final_modes"] = r.final_modes;
        j["collisions"] = r.collisions;
        j["goal_error"] = r.goal_error;
        TraceJson recs = TraceJson::array();
        for (const auto &rec : r.recoveries) {
            TraceJson counts = TraceJson::array();
            for (const auto &e : rec.epochs) counts.push_back(e.modes);
            TraceJson rollouts = TraceJson::array();
            for (const auto &e : rec.epochs) rollouts.push_back(e.rollouts);
            recs.push_back({{"start_t", rec.start_t},
                            {"mode_counts", rec.mode_counts},
                            {"epoch_modes", std::move(counts)},
                            {"epoch_rollouts", std::move(rollouts)}});
        }
        j["recoveries"] = std::move(recs);
        if (r.failure_step >= 0) {
            j["failure_step"] = r.failure_step;
            j["failure_reason"] = r.failure_reason;
        }
        write(j);
    }

   private:
    std::ostream *out_;
};

}  // namespace m3p

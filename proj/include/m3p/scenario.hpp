#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3p/belief.hpp"
#include "m3p/environment.hpp"
#include "m3p/rrt_star.hpp"

namespace m3p {

struct Circle {
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
};

struct KidnapConfig {
    bool enabled = false;
    std::optional<int> time_step;
    std::optional<Circle> trigger_region;
    RobotState destination;
};

// Everything tunable about the planner stack, with defaults.
struct PlannerConfig {
    double dt = 0.1;
    double v_max = 0.5;
    double omega_max = 1.0;

    double prune_threshold = 0.01;
    double gamma_rate = 1e-4;
    double miss_penalty = 9.210340371976184;
    double miss_margin = 0.3;
    double gate = 13.815510557964274;

    InitialBeliefParams initial;

    double target_radius = 4.0;
    double max_target_radius = 0.0;  // 0: bounds diagonal
    RrtParams rrt;
    double c_fail = 1e6;
    bool literal_pseudocode = false;

    int lookahead = 10;
    int max_recovery_steps = 5000;
    int max_mission_steps = 20000;
    double goal_tolerance = 0.3;
    double waypoint_tolerance = 0.15;
    int reconnect_k = 5;
    double connection_radius = 4.0;
    int lost_window = 5;
    double lost_quantile = 0.999;
    double sweep_rate = 1.0;  // rad/s while the initial belief settles
};

struct Scenario {
    std::string name;
    Environment env;
    Mat2 process_cov = Mat2::Identity() * 1e-4;
    std::vector<RobotState> roadmap_nodes;
    RobotState start;
    Mat3 start_cov = (Mat3() << 0.01, 0, 0, 0, 0.01, 0, 0, 0, 0.003).finished();
    RobotState goal;
    KidnapConfig kidnap;
    PlannerConfig planner;
};

namespace detail {

using nlohmann::json;

inline const json &require(const json &j, const std::string &key, const std::string &path) {
    if (!j.is_object() || !j.contains(key)) {
        throw SchemaError("missing field '" + path + key + "'", 0);
    }
    return j.at(key);
}

inline double number(const json &j, const std::string &path) {
    if (!j.is_number()) throw SchemaError("field '" + path + "' must be a number", 0);
    return j.get<double>();
}

inline double number_or(const json &j, const std::string &key, double fallback,
                        const std::string &path) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return number(j.at(key), path + key);
}

inline int int_or(const json &j, const std::string &key, int fallback, const std::string &path) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) {
        throw SchemaError("field '" + path + key + "' must be an integer", 0);
    }
    return j.at(key).get<int>();
}

inline bool bool_or(const json &j, const std::string &key, bool fallback, const std::string &path) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw SchemaError("field '" + path + key + "' must be a boolean", 0);
    return j.at(key).get<bool>();
}

inline Vec2 point(const json &j, const std::string &path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError("field '" + path + "' must be [x, y]", 0);
    return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

inline RobotState pose(const json &j, const std::string &path) {
    if (!j.is_array() || j.size() != 3) {
        throw SchemaError("field '" + path + "' must be [x, y, theta]", 0);
    }
    return {number(j[0], path + "[0]"), number(j[1], path + "[1]"),
            wrap_angle(number(j[2], path + "[2]"))};
}

inline int line_of_byte(const std::string &text, std::size_t byte) {
    const std::size_t end = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

inline void require_positive(double v, const std::string &field) {
    if (!(v > 0.0)) throw ValidationError(field, "must be > 0");
}

inline PlannerConfig parse_planner(const json &j) {
    PlannerConfig c;
    const std::string p = "planner.";
    c.dt = number_or(j, "dt", c.dt, p);
    c.v_max = number_or(j, "v_max", c.v_max, p);
    c.omega_max = number_or(j, "omega_max", c.omega_max, p);
    c.prune_threshold = number_or(j, "prune_threshold", c.prune_threshold, p);
    c.gamma_rate = number_or(j, "gamma_rate", c.gamma_rate, p);
    c.miss_penalty = number_or(j, "miss_penalty", c.miss_penalty, p);
    c.miss_margin = number_or(j, "miss_margin", c.miss_margin, p);
    c.gate = number_or(j, "gate", c.gate, p);
    c.target_radius = number_or(j, "target_radius", c.target_radius, p);
    c.max_target_radius = number_or(j, "max_target_radius", c.max_target_radius, p);
    c.c_fail = number_or(j, "c_fail", c.c_fail, p);
    c.literal_pseudocode = bool_or(j, "literal_pseudocode", c.literal_pseudocode, p);
    c.lookahead = int_or(j, "lookahead", c.lookahead, p);
    c.max_recovery_steps = int_or(j, "max_recovery_steps", c.max_recovery_steps, p);
    c.max_mission_steps = int_or(j, "max_mission_steps", c.max_mission_steps, p);
    c.goal_tolerance = number_or(j, "goal_tolerance", c.goal_tolerance, p);
    c.waypoint_tolerance = number_or(j, "waypoint_tolerance", c.waypoint_tolerance, p);
    c.reconnect_k = int_or(j, "reconnect_k", c.reconnect_k, p);
    c.connection_radius = number_or(j, "connection_radius", c.connection_radius, p);
    c.lost_window = int_or(j, "lost_window", c.lost_window, p);
    c.lost_quantile = number_or(j, "lost_quantile", c.lost_quantile, p);
    c.sweep_rate = number_or(j, "sweep_rate", c.sweep_rate, p);

    if (j.is_object() && j.contains("initial_belief")) {
        const auto &ib = j.at("initial_belief");
        const std::string q = p + "initial_belief.";
        c.initial.samples = int_or(ib, "samples", c.initial.samples, q);
        c.initial.stable_rounds = int_or(ib, "stable_rounds", c.initial.stable_rounds, q);
        c.initial.max_rounds = int_or(ib, "max_rounds", c.initial.max_rounds, q);
        c.initial.iterations = int_or(ib, "iterations", c.initial.iterations, q);
        c.initial.merge_distance = number_or(ib, "merge_distance", c.initial.merge_distance, q);
        c.initial.merge_angle = number_or(ib, "merge_angle", c.initial.merge_angle, q);
        if (ib.contains("sigma0")) {
            const auto &s = ib.at("sigma0");
            if (!s.is_array() || s.size() != 3) {
                throw SchemaError("field '" + q + "sigma0' must be [sxx, syy, stt]", 0);
            }
            c.initial.cov = Mat3::Zero();
            for (int k = 0; k < 3; ++k) c.initial.cov(k, k) = number(s[static_cast<std::size_t>(k)], q + "sigma0");
        }
    }
    if (j.is_object() && j.contains("rrt")) {
        const auto &r = j.at("rrt");
        const std::string q = p + "rrt.";
        c.rrt.iterations = int_or(r, "iterations", c.rrt.iterations, q);
        c.rrt.goal_bias = number_or(r, "goal_bias", c.rrt.goal_bias, q);
        c.rrt.max_step = number_or(r, "max_step", c.rrt.max_step, q);
        c.rrt.goal_tolerance = number_or(r, "goal_tolerance", c.rrt.goal_tolerance, q);
        c.rrt.heading_tolerance = number_or(r, "heading_tolerance", c.rrt.heading_tolerance, q);
        c.rrt.inflation = number_or(r, "inflation", c.rrt.inflation, q);
    }
    c.rrt.dt = c.dt;
    c.rrt.v_max = c.v_max;
    c.rrt.omega_max = c.omega_max;
    c.initial.sweep_steps =
        static_cast<int>(std::ceil(2.0 * kPi / (c.sweep_rate * c.dt) - 1e-9));

    require_positive(c.dt, "planner.dt");
    require_positive(c.v_max, "planner.v_max");
    require_positive(c.omega_max, "planner.omega_max");
    require_positive(c.target_radius, "planner.target_radius");
    if (c.sweep_rate > c.omega_max || !(c.sweep_rate > 0.0)) {
        throw ValidationError("planner.sweep_rate", "must be in (0, omega_max]");
    }
    if (c.initial.samples < 1) throw ValidationError("planner.initial_belief.samples", "must be >= 1");
    if (c.prune_threshold < 0.0 || c.prune_threshold >= 1.0) {
        throw ValidationError("planner.prune_threshold", "must be in [0, 1)");
    }
    if (c.lookahead < 1) throw ValidationError("planner.lookahead", "must be >= 1");
    if (c.lost_window < 1) throw ValidationError("planner.lost_window", "must be >= 1");
    return c;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string &text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        const int line = detail::line_of_byte(text, e.byte == 0 ? 0 : e.byte - 1);
        throw SchemaError("parse error at line " + std::to_string(line) + ": " + e.what(), line);
    }
    if (!j.is_object()) throw SchemaError("scenario must be a JSON object", 1);

    Scenario sc;
    sc.name = j.value("name", std::string("unnamed"));

    const auto &b = detail::require(j, "bounds", "");
    geometry::Aabb bounds{
        {detail::number(detail::require(b, "xmin", "bounds."), "bounds.xmin"),
         detail::number(detail::require(b, "ymin", "bounds."), "bounds.ymin")},
        {detail::number(detail::require(b, "xmax", "bounds."), "bounds.xmax"),
         detail::number(detail::require(b, "ymax", "bounds."), "bounds.ymax")}};
    const double robot_radius = detail::number(detail::require(j, "robot_radius", ""), "robot_radius");

    std::vector<Obstacle> obstacles;
    if (j.contains("obstacles")) {
        const auto &arr = j.at("obstacles");
        if (!arr.is_array()) throw SchemaError("field 'obstacles' must be an array", 0);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "obstacles[" + std::to_string(i) + "]";
            if (!arr[i].is_array()) throw SchemaError("field '" + path + "' must be a vertex list", 0);
            std::vector<Vec2> verts;
            for (std::size_t k = 0; k < arr[i].size(); ++k) {
                verts.push_back(detail::point(arr[i][k], path + "[" + std::to_string(k) + "]"));
            }
            obstacles.emplace_back(std::move(verts));
        }
    }

    std::vector<Landmark> landmarks;
    const auto &larr = detail::require(j, "landmarks", "");
    if (!larr.is_array()) throw SchemaError("field 'landmarks' must be an array", 0);
    for (std::size_t i = 0; i < larr.size(); ++i) {
        const std::string path = "landmarks[" + std::to_string(i) + "].";
        const auto &l = larr[i];
        const auto &id = detail::require(l, "id", path);
        if (!id.is_number_integer()) throw SchemaError("field '" + path + "id' must be an integer", 0);
        landmarks.push_back({id.get<int>(),
                             {detail::number(detail::require(l, "x", path), path + "x"),
                              detail::number(detail::require(l, "y", path), path + "y")}});
    }

    SensorParams sensor;
    if (j.contains("sensor")) {
        const auto &s = j.at("sensor");
        sensor.range = detail::number_or(s, "r_sensor", sensor.range, "sensor.");
        sensor.eta_r = detail::number_or(s, "eta_r", sensor.eta_r, "sensor.");
        sensor.eta_theta = detail::number_or(s, "eta_theta", sensor.eta_theta, "sensor.");
        sensor.sigma_b_r = detail::number_or(s, "sigma_b_r", sensor.sigma_b_r, "sensor.");
        sensor.sigma_b_theta = detail::number_or(s, "sigma_b_theta", sensor.sigma_b_theta, "sensor.");
        sensor.occlusion = detail::bool_or(s, "occlusion", sensor.occlusion, "sensor.");
        for (const double v : {sensor.eta_r, sensor.eta_theta, sensor.sigma_b_r, sensor.sigma_b_theta}) {
            if (v < 0.0) throw ValidationError("sensor", "noise parameters must be >= 0");
        }
    }

    sc.env = Environment(bounds, std::move(obstacles), std::move(landmarks), robot_radius, sensor);

    if (j.contains("process_noise")) {
        const auto &pn = j.at("process_noise");
        const double sv = detail::number_or(pn, "sigma_v", 0.01, "process_noise.");
        const double sw = detail::number_or(pn, "sigma_omega", 0.01, "process_noise.");
        if (sv < 0.0 || sw < 0.0) throw ValidationError("process_noise", "must be >= 0");
        sc.process_cov = Mat2::Zero();
        sc.process_cov(0, 0) = sv * sv;
        sc.process_cov(1, 1) = sw * sw;
    }

    if (j.contains("roadmap_nodes")) {
        const auto &arr = j.at("roadmap_nodes");
        if (!arr.is_array()) throw SchemaError("field 'roadmap_nodes' must be an array", 0);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "roadmap_nodes[" + std::to_string(i) + "]";
            sc.roadmap_nodes.push_back(detail::pose(arr[i], path));
            if (!sc.env.is_state_valid(sc.roadmap_nodes.back())) {
                throw ValidationError(path, "node is not a valid state");
            }
        }
    }

    sc.start = detail::pose(detail::require(j, "start", ""), "start");
    sc.goal = detail::pose(detail::require(j, "goal", ""), "goal");
    if (!sc.env.is_state_valid(sc.start)) throw ValidationError("start", "not a valid state");
    if (!sc.env.is_state_valid(sc.goal)) throw ValidationError("goal", "not a valid state");

    if (j.contains("kidnap") && !j.at("kidnap").is_null()) {
        const auto &k = j.at("kidnap");
        sc.kidnap.enabled = detail::bool_or(k, "enabled", true, "kidnap.");
        if (k.contains("time_step") && !k.at("time_step").is_null()) {
            sc.kidnap.time_step = detail::int_or(k, "time_step", 0, "kidnap.");
            if (*sc.kidnap.time_step < 1) throw ValidationError("kidnap.time_step", "must be >= 1");
        }
        if (k.contains("trigger_region") && !k.at("trigger_region").is_null()) {
            const auto &r = k.at("trigger_region");
            Circle c;
            c.center = {detail::number(detail::require(r, "x", "kidnap.trigger_region."), "kidnap.trigger_region.x"),
                        detail::number(detail::require(r, "y", "kidnap.trigger_region."), "kidnap.trigger_region.y")};
            c.radius = detail::number(detail::require(r, "radius", "kidnap.trigger_region."),
                                      "kidnap.trigger_region.radius");
            detail::require_positive(c.radius, "kidnap.trigger_region.radius");
            sc.kidnap.trigger_region = c;
        }
        sc.kidnap.destination = detail::pose(detail::require(k, "destination", "kidnap."), "kidnap.destination");
        if (!sc.env.is_state_valid(sc.kidnap.destination)) {
            throw ValidationError("kidnap.destination", "not a valid state");
        }
        if (sc.kidnap.enabled && !sc.kidnap.time_step && !sc.kidnap.trigger_region) {
            throw ValidationError("kidnap", "needs time_step or trigger_region");
        }
    }

    sc.planner = detail::parse_planner(j.contains("planner") ? j.at("planner") : json::object());
    return sc;
}

inline std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Scenario load_scenario(const std::filesystem::path &path) {
    return parse_scenario(read_text_file(path));
}

inline Environment load_environment(const std::filesystem::path &path) {
    return load_scenario(path).env;
}

// Built-in names resolve against the shipped scenarios directory; anything
// else is treated as a path.
inline std::filesystem::path resolve_scenario(const std::string &name_or_path) {
    namespace fs = std::filesystem;
    if (fs::exists(name_or_path)) return name_or_path;
    std::vector<fs::path> roots;
    if (const char *env = std::getenv("M3P_SCENARIO_DIR")) roots.emplace_back(env);
#ifdef M3P_SCENARIO_DIR
    roots.emplace_back(M3P_SCENARIO_DIR);
#endif
    for (const auto &root : roots) {
        const fs::path candidate = root / (name_or_path + ".json");
        if (fs::exists(candidate)) return candidate;
    }
    throw Error("unknown scenario '" + name_or_path + "'");
}

}  // namespace m3p

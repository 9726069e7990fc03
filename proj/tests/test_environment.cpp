#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <tuple>

#include "support.hpp"

using namespace m3p;
using test::box;
using test::world;

namespace {

// Oracles kept independent of the library geometry code.
double orient(const Vec2 &a, const Vec2 &b, const Vec2 &c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double seg_point(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

bool inside_ccw(const std::vector<Vec2> &poly, const Vec2 &p) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (orient(poly[i], poly[(i + 1) % poly.size()], p) < 0.0) return false;
    }
    return true;
}

bool segments_cross(const Vec2 &a, const Vec2 &b, const Vec2 &c, const Vec2 &d) {
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
        o4 != 0) {
        return true;
    }
    const auto on = [](const Vec2 &p, const Vec2 &q, const Vec2 &r) {
        return std::abs(orient(p, q, r)) < 1e-15 && seg_point(r, p, q) < 1e-12;
    };
    return on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b);
}

double poly_point(const std::vector<Vec2> &poly, const Vec2 &p) {
    if (inside_ccw(poly, p)) return 0.0;
    double best = 1e300;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        best = std::min(best, seg_point(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return best;
}

bool poly_blocks(const std::vector<Vec2> &poly, const Vec2 &a, const Vec2 &b) {
    if (inside_ccw(poly, a) || inside_ccw(poly, b)) return true;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (segments_cross(a, b, poly[i], poly[(i + 1) % poly.size()])) return true;
    }
    return false;
}

// Exact clearance of a swept segment from a polygon.
double poly_segment(const std::vector<Vec2> &poly, const Vec2 &a, const Vec2 &b) {
    if (poly_blocks(poly, a, b)) return 0.0;
    double best = std::min(poly_point(poly, a), poly_point(poly, b));
    for (const auto &v : poly) best = std::min(best, seg_point(v, a, b));
    return best;
}

double bounds_clearance(const Environment &env, const Vec2 &p) {
    const auto &bb = env.bounds();
    return std::min({p.x() - bb.min.x(), bb.max.x() - p.x(), p.y() - bb.min.y(), bb.max.y() - p.y()});
}

Environment random_world(std::mt19937_64 &rng, int n_obstacles) {
    std::uniform_real_distribution<double> pos(1.0, 8.3);
    std::uniform_real_distribution<double> size(0.3, 1.5);
    std::vector<Obstacle> obs;
    for (int i = 0; i < n_obstacles; ++i) {
        const double x = pos(rng), y = pos(rng);
        if (i % 2 == 0) {
            obs.push_back(box(x, y, x + size(rng), y + size(rng)));
        } else {
            const double s = size(rng);
            obs.emplace_back(std::vector<Vec2>{{x, y}, {x + s, y + 0.2 * s}, {x + 0.3 * s, y + s}});
        }
    }
    return world(10, 10, std::move(obs), {{1, {5.0, 5.0}}});
}

}  // namespace

TEST(LoadEnvironment, FourRoomHasIdenticalRoomsAndDuplicateIds) {
    const Environment env = load_environment(resolve_scenario("fourroom"));
    using Key = std::tuple<int, long, long>;
    std::vector<std::vector<Key>> rooms(4);
    for (const auto &l : env.landmarks()) {
        if (l.position.y() > 7.0) continue;
        const int k = static_cast<int>(std::floor(l.position.x() / 6.0));
        ASSERT_GE(k, 0);
        ASSERT_LT(k, 4);
        rooms[static_cast<std::size_t>(k)].emplace_back(
            l.id, std::lround((l.position.x() - 6.0 * k) * 1000), std::lround(l.position.y() * 1000));
    }
    for (auto &r : rooms) std::sort(r.begin(), r.end());
    EXPECT_GE(rooms[0].size(), 3u);
    for (int k = 1; k < 4; ++k) EXPECT_EQ(rooms[static_cast<std::size_t>(k)], rooms[0]);

    // Every wall of room 0 reappears shifted by one room width in rooms 1..3.
    const auto has = [&](const Obstacle &o, double dx) {
        for (const auto &q : env.obstacles()) {
            if (q.vertices().size() != o.vertices().size()) continue;
            bool same = true;
            for (std::size_t i = 0; i < o.vertices().size(); ++i) {
                same = same && (q.vertices()[i] - o.vertices()[i] - Vec2(dx, 0)).norm() < 1e-9;
            }
            if (same) return true;
        }
        return false;
    };
    int room0_walls = 0;
    for (const auto &o : env.obstacles()) {
        const auto &bb = o.bounding_box();
        if (bb.min.x() < 0.0 || bb.max.x() > 7.0) continue;
        ++room0_walls;
        for (int k = 1; k < 4; ++k) EXPECT_TRUE(has(o, 6.0 * k));
    }
    EXPECT_GE(room0_walls, 3);
}

TEST(LoadEnvironment, MinimalWorldIsValid) {
    const auto sc = parse_scenario(R"({"bounds": {"xmin": 0, "ymin": 0, "xmax": 5, "ymax": 5},
        "robot_radius": 0.2, "obstacles": [], "landmarks": [{"id": 1, "x": 2, "y": 2}],
        "start": [1, 1, 0], "goal": [4, 4, 0]})");
    EXPECT_TRUE(sc.env.obstacles().empty());
    ASSERT_EQ(sc.env.landmarks().size(), 1u);
    EXPECT_EQ(sc.env.landmarks()[0].id, 1);
}

TEST(LoadEnvironment, TwoVertexObstacleNamesTheField) {
    try {
        parse_scenario(R"({"bounds": {"xmin": 0, "ymin": 0, "xmax": 5, "ymax": 5},
            "robot_radius": 0.2, "obstacles": [[[1, 1], [2, 2]]], "landmarks": [],
            "start": [4, 4, 0], "goal": [4, 4, 0]})");
        FAIL() << "expected a validation error";
    } catch (const ValidationError &e) {
        EXPECT_EQ(e.field, "obstacles[0]");
    }
}

TEST(LoadEnvironment, ConcaveAndClockwiseObstaclesAreRejected) {
    EXPECT_THROW(world(5, 5, {Obstacle({{1, 1}, {1, 2}, {2, 2}, {2, 1}})}, {}), ValidationError);
    EXPECT_THROW(world(5, 5, {Obstacle({{1, 1}, {3, 1}, {2, 1.5}, {3, 3}, {1, 3}})}, {}),
                 ValidationError);
}

TEST(LoadEnvironment, ParseErrorReportsLine) {
    try {
        parse_scenario("{\n  \"bounds\": {\n    \"xmin\": 0,,\n  }\n}");
        FAIL() << "expected a schema error";
    } catch (const SchemaError &e) {
        EXPECT_EQ(e.line, 3);
    }
}

TEST(LoadEnvironment, MissingRequiredFieldIsSchemaError) {
    EXPECT_THROW(parse_scenario(R"({"robot_radius": 0.2, "landmarks": []})"), SchemaError);
}

TEST(LoadEnvironment, InvalidValuesNameTheField) {
    const auto field_of = [](const std::string &text) -> std::string {
        try {
            parse_scenario(text);
        } catch (const ValidationError &e) {
            return e.field;
        }
        return "";
    };
    const std::string base = R"("bounds": {"xmin": 0, "ymin": 0, "xmax": 5, "ymax": 5}, "landmarks": [])";
    EXPECT_EQ(field_of("{" + base + R"(, "robot_radius": 0, "start": [1,1,0], "goal": [2,2,0]})"),
              "robot_radius");
    EXPECT_EQ(field_of("{" + base + R"(, "robot_radius": 0.2, "start": [0,0,0], "goal": [2,2,0]})"),
              "start");
    EXPECT_EQ(field_of("{" + base +
                       R"(, "robot_radius": 0.2, "start": [1,1,0], "goal": [2,2,0],
                           "obstacles": [[[4,4],[6,4],[6,6],[4,6]]]})"),
              "obstacles[0]");
}

TEST(LoadEnvironment, MissingFileIsAnError) {
    EXPECT_THROW(load_environment("/nonexistent/scenario.json"), Error);
}

TEST(StateValidity, FreeCenterAndInsideObstacle) {
    const auto env = world(10, 10, {box(4, 4, 6, 6)}, {});
    EXPECT_TRUE(env.is_state_valid({2, 2, 0}));
    EXPECT_FALSE(env.is_state_valid({5, 5, 0}));
    EXPECT_FALSE(env.is_state_valid({0.1, 5, 0}));
}

TEST(StateValidity, WithinRadiusOfEdgeMatchesDistanceOracle) {
    const auto env = world(10, 10, {box(4, 4, 6, 6)}, {}, 0.3);
    const std::vector<Vec2> poly = env.obstacles()[0].vertices();
    for (const double gap : {0.1, 0.29, 0.2999999, 0.3000001, 0.31, 0.5}) {
        const Vec2 p(6.0 + gap, 5.0);
        EXPECT_EQ(env.is_state_valid({p.x(), p.y(), 0}), poly_point(poly, p) > 0.3) << gap;
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 5000; ++i) {
        const Vec2 p(u(rng), u(rng));
        const bool oracle = poly_point(poly, p) > 0.3 && bounds_clearance(env, p) >= 0.3;
        EXPECT_EQ(env.is_state_valid({p.x(), p.y(), 0}), oracle);
    }
}

TEST(StateValidity, IndependentOfHeading) {
    std::mt19937_64 rng(5);
    const auto env = random_world(rng, 6);
    std::uniform_real_distribution<double> u(0.0, 10.0), th(-kPi, kPi);
    for (int i = 0; i < 2000; ++i) {
        const double x = u(rng), y = u(rng);
        EXPECT_EQ(env.is_state_valid({x, y, th(rng)}), env.is_state_valid({x, y, th(rng)}));
    }
}

TEST(SegmentValidity, DegenerateAndWallCrossing) {
    const auto env = world(10, 10, {box(4, 0, 5, 10)}, {});
    EXPECT_TRUE(env.segment_valid(RobotState{2, 2, 0}, RobotState{2, 2, 0}));
    EXPECT_FALSE(env.segment_valid(RobotState{4.5, 2, 0}, RobotState{4.5, 2, 0}));
    EXPECT_FALSE(env.segment_valid(RobotState{2, 2, 0}, RobotState{8, 2, 0}));
    EXPECT_TRUE(env.segment_valid(RobotState{1, 1, 0}, RobotState{3, 9, 0}));
}

// Samples are at most robot_radius / 2 apart, so an obstacle point at
// perpendicular distance d from the segment is seen at distance at most
// sqrt(d^2 + (r/4)^2): clearance below r * sqrt(15/16) is always caught and
// clearance above r never is.
TEST(SegmentValidity, GrazingAgreesWithContinuousOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.3, 9.7);
    int decided = 0;
    for (int w = 0; w < 40; ++w) {
        const auto env = random_world(rng, 5);
        const double r = env.robot_radius();
        for (int i = 0; i < 200; ++i) {
            const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
            double clear = std::min(bounds_clearance(env, a), bounds_clearance(env, b));
            for (const auto &o : env.obstacles()) clear = std::min(clear, poly_segment(o.vertices(), a, b));
            const bool valid = env.segment_valid(a, b);
            if (clear > r) {
                EXPECT_TRUE(valid);
                ++decided;
            } else if (clear < r * std::sqrt(15.0 / 16.0)) {
                EXPECT_FALSE(valid);
                ++decided;
            }
        }
    }
    EXPECT_GT(decided, 7000);
}

TEST(SegmentValidity, Symmetric) {
    std::mt19937_64 rng(17);
    const auto env = random_world(rng, 8);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 3000; ++i) {
        const RobotState a{u(rng), u(rng), 0}, b{u(rng), u(rng), 1};
        EXPECT_EQ(env.segment_valid(a, b), env.segment_valid(b, a));
    }
}

TEST(Visibility, RangeAndOcclusion) {
    SensorParams s;
    s.range = 4.0;
    const auto env = world(20, 20, {box(9, 4, 10, 16)},
                           {{1, {5.0, 10.0}}, {2, {11.0, 10.0}}, {3, {7.0, 14.0}}, {4, {7.0, 14.5}}},
                           0.2, s);
    const auto ids = [&](const RobotState &st) {
        std::vector<int> out;
        for (const auto &l : env.visible_landmarks(st)) out.push_back(l.id);
        return out;
    };
    // 1 at r/2 with a clear line, 2 behind the wall, 3 exactly at r_sensor, 4 beyond.
    EXPECT_EQ(ids({7.0, 10.0, 0.0}), (std::vector<int>{1, 3}));
    EXPECT_TRUE(poly_blocks(env.obstacles()[0].vertices(), {7.0, 10.0}, {11.0, 10.0}));
}

TEST(Visibility, MatchesSegmentPolygonOracle) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int w = 0; w < 20; ++w) {
        auto base = random_world(rng, 6);
        std::vector<Landmark> lms;
        for (int i = 0; i < 12; ++i) lms.push_back({i, {u(rng), u(rng)}});
        const auto env = world(10, 10, base.obstacles(), lms);
        for (int i = 0; i < 100; ++i) {
            const RobotState s{u(rng), u(rng), 0};
            std::vector<std::size_t> expected;
            for (std::size_t k = 0; k < lms.size(); ++k) {
                bool clear = (lms[k].position - s.position()).norm() <= env.sensor().range;
                for (const auto &o : env.obstacles()) {
                    clear = clear && !poly_blocks(o.vertices(), s.position(), lms[k].position);
                }
                if (clear) expected.push_back(k);
            }
            EXPECT_EQ(env.visible_landmark_indices(s), expected);
        }
    }
}

TEST(Visibility, AddingAnObstacleNeverEnlargesTheVisibleSet) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int w = 0; w < 30; ++w) {
        std::vector<Landmark> lms;
        for (int i = 0; i < 10; ++i) lms.push_back({i, {u(rng), u(rng)}});
        const auto sparse = random_world(rng, 3);
        auto obs = sparse.obstacles();
        const double x = u(rng) * 0.8, y = u(rng) * 0.8;
        obs.push_back(box(x, y, x + 1.0, y + 0.5));
        const auto before = world(10, 10, sparse.obstacles(), lms);
        const auto after = world(10, 10, obs, lms);
        for (int i = 0; i < 50; ++i) {
            const RobotState s{u(rng), u(rng), 0};
            const auto b = before.visible_landmark_indices(s);
            const auto a = after.visible_landmark_indices(s);
            EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
            for (const auto k : b) {
                EXPECT_LE((lms[k].position - s.position()).norm(), before.sensor().range);
            }
        }
    }
}

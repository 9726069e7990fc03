#pragma once

#include <cmath>
#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "m3p/types.hpp"

namespace m3p {

// A trace read back from JSONL.
struct TraceData {
    nlohmann::json header;
    std::optional<nlohmann::json> graph;
    std::vector<nlohmann::json> steps;
    std::vector<nlohmann::json> epochs;
    std::optional<nlohmann::json> summary;

    const nlohmann::json *step_at(int t) const {
        for (const auto &s : steps) {
            if (s.at("t").get<int>() == t) return &s;
        }
        return nullptr;
    }
};

inline TraceData load_trace(std::istream &in) {
    TraceData out;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw SchemaError(std::string("trace line ") + std::to_string(lineno) + ": " + e.what(),
                              lineno);
        }
        const std::string type = j.value("type", "");
        if (type == "header") {
            out.header = std::move(j);
            have_header = true;
        } else if (type == "graph") {
            out.graph = std::move(j);
        } else if (type == "step") {
            out.steps.push_back(std::move(j));
        } else if (type == "epoch") {
            out.epochs.push_back(std::move(j));
        } else if (type == "summary") {
            out.summary = std::move(j);
        }
    }
    if (!have_header) throw SchemaError("trace has no header record", 1);
    return out;
}

namespace svg_detail {

struct Frame {
    double xmin, ymin, xmax, ymax, scale;
    double px(double x) const { return (x - xmin) * scale; }
    double py(double y) const { return (ymax - y) * scale; }
};

inline std::string num(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << v;
    return ss.str();
}

}  // namespace svg_detail

// One frame: obstacles, labelled landmarks, roadmap nodes, the true robot,
// modes as 2-sigma ellipses (opacity follows weight) and, during a recovery
// epoch, the candidate paths with the selected one highlighted.
inline std::string render_svg(const TraceData &trace, int t) {
    const auto *step = trace.step_at(t);
    if (!step) throw RenderError("trace has no step " + std::to_string(t));
    const auto &env = trace.header.at("env");
    const auto &b = env.at("bounds");
    svg_detail::Frame f{b.at("xmin").get<double>(), b.at("ymin").get<double>(),
                        b.at("xmax").get<double>(), b.at("ymax").get<double>(), 40.0};
    using svg_detail::num;
    std::ostringstream s;
    const double w = (f.xmax - f.xmin) * f.scale;
    const double h = (f.ymax - f.ymin) * f.scale;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"white\" stroke=\"black\"/>\n";

    for (const auto &poly : env.at("obstacles")) {
        s << "<polygon fill=\"#999\" stroke=\"none\" points=\"";
        for (const auto &v : poly) {
            s << num(f.px(v[0].get<double>())) << ',' << num(f.py(v[1].get<double>())) << ' ';
        }
        s << "\"/>\n";
    }

    for (const auto &n : trace.header.at("roadmap_nodes")) {
        s << "<circle cx=\"" << num(f.px(n[0].get<double>())) << "\" cy=\""
          << num(f.py(n[1].get<double>())) << "\" r=\"2\" fill=\"#6a6\"/>\n";
    }

    for (const auto &l : env.at("landmarks")) {
        const double x = f.px(l.at("x").get<double>());
        const double y = f.py(l.at("y").get<double>());
        s << "<rect x=\"" << num(x - 4) << "\" y=\"" << num(y - 4)
          << "\" width=\"8\" height=\"8\" fill=\"#36c\"/>\n";
        s << "<text x=\"" << num(x + 5) << "\" y=\"" << num(y - 5)
          << "\" font-size=\"10\" fill=\"#036\">" << l.at("id").get<int>() << "</text>\n";
    }

    const auto &goal = trace.header.at("goal");
    s << "<circle cx=\"" << num(f.px(goal[0].get<double>())) << "\" cy=\""
      << num(f.py(goal[1].get<double>())) << "\" r=\"6\" fill=\"none\" stroke=\"#0a0\" stroke-width=\"2\"/>\n";

    // Candidate paths of the epoch that is executing at t.
    for (const auto &e : trace.epochs) {
        const int t0 = e.at("t").get<int>();
        const int executed = e.at("executed").get<int>();
        if (t <= t0 || t > t0 + executed) continue;
        const auto selected = e.at("selected").get<std::size_t>();
        const auto &cands = e.at("candidates");
        for (std::size_t j = 0; j < cands.size(); ++j) {
            const bool chosen = j == selected;
            s << "<polyline fill=\"none\" stroke=\"" << (chosen ? "#d40" : "#e9b")
              << "\" stroke-width=\"" << (chosen ? 2 : 1) << "\" points=\"";
            for (const auto &p : cands[j].at("waypoints")) {
                s << num(f.px(p[0].get<double>())) << ',' << num(f.py(p[1].get<double>())) << ' ';
            }
            s << "\"/>\n";
        }
    }

    if (step->contains("modes")) {
        for (const auto &m : step->at("modes")) {
            const auto &mu = m.at("mu");
            const auto &sg = m.at("sigma");
            Mat2 cov;
            cov << sg[0].get<double>(), sg[1].get<double>(), sg[3].get<double>(), sg[4].get<double>();
            const Eigen::SelfAdjointEigenSolver<Mat2> eig(cov);
            const Vec2 ev = eig.eigenvalues().cwiseMax(0.0);
            const Vec2 major = eig.eigenvectors().col(1);
            const double angle = -std::atan2(major.y(), major.x()) * 180.0 / kPi;
            const double rx = std::max(2.0, 2.0 * std::sqrt(ev(1)) * f.scale);
            const double ry = std::max(2.0, 2.0 * std::sqrt(ev(0)) * f.scale);
            const double opacity = std::clamp(0.15 + 0.85 * m.at("w").get<double>(), 0.0, 1.0);
            const double cx = f.px(mu[0].get<double>());
            const double cy = f.py(mu[1].get<double>());
            s << "<ellipse cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" rx=\"" << num(rx)
              << "\" ry=\"" << num(ry) << "\" transform=\"rotate(" << num(angle) << ' ' << num(cx)
              << ' ' << num(cy) << ")\" fill=\"red\" fill-opacity=\"" << num(opacity)
              << "\" stroke=\"#900\"/>\n";
        }
    }

    const auto &truth = step->at("truth");
    const double tx = f.px(truth[0].get<double>());
    const double ty = f.py(truth[1].get<double>());
    const double th = truth[2].get<double>();
    const double rr = trace.header.at("env").at("robot_radius").get<double>() * f.scale;
    s << "<circle cx=\"" << num(tx) << "\" cy=\"" << num(ty) << "\" r=\"" << num(rr)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<line x1=\"" << num(tx) << "\" y1=\"" << num(ty) << "\" x2=\""
      << num(tx + rr * std::cos(th)) << "\" y2=\"" << num(ty - rr * std::sin(th))
      << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<text x=\"6\" y=\"14\" font-size=\"12\">t=" << t << ' '
      << step->at("phase").get<std::string>() << " modes=" << step->at("n_modes").get<int>()
      << "</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace m3p

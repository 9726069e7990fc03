#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "m3p/m3p.hpp"
#include "m3p/svg.hpp"
#include "m3p/trace.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitDone = 0;
constexpr int kExitConfig = 1;
constexpr int kExitFailed = 2;

struct SeedRange {
    std::uint64_t first = 1;
    std::uint64_t last = 1;
};

SeedRange parse_seeds(const std::string &text) {
    const auto dots = text.find("..");
    SeedRange r;
    if (dots == std::string::npos) {
        r.first = r.last = std::stoull(text);
    } else {
        r.first = std::stoull(text.substr(0, dots));
        r.last = std::stoull(text.substr(dots + 2));
    }
    if (r.last < r.first) throw m3p::Error("empty seed range '" + text + "'");
    return r;
}

void write_svgs(const m3p::TraceData &trace, const fs::path &dir, int every) {
    fs::create_directories(dir);
    for (const auto &step : trace.steps) {
        const int t = step.at("t").get<int>();
        if (every > 0 && t % every != 0) continue;
        std::ostringstream name;
        name << "step_" << std::setw(6) << std::setfill('0') << t << ".svg";
        std::ofstream out(dir / name.str());
        out << m3p::render_svg(trace, t);
    }
}

int cmd_run(const std::string &scenario_name, std::uint64_t seed, const std::string &trace_path,
            int svg_every, bool literal) {
    m3p::Scenario sc = m3p::load_scenario(m3p::resolve_scenario(scenario_name));
    if (literal) sc.planner.literal_pseudocode = true;

    std::ostringstream buffer;
    m3p::TraceWriter writer(buffer);
    writer.header(sc, seed);
    writer.graph(m3p::build_uniqueness_graph(sc.env, sc.roadmap_nodes));
    const auto report = m3p::run_mission(sc, {seed, &writer});
    writer.summary(report);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        if (!out) throw m3p::Error("cannot write " + trace_path);
        out << buffer.str();
    }
    if (svg_every > 0) {
        std::istringstream in(buffer.str());
        const auto trace = m3p::load_trace(in);
        const fs::path dir = trace_path.empty() ? fs::path("svg") : fs::path(trace_path + ".svg");
        write_svgs(trace, dir, svg_every);
    }

    std::cout << "phase=" << m3p::phase_name(report.final_phase) << " steps=" << report.steps
              << " recoveries=" << report.recoveries.size()
              << " recovery_epochs=" << report.recovery_epochs()
              << " goal_error=" << report.goal_error << " wall_s=" << report.wall_seconds;
    if (!report.failure_reason.empty()) std::cout << " reason=\"" << report.failure_reason << '"';
    std::cout << '\n';
    return report.final_phase == m3p::Phase::Done ? kExitDone : kExitFailed;
}

int cmd_batch(const std::string &scenario_name, const std::string &seeds,
              const std::string &summary_path, int jobs) {
    const m3p::Scenario sc = m3p::load_scenario(m3p::resolve_scenario(scenario_name));
    const SeedRange range = parse_seeds(seeds);
    const std::size_t n = range.last - range.first + 1;
    std::vector<m3p::MissionReport> reports(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            reports[i] = m3p::run_mission(sc, {range.first + i, nullptr});
        }
    };
    const unsigned threads =
        std::max(1u, std::min<unsigned>(jobs > 0 ? static_cast<unsigned>(jobs)
                                                 : std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto &t : pool) t.join();

    std::ofstream out(summary_path);
    if (!out) throw m3p::Error("cannot write " + summary_path);
    out << "seed,success,steps,recovery_epochs,final_modes\n";
    bool all_done = true;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &r = reports[i];
        const bool ok = r.final_phase == m3p::Phase::Done;
        all_done = all_done && ok;
        out << range.first + i << ',' << (ok ? 1 : 0) << ',' << r.steps << ',' << r.recovery_epochs()
            << ',' << r.final_modes << '\n';
    }
    return all_done ? kExitDone : kExitFailed;
}

int cmd_render(const std::string &trace_path, const std::string &out_dir, int every,
               std::optional<int> step) {
    std::ifstream in(trace_path);
    if (!in) throw m3p::Error("cannot open " + trace_path);
    const auto trace = m3p::load_trace(in);
    if (step) {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / ("step_" + std::to_string(*step) + ".svg"));
        out << m3p::render_svg(trace, *step);
        return kExitDone;
    }
    write_svgs(trace, out_dir, every);
    return kExitDone;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multi-modal belief-space planner simulator"};
    app.require_subcommand(1);

    std::string scenario;
    std::uint64_t seed = 1;
    std::string trace_path;
    int svg_every = 0;
    bool literal = false;
    auto *run = app.add_subcommand("run", "Run one mission");
    run->add_option("scenario", scenario, "Built-in name or scenario file")->required();
    run->add_option("--seed", seed, "Random seed");
    run->add_option("--trace", trace_path, "JSONL trace output");
    run->add_option("--svg-every", svg_every, "Write an SVG frame every K steps");
    run->add_flag("--fidelity-paper-pseudocode", literal,
                  "Use the literal gain sign and aggregation of the pseudocode");

    std::string seeds = "1..20";
    std::string summary = "summary.csv";
    int jobs = 0;
    auto *batch = app.add_subcommand("batch", "Run one mission per seed");
    batch->add_option("scenario", scenario, "Built-in name or scenario file")->required();
    batch->add_option("--seeds", seeds, "Seed range A..B");
    batch->add_option("--summary", summary, "CSV summary output");
    batch->add_option("--jobs", jobs, "Worker threads (0: all cores)");

    std::string render_trace;
    std::string out_dir = "svg";
    int every = 50;
    std::optional<int> step;
    auto *render = app.add_subcommand("render", "Render SVG frames from a trace");
    render->add_option("trace", render_trace, "JSONL trace")->required();
    render->add_option("--out", out_dir, "Output directory");
    render->add_option("--every", every, "Frame interval in steps");
    render->add_option("--step", step, "Render only this step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(scenario, seed, trace_path, svg_every, literal);
        if (*batch) return cmd_batch(scenario, seeds, summary, jobs);
        if (*render) return cmd_render(render_trace, out_dir, every, step);
    } catch (const m3p::SchemaError &e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const m3p::ValidationError &e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const m3p::RenderError &e) {
        std::cerr << "render error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const m3p::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

// SPDX-License-Identifier: Apache-2.0
// Command-line front end: scene simulation and the processing stages.
#include "sargcp/error.hpp"
#include "sargcp/pipeline.hpp"
#include "sargcp/scene_sim.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <functional>
#include <iostream>
#include <optional>
#include <thread>

namespace pl = sargcp::pipeline;

namespace {

struct Globals {
    std::string manifest;
    std::string out = "out";
    unsigned threads = 0;
    std::uint64_t seed = 1;
    std::string log_level = "info";
    std::string method;
};

/// Stage parameters given on the command line; merged into the manifest's
/// parameter blocks.
struct Overrides {
    std::map<std::string, std::map<std::string, double>> values;

    void apply(pl::Manifest& m) const {
        for (const auto& [stage, kv] : values)
            for (const auto& [k, v] : kv) m.parameters[stage][k] = v;
    }
};

void add_param(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& stage,
               const std::string& key, const std::string& help) {
    app->add_option_function<double>(
        flag, [&ov, stage, key](double v) { ov.values[stage][key] = v; }, help);
}

pl::Manifest load(const Globals& g, const Overrides& ov) {
    if (g.manifest.empty()) throw sargcp::DomainError("--manifest is required");
    pl::Manifest m = pl::load_manifest(g.manifest);
    if (!g.method.empty()) {
        m.method = g.method;
        m.validate();
    }
    ov.apply(m);
    return m;
}

int guarded(const std::string& stage, const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        const int code = pl::exit_code_for(e);
        spdlog::error("{} failed: {}", stage, e.what());
        std::cerr << stage << ": " << e.what() << "\n";
        return code;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Absolute ground control points from stacks of SAR acquisitions"};
    app.require_subcommand(1);
    Globals g;
    Overrides ov;
    app.add_option("--manifest", g.manifest, "Scene manifest (manifest.json)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads (0: hardware concurrency)");
    app.add_option("--seed", g.seed, "Random seed for simulation");
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene");
    std::string preset = "minimal";
    bool zero_noise = false, no_errors = false;
    std::optional<std::size_t> epochs;
    std::optional<std::string> method;
    simulate->add_option("--preset", preset, "oulu | berlin | minimal")
        ->check(CLI::IsMember({"oulu", "berlin", "minimal"}));
    simulate->add_flag("--zero-noise", zero_noise, "No clutter and no timing noise");
    simulate->add_flag("--no-error-terms", no_errors, "Do not inject correction terms");
    simulate->add_option("--epochs", epochs, "Acquisitions per geometry");
    simulate->add_option("--method", method, "Override the preset's detection method")
        ->check(CLI::IsMember({"fusion", "optical", "road"}));

    auto* detect = app.add_subcommand("detect", "Identify candidate scatterers");
    detect->add_option("--method", g.method, "fusion | optical | road (default: manifest)")
        ->check(CLI::IsMember({"fusion", "optical", "road"}));
    add_param(detect, ov, "--radius-px", "detect", "radius_px", "Road search radius, pixels");
    add_param(detect, ov, "--adi-max", "detect", "adi_max", "ADI threshold");
    add_param(detect, ov, "--match-dist", "detect", "match_dist_m", "Cross-geometry match distance, meters");
    add_param(detect, ov, "--node-spacing", "detect", "node_spacing_m", "Road node spacing, meters");
    add_param(detect, ov, "--ncc-threshold", "detect", "ncc_threshold", "NCC score threshold");
    add_param(detect, ov, "--cluster-radius", "detect", "cluster_radius_m", "Mean-shift radius, meters");
    add_param(detect, ov, "--sharpen-a", "detect", "sharpen_a", "High-boost factor (0: off)");
    add_param(detect, ov, "--bright-percentile", "detect", "bright_percentile", "Bright point percentile");
    add_param(detect, ov, "--cell", "detect", "cell_m", "Fusion correlation cell, meters");
    add_param(detect, ov, "--search-radius", "detect", "search_radius_m", "Fusion pairing radius, meters");
    std::vector<double> rect;
    detect->add_option("--template-rect", rect, "row col rows cols anchor_row anchor_col")->expected(6);

    auto* pta = app.add_subcommand("pta", "Point target analysis of every candidate pixel");
    add_param(pta, ov, "--factor", "pta", "factor", "Oversampling factor");
    auto* screen = app.add_subcommand("screen", "Phase-noise screening");
    add_param(screen, ov, "--visibility", "screen", "visibility_max_rad", "Maximum phase noise, radians");
    auto* correct = app.add_subcommand("correct", "Remove timing error terms");
    auto* solve = app.add_subcommand("solve", "Stereo positioning with outlier cascade");
    add_param(solve, ov, "--min-observations", "solve", "min_observations", "Per geometry");
    auto* report = app.add_subcommand("report", "Summaries and, with truth, scores");
    std::optional<std::string> truth;
    report->add_option("--truth", truth, "Truth target table (default: manifest)");
    auto* run_all = app.add_subcommand("run-all", "detect, pta, screen, correct, solve, report");
    run_all->add_option("--method", g.method, "fusion | optical | road (default: manifest)")
        ->check(CLI::IsMember({"fusion", "optical", "road"}));

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    if (g.threads == 0) g.threads = std::max(1u, std::thread::hardware_concurrency());
    const pl::RunOptions opts{g.out, g.threads};

    if (simulate->parsed())
        return guarded("simulate", [&] {
            auto cfg = sargcp::sim::preset(preset, g.seed);
            cfg.zero_noise = zero_noise;
            cfg.error_terms = !no_errors;
            if (epochs)
                for (auto& geo : cfg.geometries) geo.epochs = *epochs;
            if (method) cfg.method = *method;
            const auto scene = sargcp::sim::build_scene(cfg);
            std::cout << sargcp::sim::write_scene(scene, g.out) << "\n";
            return 0;
        });

    const auto stage = [&](const std::string& name, auto&& fn) {
        return guarded(name, [&] {
            pl::Manifest m = load(g, ov);
            if (rect.size() == 6)
                for (std::size_t i = 0; i < 6; ++i) m.template_rect[i] = rect[i];
            return fn(m);
        });
    };
    if (detect->parsed())
        return stage("detect", [&](const pl::Manifest& m) {
            return pl::run_detect(m, opts).candidates_out == 0 ? pl::kEmptyResult : pl::kOk;
        });
    if (pta->parsed()) return stage("pta", [&](const pl::Manifest& m) { return pl::run_pta(m, opts), 0; });
    if (screen->parsed()) return stage("screen", [&](const pl::Manifest& m) { return pl::run_screen(m, opts), 0; });
    if (correct->parsed()) return stage("correct", [&](const pl::Manifest& m) { return pl::run_correct(m, opts), 0; });
    if (solve->parsed()) return stage("solve", [&](const pl::Manifest& m) { return pl::run_solve(m, opts), 0; });
    if (report->parsed()) {
        if (g.manifest.empty()) return guarded("report", [&] { return pl::write_report(g.out, truth), 0; });
        return stage("report", [&](const pl::Manifest& m) {
            return pl::write_report(g.out, truth ? truth : m.truth_targets, pl::truth_class_for(m.method)), 0;
        });
    }
    if (run_all->parsed())
        return stage("run-all", [&](const pl::Manifest& m) {
            const auto logs = pl::run_all(m, opts);
            return logs.at(4).candidates_out == 0 ? pl::kEmptyResult : pl::kOk;
        });
    return 0;
}

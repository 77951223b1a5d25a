// SPDX-License-Identifier: Apache-2.0
#include "sargcp/pipeline.hpp"

#include "detail/parallel.hpp"
#include "sargcp/detect_fusion.hpp"
#include "sargcp/detect_optical.hpp"
#include "sargcp/detect_road.hpp"
#include "sargcp/error.hpp"
#include "sargcp/pta.hpp"
#include "sargcp/robust_stats.hpp"
#include "sargcp/scene_sim.hpp"
#include "sargcp/stereo_solver.hpp"
#include "sargcp/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

namespace sargcp::pipeline {

namespace fs = std::filesystem;
using io::num;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kChipSide = 32;
constexpr int kPeakSearchPx = 4;

[[noreturn]] void bad_manifest(const std::string& path, const std::string& why) {
    throw ParseError(path, ParseError::Unit::Line, 1, why);
}

std::string resolve(const fs::path& dir, const nlohmann::json& value, const std::string& manifest,
                    const std::string& what) {
    if (!value.is_string()) bad_manifest(manifest, "'" + what + "' must be a path string");
    const fs::path p = dir / value.get<std::string>();
    if (!fs::exists(p)) throw DomainError("manifest references missing file '" + p.string() + "' (" + what + ")");
    return p.string();
}

std::string table_path(const RunOptions& opts, const std::string& name) {
    return (fs::path(opts.out_dir) / name).string();
}

void write_log(const RunOptions& opts, const StageLog& log) {
    fs::create_directories(fs::path(opts.out_dir) / "logs");
    io::write_file(table_path(opts, "logs/" + log.stage + ".json"), log.to_json().dump(2) + "\n");
    spdlog::info("{}: {} candidates in, {} out", log.stage, log.candidates_in, log.candidates_out);
}

io::PointTable read_stage_table(const RunOptions& opts, const std::string& name, const std::string& stage) {
    const std::string path = table_path(opts, name);
    if (!fs::exists(path)) throw DomainError(stage + ": missing input '" + path + "'");
    return io::read_table(path);
}

std::size_t distinct(const io::PointTable& t, std::string_view column) {
    std::set<std::string> ids;
    for (std::size_t r = 0; r < t.size(); ++r) ids.insert(t.text(r, column));
    return ids.size();
}

Ecef row_position(const io::PointTable& t, std::size_t r) {
    return {t.number(r, "x"), t.number(r, "y"), t.number(r, "z")};
}

/// Master timing of an image pixel with the correction terms removed,
/// evaluated where the pixel geocodes at `height`.
RadarTiming corrected_pixel_timing(const io::AcquisitionMetadata& acq, const std::vector<ProviderPtr>& providers,
                                   const PixelCoord& pixel, double height) {
    const RadarTiming raw = pixel_to_timing(acq.geometry, pixel);
    RadarTiming t = raw;
    Ecef x = geocode(acq.geometry, raw, height);
    for (int pass = 0; pass < 2; ++pass) {
        const CorrectionContext ctx{acq.geometry, acq.acquisition_id, x, acq.epoch_days};
        t = correct_timing(raw, assemble_corrections(providers, ctx));
        x = geocode(acq.geometry, t, height);
    }
    return t;
}

std::string provenance_of(const CorrectionSet& set) {
    std::vector<std::string> keys;
    for (const TermId id : all_terms())
        if (set.provenance(id) != "zero") keys.push_back(term_key(id));
    if (keys.empty()) return "none";
    std::string out;
    for (const auto& k : keys) out += (out.empty() ? "" : ";") + k;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

std::vector<AcquisitionRef> Manifest::refs() const {
    std::vector<AcquisitionRef> out;
    for (const auto& a : acquisitions)
        out.push_back({a.acquisition_id, a.stack_id, std::make_shared<AcquisitionGeometry>(a.geometry), a.epoch_days});
    return out;
}

const io::AcquisitionMetadata& Manifest::acquisition(const std::string& id) const {
    for (const auto& a : acquisitions)
        if (a.acquisition_id == id) return a;
    throw DomainError("unknown acquisition '" + id + "'");
}

std::vector<ProviderPtr> Manifest::providers() const {
    return corrections ? read_correction_config(*corrections) : std::vector<ProviderPtr>{};
}

double Manifest::param(const std::string& stage, const std::string& key, double fallback) const {
    if (!parameters.contains(stage) || !parameters[stage].is_object()) return fallback;
    const auto& block = parameters[stage];
    if (!block.contains(key)) return fallback;
    if (!block[key].is_number()) bad_manifest(path, "parameter " + stage + "." + key + " must be numeric");
    return block[key].get<double>();
}

void Manifest::validate() const {
    const auto need_amplitudes = [&] {
        for (const auto& s : stacks)
            if (s.amplitudes.size() < 2) throw DomainError("stack '" + s.id + "' lists fewer than two amplitude rasters");
    };
    if (method == "road") {
        if (!roads) throw DomainError("road method needs 'roads'");
        need_amplitudes();
    } else if (method == "optical") {
        if (!optical) throw DomainError("optical method needs 'optical'");
        need_amplitudes();
    } else if (method == "fusion") {
        if (fusion_pairs.empty()) throw DomainError("fusion method needs 'fusion_pairs'");
        for (const auto& [a, b] : fusion_pairs)
            for (const auto& id : {a, b}) {
                const auto it = std::find_if(stacks.begin(), stacks.end(), [&](const StackEntry& s) { return s.id == id; });
                if (it == stacks.end() || !it->psi) throw DomainError("fusion stack '" + id + "' has no PSI cloud");
            }
    } else {
        throw DomainError("unknown detection method '" + method + "'");
    }
}

Manifest load_manifest(const std::string& path) {
    nlohmann::json j;
    {
        const std::string content = io::read_file(path);
        try {
            j = nlohmann::json::parse(content);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path, ParseError::Unit::Byte, e.byte, "invalid JSON");
        }
    }
    if (!j.is_object()) bad_manifest(path, "manifest must be a JSON object");
    if (j.value("format_version", 0) != io::kFormatVersion) bad_manifest(path, "unsupported format_version");
    for (const char* key : {"method", "zone", "acquisitions", "stacks", "slc_index"})
        if (!j.contains(key)) bad_manifest(path, std::string("missing key '") + key + "'");

    Manifest m;
    m.path = path;
    const fs::path dir = fs::absolute(fs::path(path)).parent_path();
    m.directory = dir.string();
    m.method = j["method"].get<std::string>();
    m.zone = j["zone"].get<int>();
    m.north = j.value("north", true);
    m.ground_height_m = j.value("ground_height_m", 0.0);
    for (const auto& a : j["acquisitions"]) {
        auto meta = io::read_metadata(resolve(dir, a.at("metadata"), path, "acquisition metadata"));
        if (a.contains("id") && a["id"].get<std::string>() != meta.acquisition_id)
            bad_manifest(path, "acquisition id mismatch for '" + meta.acquisition_id + "'");
        m.acquisitions.push_back(std::move(meta));
    }
    for (const auto& s : j["stacks"]) {
        StackEntry e;
        e.id = s.at("id").get<std::string>();
        e.heading = parse_heading(s.at("heading").get<std::string>());
        e.master = s.at("master").get<std::string>();
        if (s.contains("amplitudes"))
            for (const auto& a : s["amplitudes"]) e.amplitudes.push_back(resolve(dir, a, path, "amplitude raster"));
        if (s.contains("psi")) e.psi = resolve(dir, s["psi"], path, "PSI cloud");
        m.stacks.push_back(std::move(e));
    }
    m.slc_index = resolve(dir, j["slc_index"], path, "slc_index");
    if (j.contains("roads")) m.roads = resolve(dir, j["roads"], path, "roads");
    if (j.contains("optical")) {
        m.optical = resolve(dir, j["optical"].at("raster"), path, "optical raster");
        const auto& rect = j["optical"].at("template_rect");
        if (!rect.is_array() || rect.size() != 6) bad_manifest(path, "template_rect needs six numbers");
        for (std::size_t i = 0; i < 6; ++i) m.template_rect[i] = rect[i].get<double>();
    }
    if (j.contains("corrections")) m.corrections = resolve(dir, j["corrections"], path, "corrections");
    if (j.contains("fusion_pairs"))
        for (const auto& p : j["fusion_pairs"]) m.fusion_pairs.emplace_back(p.at(0), p.at(1));
    if (j.contains("truth") && j["truth"].contains("targets"))
        m.truth_targets = resolve(dir, j["truth"]["targets"], path, "truth targets");
    if (j.contains("parameters")) m.parameters = j["parameters"];

    m.validate();
    return m;
}

nlohmann::json StageLog::to_json() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["candidates_in"] = candidates_in;
    j["candidates_out"] = candidates_out;
    j["rows_in"] = rows_in;
    j["rows_out"] = rows_out;
    j["drops"] = drops;
    j["extra"] = extra;
    return j;
}

PixelPredictor raw_pixel_predictor(const Manifest& m) {
    auto providers = std::make_shared<const std::vector<ProviderPtr>>(m.providers());
    return [providers](const AcquisitionRef& acq, const Ecef& x) {
        const RadarTiming clean = radar_code(*acq.geometry, x);
        const CorrectionContext ctx{*acq.geometry, acq.acquisition_id, x, acq.epoch_days};
        return timing_to_pixel(*acq.geometry, apply_timing_errors(clean, assemble_corrections(*providers, ctx)));
    };
}

// ---------------------------------------------------------------------------
// detect

namespace {

const StackEntry& stack_entry(const Manifest& m, const std::string& id) {
    for (const auto& s : m.stacks)
        if (s.id == id) return s;
    throw DomainError("unknown stack '" + id + "'");
}

std::vector<Grid<float>> read_amplitudes(const StackEntry& s, PixelCoord& origin) {
    std::vector<Grid<float>> out;
    for (const auto& p : s.amplitudes) {
        io::RasterTile tile = io::read_raster(p);
        if (tile.type() != io::RasterType::Float32) throw DomainError("amplitude raster '" + p + "' is not float32");
        origin = tile.georef.origin();
        out.push_back(std::get<Grid<float>>(std::move(tile.data)));
    }
    return out;
}

std::vector<PsCandidate> detect_road(const Manifest& m, const RunOptions& opts, StageLog& log,
                                     const PixelPredictor& predict) {
    const auto providers = m.providers();
    const io::RoadNetwork net = io::read_roads(*m.roads);
    RoadSearchOptions search;
    search.radius_px = m.param("detect", "radius_px", search.radius_px);
    search.adi_max = m.param("detect", "adi_max", search.adi_max);
    search.suppress_px = m.param("detect", "suppress_px", search.suppress_px);
    MatchOptions match;
    if (m.parameters.contains("detect") && m.parameters["detect"].contains("match_dist_m")) {
        const double d = m.param("detect", "match_dist_m", 0.0);
        match.threshold_2_m = match.threshold_3_m = match.threshold_4_m = d;
    }
    const double spacing = m.param("detect", "node_spacing_m", 15.0);
    const auto nodes = densify(net, spacing);
    log.extra["road_nodes"] = nodes.size();
    log.extra["adi_convention"] = std::string(kAdiConvention);

    std::vector<StackDetections> stacks(m.stacks.size());
    detail::parallel_for(m.stacks.size(), opts.threads, [&](std::size_t s) {
        const StackEntry& st = m.stacks[s];
        const auto& master = m.acquisition(st.master);
        const AcquisitionRef master_ref{master.acquisition_id, master.stack_id,
                                        std::make_shared<AcquisitionGeometry>(master.geometry), master.epoch_days};
        PixelCoord origin;
        const auto amps = read_amplitudes(st, origin);
        const AdiRaster adi = compute_adi(amps);
        std::vector<PixelCoord> node_px;
        std::vector<double> node_h;
        for (const auto& n : nodes) {
            try {
                node_px.push_back(predict(master_ref, map_to_ecef({n.easting, n.northing, net.zone, net.north, n.height})));
                node_h.push_back(n.height);
            } catch (const Error&) {
            }
        }
        auto found = search_candidates(adi, origin, node_px, node_h, search);
        for (auto& c : found) c.timing = corrected_pixel_timing(master, providers, c.pixel, c.road_height);
        stacks[s] = {st.id, master_ref.geometry, std::move(found)};
    });

    // Per-stack candidates, kept for the distance histogram.
    io::PointTable per_stack({"stack_id", "line", "sample", "adi", "x", "y", "z"});
    per_stack.set_meta("kind", "stack_candidates");
    for (const auto& st : stacks) {
        log.extra["stack_candidates"][st.stack_id] = st.candidates.size();
        for (const auto& c : st.candidates) {
            Ecef x;
            try {
                x = geocode(*st.master, *c.timing, c.road_height);
            } catch (const Error&) {
                continue;
            }
            per_stack.add_row({st.stack_id, num(c.pixel.line), num(c.pixel.sample), num(c.adi), num(x.x()),
                               num(x.y()), num(x.z())});
        }
    }
    io::write_table(table_path(opts, "stack_candidates.csv"), per_stack);
    return match_across_geometries(stacks, m.refs(), match, predict);
}

std::vector<PsCandidate> detect_fusion(const Manifest& m, StageLog& log, const PixelPredictor& predict) {
    RegistrationOptions reg;
    reg.cell_m = m.param("detect", "cell_m", reg.cell_m);
    reg.subset_quantile = m.param("detect", "subset_quantile", reg.subset_quantile);
    reg.max_shift_m = m.param("detect", "max_shift_m", reg.max_shift_m);
    PairingOptions pairing;
    pairing.search_radius_m = m.param("detect", "search_radius_m", pairing.search_radius_m);
    const double thin_cell = m.param("detect", "thin_cell_m", 10.0);
    const auto refs = m.refs();

    std::vector<PsCandidate> out;
    for (const auto& [ida, idb] : m.fusion_pairs) {
        const PsiPointCloud a = psi_cloud_from_table(io::read_table(*stack_entry(m, ida).psi));
        const PsiPointCloud b = psi_cloud_from_table(io::read_table(*stack_entry(m, idb).psi));
        const std::string key = ida + "|" + idb;
        const CoarseShift coarse = coarse_register(a, b, reg);
        log.extra["fusion"][key]["coarse_shift"] = {coarse.shift.x(), coarse.shift.y(), coarse.shift.z()};
        log.extra["fusion"][key]["discrepancy"] = {coarse.discrepancy.x(), coarse.discrepancy.y(),
                                                   coarse.discrepancy.z()};
        log.extra["fusion"][key]["significance"] = coarse.significance;
        if (!coarse.registered) {
            ++log.drops["registration_failed"];
            continue;
        }
        const PairingResult paired = refine_and_pair(a, b, coarse.shift, pairing);
        const auto thinned = thin_pairs(paired.pairs, thin_cell);
        log.extra["fusion"][key]["refined_shift"] = {paired.refined_shift.x(), paired.refined_shift.y(),
                                                     paired.refined_shift.z()};
        log.extra["fusion"][key]["pairs"] = paired.pairs.size();
        log.extra["fusion"][key]["thinned"] = thinned.size();
        auto cands = radar_code_pairs(thinned, a, b, refs, predict);
        out.insert(out.end(), cands.begin(), cands.end());
    }
    return out;
}

std::vector<PsCandidate> detect_optical(const Manifest& m, StageLog& log, const PixelPredictor& predict) {
    const auto providers = m.providers();
    io::RasterTile raster = io::read_raster(*m.optical);
    if (raster.type() != io::RasterType::Float32 || raster.georef.kind != io::GeorefKind::MapGrid)
        throw DomainError("optical raster must be float32 on a map grid");
    OpticalImage image{std::get<Grid<float>>(std::move(raster.data)), raster.georef};
    if (!image.fine_enough()) log.extra["warning"] = "optical spacing coarser than 0.1 m";

    PreprocessOptions pre;
    pre.negative = m.param("detect", "negative", 0.0) != 0.0;
    pre.median_radius = static_cast<int>(m.param("detect", "median_radius", 0.0));
    image = preprocess(image, pre);
    const double sharpen = m.param("detect", "sharpen_a", 0.0);
    if (sharpen != 0.0) image = high_boost(image, sharpen);
    const auto& r = m.template_rect;
    const Template tmpl = crop_template(image, static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1]),
                                        static_cast<std::size_t>(r[2]), static_cast<std::size_t>(r[3]), r[4], r[5]);
    ClusterOptions cluster;
    cluster.threshold = m.param("detect", "ncc_threshold", cluster.threshold);
    cluster.radius_m = m.param("detect", "cluster_radius_m", cluster.radius_m);
    const auto objects = threshold_and_cluster(ncc_match(image.pixels, tmpl), image, tmpl, cluster);
    log.extra["optical_objects"] = objects.size();

    IcpOptions icp;
    icp.gate_px = m.param("detect", "gate_px", icp.gate_px);
    const double percentile = m.param("detect", "bright_percentile", 99.5);

    // Snapped master pixel per object and stack.
    std::vector<std::map<std::string, PixelCoord>> snapped(objects.size());
    for (const auto& st : m.stacks) {
        const auto& master = m.acquisition(st.master);
        const AcquisitionRef ref{master.acquisition_id, master.stack_id,
                                 std::make_shared<AcquisitionGeometry>(master.geometry), master.epoch_days};
        PixelCoord origin;
        const auto amps = read_amplitudes(st, origin);
        Grid<float> mean(amps.front().rows(), amps.front().cols(), 0.0f);
        for (const auto& a : amps)
            for (std::size_t i = 0; i < a.size(); ++i) mean.values()[i] += a.values()[i] * a.values()[i];
        for (float& v : mean.values()) v /= static_cast<float>(amps.size());
        const auto bright = bright_points(mean, percentile, origin);

        std::vector<Eigen::Vector2d> detected;
        std::vector<std::size_t> index;
        for (std::size_t k = 0; k < objects.size(); ++k) {
            MapGrid pos = objects[k].position;
            pos.height = m.ground_height_m;
            try {
                const PixelCoord p = predict(ref, map_to_ecef(pos));
                detected.emplace_back(p.line, p.sample);
                index.push_back(k);
            } catch (const Error&) {
            }
        }
        if (detected.empty() || bright.empty()) continue;
        const IcpResult res = icp_align(detected, bright, icp);
        log.extra["icp"][st.id] = {{"iterations", res.iterations},
                                   {"mse_px2", res.mse},
                                   {"angle_rad", res.angle_rad},
                                   {"diverged", res.diverged},
                                   {"bright_points", bright.size()}};
        for (std::size_t i = 0; i < detected.size(); ++i)
            if (res.matches[i]) snapped[index[i]][st.id] = {res.aligned[i].x(), res.aligned[i].y()};
    }

    std::vector<PsCandidate> out;
    for (std::size_t k = 0; k < objects.size(); ++k) {
        if (snapped[k].size() < 2) {
            ++log.drops["seen_in_fewer_than_two_stacks"];
            continue;
        }
        ObservationSet set;
        for (const auto& [stack, px] : snapped[k]) {
            const auto& master = m.acquisition(stack_entry(m, stack).master);
            TimingObservation o;
            o.id = stack;
            o.geometry_id = stack;
            o.geometry = std::make_shared<AcquisitionGeometry>(master.geometry);
            o.timing = corrected_pixel_timing(master, providers, px, m.ground_height_m);
            o.provenance = "pixel";
            set.observations.push_back(std::move(o));
        }
        MapGrid pos = objects[k].position;
        pos.height = m.ground_height_m;
        PsCandidate c;
        c.id = "O-" + std::to_string(k + 1);
        c.method = "optical";
        c.approx_position = map_to_ecef(pos);
        SolverOptions so;
        so.min_observations = 1;
        so.estimate_variances = false;
        try {
            c.approx_position = solve(set, c.approx_position, so).position;
        } catch (const Error&) {
            ++log.drops["intersection_failed"];
            continue;
        }
        for (const auto& [stack, px] : snapped[k]) c.stacks.push_back(stack);
        radar_code_candidate(c, m.refs(), predict);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

StageLog run_detect(const Manifest& m, const RunOptions& opts) {
    fs::create_directories(opts.out_dir);
    StageLog log;
    log.stage = "detect";
    log.extra["method"] = m.method;
    const PixelPredictor predict = raw_pixel_predictor(m);
    std::vector<PsCandidate> cands;
    if (m.method == "road")
        cands = detect_road(m, opts, log, predict);
    else if (m.method == "optical")
        cands = detect_optical(m, log, predict);
    else
        cands = detect_fusion(m, log, predict);

    std::map<std::string, std::string> stack_of;
    for (const auto& a : m.acquisitions) stack_of[a.acquisition_id] = a.stack_id;
    io::PointTable t({"candidate_id", "method", "stack_id", "acquisition_id", "line", "sample", "x", "y", "z",
                      "partial"});
    t.set_meta("kind", "candidates");
    t.set_meta("method", m.method);
    std::size_t partial = 0;
    for (const auto& c : cands) {
        if (c.pixels.empty()) {
            ++log.drops["not_radar_codable"];
            continue;
        }
        partial += c.partial;
        for (const auto& p : c.pixels)
            t.add_row({c.id, c.method, stack_of.at(p.acquisition_id), p.acquisition_id, num(p.pixel.line),
                       num(p.pixel.sample), num(c.approx_position.x()), num(c.approx_position.y()),
                       num(c.approx_position.z()), c.partial ? "1" : "0"});
    }
    io::write_table(table_path(opts, "candidates.csv"), t);
    log.candidates_out = distinct(t, "candidate_id");
    log.rows_out = t.size();
    log.extra["partial"] = partial;
    write_log(opts, log);
    return log;
}

// ---------------------------------------------------------------------------
// pta

namespace {

struct TileRef {
    std::string path;
    PixelCoord origin;
    long rows = 0;
    long cols = 0;
};

}  // namespace

StageLog run_pta(const Manifest& m, const RunOptions& opts) {
    const io::PointTable in = read_stage_table(opts, "candidates.csv", "pta");
    in.require_columns({"candidate_id", "stack_id", "acquisition_id", "line", "sample", "x", "y", "z"});
    StageLog log;
    log.stage = "pta";
    log.rows_in = in.size();
    log.candidates_in = distinct(in, "candidate_id");

    const io::PointTable index = io::read_table(m.slc_index);
    index.require_columns({"acquisition_id", "path", "line0", "sample0", "rows", "cols"});
    std::map<std::string, std::vector<TileRef>> tiles;
    for (std::size_t r = 0; r < index.size(); ++r)
        tiles[index.text(r, "acquisition_id")].push_back(
            {(fs::path(m.directory) / index.text(r, "path")).string(),
             {index.number(r, "line0"), index.number(r, "sample0")},
             static_cast<long>(index.integer(r, "rows")),
             static_cast<long>(index.integer(r, "cols"))});

    PtaOptions pta;
    pta.factor = static_cast<int>(m.param("pta", "factor", pta.factor));

    struct Outcome {
        std::optional<std::vector<std::string>> row;
        std::string drop;
    };
    std::vector<Outcome> results(in.size());
    detail::parallel_for(in.size(), opts.threads, [&](std::size_t r) {
        Outcome& o = results[r];
        const std::string& acq_id = in.text(r, "acquisition_id");
        const auto& acq = m.acquisition(acq_id);
        const double line = in.number(r, "line"), sample = in.number(r, "sample");
        const long cl = std::lround(line), cs = std::lround(sample);
        // Tiles may overlap; take the one with the widest margin around the
        // search window.
        const TileRef* tile = nullptr;
        long best_margin = -1;
        const auto it = tiles.find(acq_id);
        if (it != tiles.end())
            for (const auto& t : it->second) {
                const long l0 = std::lround(t.origin.line), s0 = std::lround(t.origin.sample);
                const long margin = std::min({cl - kPeakSearchPx - l0, l0 + t.rows - 1 - cl - kPeakSearchPx,
                                              cs - kPeakSearchPx - s0, s0 + t.cols - 1 - cs - kPeakSearchPx});
                if (margin > best_margin) {
                    best_margin = margin;
                    tile = &t;
                }
            }
        if (!tile) {
            o.drop = "no_slc_coverage";
            return;
        }
        io::RasterTile raster = io::read_raster(tile->path);
        if (raster.type() != io::RasterType::Complex64) {
            o.drop = "slc_not_complex";
            return;
        }
        const auto& g = std::get<Grid<std::complex<float>>>(raster.data);
        const long l0 = std::lround(tile->origin.line), s0 = std::lround(tile->origin.sample);
        // Brightest sample near the predicted pixel; the chip is centred on it.
        long bl = cl, bs = cs;
        double best = -1.0;
        for (long dl = -kPeakSearchPx; dl <= kPeakSearchPx; ++dl)
            for (long ds = -kPeakSearchPx; ds <= kPeakSearchPx; ++ds) {
                const double v = std::norm(std::complex<double>(
                    g(static_cast<std::size_t>(cl + dl - l0), static_cast<std::size_t>(cs + ds - s0))));
                if (v > best) {
                    best = v;
                    bl = cl + dl;
                    bs = cs + ds;
                }
            }
        const long cl0 = bl - kChipSide / 2, cs0 = bs - kChipSide / 2;
        if (cl0 < l0 || cs0 < s0 || cl0 + kChipSide > l0 + tile->rows || cs0 + kChipSide > s0 + tile->cols) {
            o.drop = "chip_outside_tile";
            return;
        }
        SlcChip chip;
        chip.samples = Grid<Complex>(kChipSide, kChipSide);
        for (int i = 0; i < kChipSide; ++i)
            for (int j = 0; j < kChipSide; ++j)
                chip.samples(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                    Complex(g(static_cast<std::size_t>(cl0 - l0 + i), static_cast<std::size_t>(cs0 - s0 + j)));
        chip.origin = {static_cast<double>(cl0), static_cast<double>(cs0)};
        chip.calibration = acq.calibration;
        const PtaResult res = analyze_chip(chip, pta);
        if (res.status != PeakStatus::Ok) {
            o.drop = std::string(to_string(res.status));
            return;
        }
        const RadarTiming t = pixel_to_timing(acq.geometry, res.peak);
        const double scr_db = 10.0 * std::log10(res.scr.scr);
        o.row = std::vector<std::string>{in.text(r, "candidate_id"), in.text(r, "stack_id"), acq_id,
                                         in.text(r, "x"), in.text(r, "y"), in.text(r, "z"),
                                         num(res.peak.line), num(res.peak.sample), num(t.t_az), num(t.tau_rg),
                                         std::isfinite(scr_db) ? num(scr_db) : "inf", num(res.scr.sigma_phi)};
    });

    io::PointTable out({"candidate_id", "stack_id", "acquisition_id", "x", "y", "z", "line", "sample", "t_az",
                        "tau_rg", "scr_db", "sigma_phi"});
    out.set_meta("kind", "timings");
    out.set_meta("oversampling", std::to_string(pta.factor));
    for (auto& o : results) {
        if (o.row)
            out.add_row(std::move(*o.row));
        else
            ++log.drops[o.drop];
    }
    io::write_table(table_path(opts, "timings.csv"), out);
    log.rows_out = out.size();
    log.candidates_out = distinct(out, "candidate_id");
    write_log(opts, log);
    return log;
}

// ---------------------------------------------------------------------------
// screen

namespace {

/// Row indices grouped by candidate, in first-appearance order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const io::PointTable& t) {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    std::map<std::string, std::size_t> where;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const auto& id = t.text(r, "candidate_id");
        const auto [it, added] = where.try_emplace(id, out.size());
        if (added) out.push_back({id, {}});
        out[it->second].second.push_back(r);
    }
    return out;
}

}  // namespace

StageLog run_screen(const Manifest& m, const RunOptions& opts) {
    const io::PointTable in = read_stage_table(opts, "timings.csv", "screen");
    in.require_columns({"candidate_id", "acquisition_id", "sigma_phi"});
    StageLog log;
    log.stage = "screen";
    log.rows_in = in.size();
    log.candidates_in = distinct(in, "candidate_id");
    log.extra["quartiles"] = std::string(kQuartileConvention);
    ScreenOptions so;
    so.visibility_max_rad = m.param("screen", "visibility_max_rad", so.visibility_max_rad);

    std::vector<std::string> columns = in.columns();
    columns.push_back("flag");
    io::PointTable out(columns);
    out.set_meta("kind", "screened");
    std::size_t short_series = 0;
    for (const auto& [id, rows] : group_rows(in)) {
        NoiseSeries series;
        for (std::size_t r : rows) {
            series.acquisition_ids.push_back(in.text(r, "acquisition_id"));
            series.sigma_phi.push_back(in.number(r, "sigma_phi"));
        }
        series.flags.assign(rows.size(), NoiseFlag::Kept);
        const NoiseSeries screened = screen_series(series, so);
        short_series += screened.short_series;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            auto cells = in.row(rows[k]);
            cells.emplace_back(to_string(screened.flags[k]));
            if (screened.flags[k] != NoiseFlag::Kept) ++log.drops[std::string(to_string(screened.flags[k]))];
            out.add_row(std::move(cells));
        }
    }
    io::write_table(table_path(opts, "screened.csv"), out);
    log.rows_out = out.size() - log.drops["boxplot_outlier"] - log.drops["invisible"];
    log.candidates_out = log.candidates_in;
    log.extra["short_series"] = short_series;
    std::erase_if(log.drops, [](const auto& kv) { return kv.second == 0; });
    write_log(opts, log);
    return log;
}

// ---------------------------------------------------------------------------
// correct

StageLog run_correct(const Manifest& m, const RunOptions& opts) {
    const io::PointTable in = read_stage_table(opts, "screened.csv", "correct");
    in.require_columns({"candidate_id", "stack_id", "acquisition_id", "x", "y", "z", "t_az", "tau_rg", "flag"});
    StageLog log;
    log.stage = "correct";
    log.rows_in = in.size();
    log.candidates_in = distinct(in, "candidate_id");
    const auto providers = m.providers();
    for (const auto& p : providers) log.extra["providers"][term_key(p->term())] = p->describe();

    std::vector<std::optional<std::vector<std::string>>> rows(in.size());
    std::vector<std::string> drops(in.size());
    detail::parallel_for(in.size(), opts.threads, [&](std::size_t r) {
        if (parse_noise_flag(in.text(r, "flag")) != NoiseFlag::Kept) {
            drops[r] = "screened_out";
            return;
        }
        const auto& acq = m.acquisition(in.text(r, "acquisition_id"));
        const CorrectionContext ctx{acq.geometry, acq.acquisition_id, row_position(in, r), acq.epoch_days};
        const CorrectionSet set = assemble_corrections(providers, ctx);
        const RadarTiming t = correct_timing({in.number(r, "t_az"), in.number(r, "tau_rg")}, set);
        rows[r] = std::vector<std::string>{in.text(r, "candidate_id"), in.text(r, "stack_id"),
                                           in.text(r, "acquisition_id"), in.text(r, "x"), in.text(r, "y"),
                                           in.text(r, "z"), num(t.t_az), num(t.tau_rg), provenance_of(set)};
    });
    io::PointTable out({"candidate_id", "stack_id", "acquisition_id", "x", "y", "z", "t_az", "tau_rg", "provenance"});
    out.set_meta("kind", "corrected");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r])
            out.add_row(std::move(*rows[r]));
        else
            ++log.drops[drops[r]];
    }
    io::write_table(table_path(opts, "corrected.csv"), out);
    log.rows_out = out.size();
    log.candidates_out = distinct(out, "candidate_id");
    write_log(opts, log);
    return log;
}

// ---------------------------------------------------------------------------
// solve

StageLog run_solve(const Manifest& m, const RunOptions& opts) {
    const io::PointTable in = read_stage_table(opts, "corrected.csv", "solve");
    in.require_columns({"candidate_id", "stack_id", "acquisition_id", "x", "y", "z", "t_az", "tau_rg", "provenance"});
    StageLog log;
    log.stage = "solve";
    log.rows_in = in.size();
    log.candidates_in = distinct(in, "candidate_id");

    SolverOptions so;
    so.min_observations = static_cast<std::size_t>(m.param("solve", "min_observations", 3.0));
    CascadeOptions co;
    co.gross_range_m = m.param("solve", "gross_range_m", co.gross_range_m);
    co.gross_azimuth_m = m.param("solve", "gross_azimuth_m", co.gross_azimuth_m);
    co.max_s_az_m = m.param("solve", "max_s_az_m", co.max_s_az_m);

    std::map<std::string, HeadingClass> heading;
    for (const auto& s : m.stacks) heading[s.id] = s.heading;
    std::map<std::string, std::shared_ptr<const AcquisitionGeometry>> geoms;
    for (const auto& a : m.acquisitions) geoms[a.acquisition_id] = std::make_shared<AcquisitionGeometry>(a.geometry);

    const auto groups = group_rows(in);
    std::vector<CascadeResult> results(groups.size());
    std::vector<std::string> failures(groups.size());
    detail::parallel_for(groups.size(), opts.threads, [&](std::size_t g) {
        const auto& rows = groups[g].second;
        ObservationSet set;
        for (std::size_t r : rows) {
            TimingObservation o;
            o.id = in.text(r, "acquisition_id");
            o.geometry_id = in.text(r, "stack_id");
            o.geometry = geoms.at(o.id);
            o.timing = {in.number(r, "t_az"), in.number(r, "tau_rg")};
            o.provenance = in.text(r, "provenance");
            set.observations.push_back(std::move(o));
        }
        try {
            results[g] = outlier_cascade(set, so, co, row_position(in, rows.front()));
        } catch (const Error& e) {
            results[g].outcome = CascadeOutcome::Unsolvable;
            results[g].reason = e.what();
        }
    });

    io::PointTable sol({"candidate_id", "outcome", "geometry_class", "n_obs", "n_geometries", "x", "y", "z",
                        "latitude_deg", "longitude_deg", "height", "easting", "northing", "s_e", "s_n", "s_h",
                        "iterations", "vce_converged", "reason"});
    sol.set_meta("kind", "solutions");
    sol.set_meta("confidence", "95%");
    io::PointTable res({"candidate_id", "acquisition_id", "geometry_id", "azimuth_m", "range_m"});
    res.set_meta("kind", "residuals");
    io::PointTable var({"candidate_id", "geometry_id", "heading", "s_az", "s_rg", "n_az", "n_rg"});
    var.set_meta("kind", "variances");
    io::PointTable outliers({"candidate_id", "stage", "acquisition_id", "geometry_id", "reason"});
    outliers.set_meta("kind", "outliers");

    const auto safe = [](std::string s) {
        std::replace(s.begin(), s.end(), ',', ';');
        std::replace(s.begin(), s.end(), '\n', ' ');
        return s;
    };
    std::size_t accepted = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& id = groups[g].first;
        const CascadeResult& cr = results[g];
        for (const auto& e : cr.log)
            outliers.add_row({id, std::to_string(e.stage), e.observation_id, e.geometry_id, safe(e.reason)});
        if (cr.outcome != CascadeOutcome::Accepted || !cr.solution) {
            ++log.drops[std::string(to_string(cr.outcome))];
            sol.add_row({id, std::string(to_string(cr.outcome)), "", std::to_string(groups[g].second.size()), "", "",
                         "", "", "", "", "", "", "", "", "", "", "", "", safe(cr.reason)});
            continue;
        }
        ++accepted;
        const StereoSolution& s = *cr.solution;
        std::vector<HeadingClass> hs;
        for (const auto& v : s.variances) hs.push_back(heading.count(v.geometry_id) ? heading.at(v.geometry_id) : v.heading);
        const QualityReport q = report_quality(s);
        const Geodetic geo = ecef_to_geodetic(s.position);
        const MapGrid map = ecef_to_map(s.position, m.zone, m.north);
        sol.add_row({id, "accepted", std::string(to_string(classify_geometries(hs))),
                     std::to_string(cr.cleaned.observations.size()), std::to_string(s.variances.size()),
                     num(s.position.x()), num(s.position.y()), num(s.position.z()), num(geo.latitude / kDeg),
                     num(geo.longitude / kDeg), num(geo.height), num(map.easting), num(map.northing), num(q.s_e),
                     num(q.s_n), num(q.s_h), std::to_string(s.iterations), s.vce_converged ? "1" : "0", ""});
        for (const auto& r : s.residuals)
            res.add_row({id, r.observation_id, r.geometry_id, std::isnan(r.azimuth_m) ? "" : num(r.azimuth_m),
                         std::isnan(r.range_m) ? "" : num(r.range_m)});
        for (const auto& v : s.variances)
            var.add_row({id, v.geometry_id, std::string(to_string(v.heading)), num(v.s_az), num(v.s_rg),
                         std::to_string(v.n_az), std::to_string(v.n_rg)});
    }
    io::write_table(table_path(opts, "solutions.csv"), sol);
    io::write_table(table_path(opts, "residuals.csv"), res);
    io::write_table(table_path(opts, "variances.csv"), var);
    io::write_table(table_path(opts, "outliers.csv"), outliers);
    log.rows_out = res.size();
    log.candidates_out = accepted;
    write_log(opts, log);
    return log;
}

// ---------------------------------------------------------------------------
// report

namespace {

struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = v.size();
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

StageLog write_report(const std::string& out_dir, const std::optional<std::string>& truth_targets,
                      const std::string& truth_class) {
    const RunOptions opts{out_dir, 1};
    const io::PointTable sol = read_stage_table(opts, "solutions.csv", "report");
    sol.require_columns({"candidate_id", "outcome", "geometry_class", "x", "y", "z", "s_e", "s_n", "s_h"});
    StageLog log;
    log.stage = "report";
    log.candidates_in = sol.size();

    // Per-class precision table.
    std::map<std::string, std::array<std::vector<double>, 3>> by_class;
    std::vector<sim::SolvedPoint> solved;
    for (std::size_t r = 0; r < sol.size(); ++r) {
        if (sol.text(r, "outcome") != "accepted") continue;
        auto& c = by_class[sol.text(r, "geometry_class")];
        c[0].push_back(sol.number(r, "s_e"));
        c[1].push_back(sol.number(r, "s_n"));
        c[2].push_back(sol.number(r, "s_h"));
        solved.push_back({sol.text(r, "candidate_id"), row_position(sol, r), std::nullopt});
    }
    log.candidates_out = solved.size();
    io::PointTable classes({"geometry_class", "count", "mean_s_e", "sd_s_e", "mean_s_n", "sd_s_n", "mean_s_h",
                            "sd_s_h"});
    classes.set_meta("kind", "class_summary");
    classes.set_meta("units", "m, 95%");
    std::string text = "Ground control points: " + std::to_string(solved.size()) + " accepted of " +
                       std::to_string(sol.size()) + " candidates\n\n";
    text += "class   n     S_E [cm]        S_N [cm]        S_H [cm]\n";
    for (const auto& [cls, v] : by_class) {
        const Moments e = moments(v[0]), n = moments(v[1]), h = moments(v[2]);
        classes.add_row({cls, std::to_string(e.n), num(e.mean), num(e.sd), num(n.mean), num(n.sd), num(h.mean),
                         num(h.sd)});
        char line[160];
        std::snprintf(line, sizeof line, "%-6s %3zu  %6.2f +- %5.2f  %6.2f +- %5.2f  %6.2f +- %5.2f\n", cls.c_str(),
                      e.n, 100 * e.mean, 100 * e.sd, 100 * n.mean, 100 * n.sd, 100 * h.mean, 100 * h.sd);
        text += line;
    }
    io::write_table(table_path(opts, "report_classes.csv"), classes);

    // Residuals per geometry.
    io::PointTable resid({"geometry_id", "component", "count", "mean_m", "sd_m", "min_m", "max_m"});
    resid.set_meta("kind", "residual_summary");
    const std::string res_path = table_path(opts, "residuals.csv");
    if (fs::exists(res_path)) {
        const io::PointTable res = io::read_table(res_path);
        std::map<std::string, std::array<std::vector<double>, 2>> by_geom;
        for (std::size_t r = 0; r < res.size(); ++r) {
            auto& g = by_geom[res.text(r, "geometry_id")];
            if (auto a = res.optional_number(r, "azimuth_m")) g[0].push_back(*a);
            if (auto b = res.optional_number(r, "range_m")) g[1].push_back(*b);
        }
        text += "\nresiduals  geometry  component  n  mean [cm]  sd [cm]\n";
        for (const auto& [gid, comps] : by_geom)
            for (int k = 0; k < 2; ++k) {
                const auto& v = comps[static_cast<std::size_t>(k)];
                if (v.empty()) continue;
                const Moments mo = moments(v);
                const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
                const std::string comp = k == 0 ? "azimuth" : "range";
                resid.add_row({gid, comp, std::to_string(mo.n), num(mo.mean), num(mo.sd), num(*lo), num(*hi)});
                text += "           " + gid + "  " + comp + "  " + std::to_string(mo.n) + "  " +
                        fixed(100 * mo.mean, 2) + "  " + fixed(100 * mo.sd, 2) + "\n";
            }
    }
    io::write_table(table_path(opts, "report_residuals.csv"), resid);

    // Minimum cross-stack distances of per-stack road candidates.
    io::PointTable hist({"bin_lo_m", "bin_hi_m", "count"});
    hist.set_meta("kind", "distance_histogram");
    const std::string sc_path = table_path(opts, "stack_candidates.csv");
    if (fs::exists(sc_path)) {
        const io::PointTable sc = io::read_table(sc_path);
        constexpr double kBin = 0.25;
        constexpr std::size_t kBins = 40;
        std::vector<std::size_t> counts(kBins + 1, 0);
        for (std::size_t i = 0; i < sc.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < sc.size(); ++j)
                if (sc.text(i, "stack_id") != sc.text(j, "stack_id"))
                    best = std::min(best, (row_position(sc, i) - row_position(sc, j)).norm());
            if (!std::isfinite(best)) continue;
            ++counts[std::min(kBins, static_cast<std::size_t>(best / kBin))];
        }
        for (std::size_t b = 0; b <= kBins; ++b)
            hist.add_row({num(static_cast<double>(b) * kBin), b < kBins ? num(static_cast<double>(b + 1) * kBin) : "inf",
                          std::to_string(counts[b])});
    }
    io::write_table(table_path(opts, "report_distances.csv"), hist);

    if (truth_targets) {
        const io::PointTable tt = io::read_table(*truth_targets);
        tt.require_columns({"id", "class", "x", "y", "z"});
        std::vector<sim::TruthPoint> truth;
        for (std::size_t r = 0; r < tt.size(); ++r)
            if (truth_class.empty() || tt.text(r, "class") == truth_class)
                truth.push_back({tt.text(r, "id"), row_position(tt, r)});
        log.extra["truth_class"] = truth_class.empty() ? "all" : truth_class;
        const sim::Score s = sim::score_against_truth(solved, truth);
        nlohmann::json j;
        j["solutions"] = s.solutions;
        j["truths"] = s.truths;
        j["matched"] = s.matched;
        j["precision"] = s.precision;
        j["recall"] = s.recall;
        j["bias_enu_m"] = {s.bias.x(), s.bias.y(), s.bias.z()};
        j["rmse_enu_m"] = {s.rmse.x(), s.rmse.y(), s.rmse.z()};
        j["max_error_m"] = s.max_error_m;
        io::write_file(table_path(opts, "score.json"), j.dump(2) + "\n");
        log.extra["score"] = j;
        text += "\ntruth: " + std::to_string(s.matched) + " of " + std::to_string(s.truths) +
                " " + (truth_class.empty() ? std::string("") : truth_class + " ") + "targets matched, precision " + fixed(s.precision, 3) + ", max error " +
                fixed(s.max_error_m * 100, 3) + " cm\n";
    }
    io::write_file(table_path(opts, "report.txt"), text);
    write_log(opts, log);
    return log;
}

std::string truth_class_for(const std::string& method) { return method == "fusion" ? "facade" : "pole"; }

StageLog run_report(const Manifest& m, const RunOptions& opts) {
    return write_report(opts.out_dir, m.truth_targets, truth_class_for(m.method));
}

std::vector<StageLog> run_all(const Manifest& m, const RunOptions& opts) {
    std::vector<StageLog> logs;
    logs.push_back(run_detect(m, opts));
    logs.push_back(run_pta(m, opts));
    logs.push_back(run_screen(m, opts));
    logs.push_back(run_correct(m, opts));
    logs.push_back(run_solve(m, opts));
    logs.push_back(run_report(m, opts));
    return logs;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return kParseFailure;
    if (dynamic_cast<const Error*>(&e)) return kNumericalFailure;
    return kNumericalFailure;
}

}  // namespace sargcp::pipeline

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/candidate.hpp"
#include "sargcp/io_formats.hpp"
#include "sargcp/timing_model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sargcp::pipeline {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kParseFailure = 2, kNumericalFailure = 3, kEmptyResult = 4 };

struct StackEntry {
    std::string id;
    HeadingClass heading = HeadingClass::Ascending;
    std::string master;
    std::vector<std::string> amplitudes;  // absolute paths, one per epoch
    std::optional<std::string> psi;
};

/// Scene description plus per-stage parameter blocks.
struct Manifest {
    std::string path;
    std::string directory;
    std::string method;
    int zone = 0;
    bool north = true;
    double ground_height_m = 0.0;
    std::vector<io::AcquisitionMetadata> acquisitions;
    std::vector<StackEntry> stacks;
    std::string slc_index;
    std::optional<std::string> roads;
    std::optional<std::string> optical;
    std::array<double, 6> template_rect{};
    std::optional<std::string> corrections;
    std::vector<std::pair<std::string, std::string>> fusion_pairs;
    std::optional<std::string> truth_targets;
    /// "parameters" object, keyed by stage name.
    nlohmann::json parameters = nlohmann::json::object();

    /// Throws DomainError when the blocks of the detection method are
    /// incomplete.
    void validate() const;
    std::vector<AcquisitionRef> refs() const;
    const io::AcquisitionMetadata& acquisition(const std::string& id) const;
    std::vector<ProviderPtr> providers() const;
    /// Parameter of a stage block, or the fallback.
    double param(const std::string& stage, const std::string& key, double fallback) const;
};

/// Throws ParseError for malformed JSON or missing keys and DomainError when
/// a referenced file does not exist or a method block is incomplete.
Manifest load_manifest(const std::string& path);

/// Machine-readable bookkeeping of one stage run.
struct StageLog {
    std::string stage;
    std::size_t candidates_in = 0;
    std::size_t candidates_out = 0;
    std::size_t rows_in = 0;
    std::size_t rows_out = 0;
    std::map<std::string, std::size_t> drops;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
};

struct RunOptions {
    std::string out_dir;
    unsigned threads = 1;
};

/// Radar-coding through the forward timing error model of the manifest,
/// i.e. where a point shows up in the raw images.
PixelPredictor raw_pixel_predictor(const Manifest& m);

// Stages. Each reads the previous stage's table from `out_dir`, writes its
// own table plus logs/<stage>.json there, and returns the log.
StageLog run_detect(const Manifest& m, const RunOptions& opts);   // -> candidates.csv
StageLog run_pta(const Manifest& m, const RunOptions& opts);      // -> timings.csv
StageLog run_screen(const Manifest& m, const RunOptions& opts);   // -> screened.csv
StageLog run_correct(const Manifest& m, const RunOptions& opts);  // -> corrected.csv
StageLog run_solve(const Manifest& m, const RunOptions& opts);    // -> solutions.csv, residuals.csv
StageLog run_report(const Manifest& m, const RunOptions& opts);   // -> report.txt and summaries
std::vector<StageLog> run_all(const Manifest& m, const RunOptions& opts);

/// Report from tables alone. `truth_targets` enables scoring against the
/// targets of `truth_class` (all when empty).
StageLog write_report(const std::string& out_dir, const std::optional<std::string>& truth_targets,
                      const std::string& truth_class = "");
/// Target class a detection method is meant to find.
std::string truth_class_for(const std::string& method);

/// Maps an exception to an exit code.
int exit_code_for(const std::exception& e);

}  // namespace sargcp::pipeline

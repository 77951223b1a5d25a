// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/range_doppler.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sargcp {

/// One acquisition known to the pipeline.
struct AcquisitionRef {
    std::string acquisition_id;
    std::string stack_id;
    std::shared_ptr<const AcquisitionGeometry> geometry;
    double epoch_days = 0.0;
};

/// Expected image position of a ground point in one acquisition. Throws
/// when the point cannot be imaged.
using PixelPredictor = std::function<PixelCoord(const AcquisitionRef&, const Ecef&)>;

/// Zero-Doppler radar-coding without timing errors.
PixelCoord nominal_pixel(const AcquisitionRef& acq, const Ecef& position);

struct CandidatePixel {
    std::string acquisition_id;
    PixelCoord pixel;
};

/// Hypothesised identical scatterer with its expected pixel position in
/// every acquisition it was radar-coded into.
struct PsCandidate {
    std::string id;
    std::string method;
    Ecef approx_position = Ecef::Zero();
    std::vector<std::string> stacks;
    std::vector<CandidatePixel> pixels;
    /// Some acquisitions could not be radar-coded.
    bool partial = false;
};

/// Radar-codes `position` into each acquisition whose stack is listed in
/// `stacks` (all acquisitions when `stacks` is empty). Acquisitions that
/// fail are skipped and mark the candidate partial. An empty predictor
/// means `nominal_pixel`.
void radar_code_candidate(PsCandidate& candidate, const std::vector<AcquisitionRef>& acquisitions,
                          const PixelPredictor& predict = {});

}  // namespace sargcp

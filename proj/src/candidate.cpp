// SPDX-License-Identifier: Apache-2.0
#include "sargcp/candidate.hpp"

#include "sargcp/error.hpp"

#include <algorithm>

namespace sargcp {

PixelCoord nominal_pixel(const AcquisitionRef& acq, const Ecef& position) {
    return timing_to_pixel(*acq.geometry, radar_code(*acq.geometry, position));
}

void radar_code_candidate(PsCandidate& candidate, const std::vector<AcquisitionRef>& acquisitions,
                          const PixelPredictor& predict) {
    for (const auto& acq : acquisitions) {
        if (!candidate.stacks.empty() &&
            std::find(candidate.stacks.begin(), candidate.stacks.end(), acq.stack_id) == candidate.stacks.end())
            continue;
        try {
            candidate.pixels.push_back({acq.acquisition_id, predict ? predict(acq, candidate.approx_position)
                                                                    : nominal_pixel(acq, candidate.approx_position)});
        } catch (const Error&) {
            candidate.partial = true;
        }
    }
}

}  // namespace sargcp

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/grid.hpp"
#include "sargcp/range_doppler.hpp"

#include <complex>

namespace sargcp {

using Complex = std::complex<double>;

/// Square complex window cut from an SLC around a candidate pixel.
struct SlcChip {
    Grid<Complex> samples;
    /// Absolute pixel coordinate of samples(0, 0).
    PixelCoord origin;
    /// Linear power calibration factor.
    double calibration = 1.0;

    /// Throws DomainError unless square, power-of-two side and finite.
    void validate() const;
};

/// Band-limited interpolation of the chip by zero-padding its spectrum.
/// Output side is factor * chip side; samples at multiples of `factor`
/// reproduce the input.
Grid<Complex> oversample_complex(const Grid<Complex>& chip, int factor);

/// Magnitude of the oversampled chip.
Grid<double> oversample_chip(const SlcChip& chip, int factor);

enum class PeakStatus { Ok, BorderPeak, VertexOutsideCell, Flat };

std::string_view to_string(PeakStatus s);

/// Peak of an oversampled magnitude grid, in grid cells.
struct PeakEstimate {
    PeakStatus status = PeakStatus::Ok;
    double row = 0.0;
    double col = 0.0;
    double magnitude = 0.0;
};

/// Integer argmax plus a six-parameter paraboloid least-squares fit on the
/// 3x3 neighbourhood. A border maximum is reported, not thrown.
PeakEstimate refine_peak(const Grid<double>& magnitude);

struct ScrEstimate {
    double peak_power_db = 0.0;
    double clutter_power_db = 0.0;
    double scr = 0.0;
    double sigma_phi = 0.0;
};

/// SCR = 10^((peak - clutter) / 10), sigma_phi = 1 / sqrt(2 SCR).
ScrEstimate scr_from_powers(double peak_power_db, double clutter_power_db);

struct PtaOptions {
    int factor = 32;
    double ring_inner_px = 8.0;
    double ring_outer_px = 14.0;
    /// Half-width of the excluded main-lobe core, original pixels.
    int core_half_width = 2;
};

/// Peak and clutter powers. `peak` is absolute; `peak_magnitude` is the
/// refined uncalibrated amplitude at the peak. Zero clutter yields an
/// infinite SCR and zero phase noise.
ScrEstimate estimate_scr(const SlcChip& chip, const PixelCoord& peak, double peak_magnitude,
                         const PtaOptions& options = {});

struct PtaResult {
    PeakStatus status = PeakStatus::Ok;
    PixelCoord peak;
    ScrEstimate scr;
};

/// Full point target analysis of one chip. Evaluates the oversampled
/// surface only near the brightest sample and falls back to the full grid
/// when that window is inconclusive.
PtaResult analyze_chip(const SlcChip& chip, const PtaOptions& options = {});

}  // namespace sargcp

// SPDX-License-Identifier: Apache-2.0
#include "sargcp/pta.hpp"

#include "detail/fft.hpp"
#include "sargcp/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>

namespace sargcp {

namespace {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

Grid<Complex> spectrum(const Grid<Complex>& chip) {
    Grid<Complex> out = chip;
    detail::fft2d(out.values(), chip.rows(), chip.cols(), detail::FftDirection::Forward);
    return out;
}

// Signed frequency of spectrum bin k, or 0 for the Nyquist bin which is
// handled as a cosine.
struct Bin {
    double freq;
    bool nyquist;
};

Bin bin(std::size_t k, std::size_t n) {
    if (2 * k == n) return {0.0, true};
    const double s = k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    return {s, false};
}

// Basis matrix: rows are evaluation positions, columns spectrum bins.
Eigen::MatrixXcd basis(const std::vector<double>& positions, std::size_t n) {
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(positions.size()), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < positions.size(); ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const Bin b = bin(k, n);
            const double y = positions[j];
            m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                b.nyquist ? Complex(std::cos(std::numbers::pi * y), 0.0)
                          : std::polar(1.0, 2.0 * std::numbers::pi * b.freq * y / static_cast<double>(n));
        }
    }
    return m;
}

// Trigonometric interpolant of the chip evaluated on a rectangular lattice.
Grid<double> interpolate_magnitude(const Grid<Complex>& spec, const std::vector<double>& rows,
                                   const std::vector<double>& cols) {
    const std::size_t n = spec.rows();
    Eigen::MatrixXcd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = spec(r, c);
    const Eigen::MatrixXcd v =
        basis(rows, n) * x * basis(cols, n).transpose() / static_cast<double>(n * n);
    Grid<double> out(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(r, c) = std::abs(v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    return out;
}

const Eigen::Matrix<double, 6, 9>& paraboloid_solver() {
    static const Eigen::Matrix<double, 6, 9> p = [] {
        Eigen::Matrix<double, 9, 6> a;
        int i = 0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++i)
                a.row(i) << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
        return Eigen::Matrix<double, 6, 9>((a.transpose() * a).inverse() * a.transpose());
    }();
    return p;
}

}  // namespace

void SlcChip::validate() const {
    if (samples.rows() != samples.cols() || !is_power_of_two(samples.rows()))
        throw DomainError("SLC chip must be square with a power-of-two side");
    for (const Complex& z : samples.values())
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw DomainError("SLC chip contains non-finite samples");
    if (!(calibration > 0.0)) throw DomainError("SLC chip calibration must be positive");
}

Grid<Complex> oversample_complex(const Grid<Complex>& chip, int factor) {
    if (factor < 1 || !is_power_of_two(static_cast<std::size_t>(factor)))
        throw DomainError("oversampling factor must be a power of two");
    if (chip.rows() != chip.cols() || !is_power_of_two(chip.rows()))
        throw DomainError("chip must be square with a power-of-two side");
    const std::size_t n = chip.rows();
    const std::size_t m = n * static_cast<std::size_t>(factor);
    const Grid<Complex> spec = spectrum(chip);

    // Zero-padded spectrum; the Nyquist bin is split between +-n/2.
    auto targets = [n, m](std::size_t k, std::size_t* idx, double* w) -> int {
        if (2 * k == n) {
            idx[0] = n / 2;
            idx[1] = m - n / 2;
            w[0] = w[1] = 0.5;
            return 2;
        }
        idx[0] = k < n / 2 ? k : k + m - n;
        w[0] = 1.0;
        return 1;
    };
    Grid<Complex> padded(m, m);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t ri[2];
        double rw[2];
        const int nr = targets(r, ri, rw);
        for (std::size_t c = 0; c < n; ++c) {
            std::size_t ci[2];
            double cw[2];
            const int nc = targets(c, ci, cw);
            for (int a = 0; a < nr; ++a)
                for (int b = 0; b < nc; ++b) padded(ri[a], ci[b]) += spec(r, c) * rw[a] * cw[b];
        }
    }
    detail::fft2d(padded.values(), m, m, detail::FftDirection::Backward);
    const double scale = 1.0 / static_cast<double>(n * n);
    for (Complex& z : padded.values()) z *= scale;
    return padded;
}

Grid<double> oversample_chip(const SlcChip& chip, int factor) {
    chip.validate();
    const Grid<Complex> up = oversample_complex(chip.samples, factor);
    Grid<double> out(up.rows(), up.cols());
    for (std::size_t i = 0; i < up.size(); ++i) out.values()[i] = std::abs(up.values()[i]);
    return out;
}

std::string_view to_string(PeakStatus s) {
    switch (s) {
        case PeakStatus::Ok: return "ok";
        case PeakStatus::BorderPeak: return "border_peak";
        case PeakStatus::VertexOutsideCell: return "vertex_outside_cell";
        case PeakStatus::Flat: return "flat";
    }
    return "unknown";
}

PeakEstimate refine_peak(const Grid<double>& magnitude) {
    if (magnitude.empty()) throw DomainError("refine_peak: empty grid");
    std::size_t best = 0;
    double lo = magnitude.values()[0];
    for (std::size_t i = 1; i < magnitude.size(); ++i) {
        if (magnitude.values()[i] > magnitude.values()[best]) best = i;
        lo = std::min(lo, magnitude.values()[i]);
    }
    const std::size_t r0 = best / magnitude.cols();
    const std::size_t c0 = best % magnitude.cols();
    PeakEstimate est{PeakStatus::Ok, static_cast<double>(r0), static_cast<double>(c0),
                     magnitude.values()[best]};
    if (est.magnitude == lo) {
        est.status = PeakStatus::Flat;
        return est;
    }
    if (r0 == 0 || c0 == 0 || r0 + 1 == magnitude.rows() || c0 + 1 == magnitude.cols()) {
        est.status = PeakStatus::BorderPeak;
        return est;
    }
    Eigen::Matrix<double, 9, 1> z;
    int i = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) z(i++) = magnitude(r0 + dy, c0 + dx);
    const Eigen::Matrix<double, 6, 1> q = paraboloid_solver() * z;
    Eigen::Matrix2d h;
    h << 2.0 * q(3), q(4), q(4), 2.0 * q(5);
    if (!(h(0, 0) < 0.0 && h.determinant() > 0.0)) {
        est.status = PeakStatus::VertexOutsideCell;
        return est;
    }
    const Eigen::Vector2d v = h.ldlt().solve(Eigen::Vector2d(-q(1), -q(2)));
    if (!(std::abs(v.x()) <= 1.0 && std::abs(v.y()) <= 1.0)) {
        est.status = PeakStatus::VertexOutsideCell;
        return est;
    }
    est.col += v.x();
    est.row += v.y();
    est.magnitude = q(0) + q(1) * v.x() + q(2) * v.y() + q(3) * v.x() * v.x() +
                    q(4) * v.x() * v.y() + q(5) * v.y() * v.y();
    return est;
}

ScrEstimate scr_from_powers(double peak_power_db, double clutter_power_db) {
    ScrEstimate e{peak_power_db, clutter_power_db, 0.0, 0.0};
    if (clutter_power_db == -std::numeric_limits<double>::infinity()) {
        e.scr = std::numeric_limits<double>::infinity();
        e.sigma_phi = 0.0;
        return e;
    }
    e.scr = std::pow(10.0, (peak_power_db - clutter_power_db) / 10.0);
    e.sigma_phi = 1.0 / std::sqrt(2.0 * e.scr);
    return e;
}

ScrEstimate estimate_scr(const SlcChip& chip, const PixelCoord& peak, double peak_magnitude,
                         const PtaOptions& options) {
    const double py = peak.line - chip.origin.line;
    const double px = peak.sample - chip.origin.sample;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < chip.samples.rows(); ++r) {
        for (std::size_t c = 0; c < chip.samples.cols(); ++c) {
            const double dy = static_cast<double>(r) - py;
            const double dx = static_cast<double>(c) - px;
            if (std::abs(dy) <= options.core_half_width && std::abs(dx) <= options.core_half_width)
                continue;
            const double d = std::hypot(dx, dy);
            if (d < options.ring_inner_px || d > options.ring_outer_px) continue;
            sum += std::norm(chip.samples(r, c));
            ++count;
        }
    }
    if (count == 0) throw DomainError("estimate_scr: clutter ring lies outside the chip");
    const double clutter = chip.calibration * sum / static_cast<double>(count);
    const double peak_power = chip.calibration * peak_magnitude * peak_magnitude;
    const double clutter_db = clutter > 0.0 ? 10.0 * std::log10(clutter)
                                            : -std::numeric_limits<double>::infinity();
    return scr_from_powers(10.0 * std::log10(peak_power), clutter_db);
}

PtaResult analyze_chip(const SlcChip& chip, const PtaOptions& options) {
    chip.validate();
    const int f = options.factor;
    if (f < 1 || !is_power_of_two(static_cast<std::size_t>(f)))
        throw DomainError("oversampling factor must be a power of two");
    const Grid<Complex>& s = chip.samples;

    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (std::norm(s.values()[i]) > std::norm(s.values()[best])) best = i;
    const double r0 = static_cast<double>(best / s.cols());
    const double c0 = static_cast<double>(best % s.cols());

    // Window of +-2 original pixels around the brightest sample.
    const int half = 2 * f;
    std::vector<double> rows, cols;
    for (int j = -half; j <= half; ++j) {
        rows.push_back(r0 + static_cast<double>(j) / f);
        cols.push_back(c0 + static_cast<double>(j) / f);
    }
    const Grid<Complex> spec = spectrum(s);
    PeakEstimate est = refine_peak(interpolate_magnitude(spec, rows, cols));
    double line = 0.0, sample = 0.0;
    if (est.status == PeakStatus::Ok) {
        line = r0 + (est.row - half) / f;
        sample = c0 + (est.col - half) / f;
    } else {
        est = refine_peak(oversample_chip(chip, f));
        line = est.row / f;
        sample = est.col / f;
    }

    PtaResult result;
    result.status = est.status;
    result.peak = {chip.origin.line + line, chip.origin.sample + sample};
    if (est.status == PeakStatus::Ok)
        result.scr = estimate_scr(chip, result.peak, est.magnitude, options);
    return result;
}

}  // namespace sargcp

// SPDX-License-Identifier: Apache-2.0
#include "sargcp/detect_optical.hpp"

#include "detail/fft.hpp"
#include "detail/spatial_hash.hpp"
#include "sargcp/error.hpp"
#include "sargcp/robust_stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace sargcp {

double OpticalImage::spacing_m() const { return std::abs(georef.params[2]); }

void Template::validate() const {
    if (patch.rows() < 3 || patch.cols() < 3) throw DomainError("template must be at least 3x3");
    const auto [lo, hi] = std::minmax_element(patch.values().begin(), patch.values().end());
    if (*lo == *hi) throw DomainError("template is constant");
}

Template crop_template(const OpticalImage& image, std::size_t row, std::size_t col, std::size_t rows,
                       std::size_t cols, double anchor_row, double anchor_col) {
    if (row + rows > image.pixels.rows() || col + cols > image.pixels.cols())
        throw DomainError("template rectangle exceeds the image");
    Template t;
    t.patch = Grid<float>(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t.patch(r, c) = image.pixels(row + r, col + c);
    t.anchor_row = anchor_row;
    t.anchor_col = anchor_col;
    t.validate();
    return t;
}

OpticalImage preprocess(const OpticalImage& image, const PreprocessOptions& options) {
    if (options.median_radius < 0) throw DomainError("median radius must be non-negative");
    OpticalImage out = image;
    auto& px = out.pixels.values();
    if (!px.empty()) {
        const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
        const float low = *lo, span = *hi - *lo;
        for (float& v : px) v = span > 0.0f ? (v - low) / span : 0.0f;
        if (options.negative)
            for (float& v : px) v = 1.0f - v;
    }
    if (options.median_radius > 0) {
        const Grid<float> src = out.pixels;
        const long rows = static_cast<long>(src.rows()), cols = static_cast<long>(src.cols());
        const long r = options.median_radius;
        std::vector<float> window;
        for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j) {
                window.clear();
                for (long di = -r; di <= r; ++di)
                    for (long dj = -r; dj <= r; ++dj) {
                        const long y = std::clamp(i + di, 0L, rows - 1);
                        const long x = std::clamp(j + dj, 0L, cols - 1);
                        window.push_back(src(static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
                    }
                const auto mid = window.begin() + static_cast<long>(window.size() / 2);
                std::nth_element(window.begin(), mid, window.end());
                out.pixels(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = *mid;
            }
    }
    return out;
}

OpticalImage high_boost(const OpticalImage& image, double a, int blur_radius) {
    if (!(a >= 0.0)) throw DomainError("sharpening factor must be non-negative");
    if (blur_radius < 0) throw DomainError("blur radius must be non-negative");
    if (a == 0.0) return image;
    OpticalImage out = image;
    const Grid<float>& src = image.pixels;
    const long rows = static_cast<long>(src.rows()), cols = static_cast<long>(src.cols());
    const long r = blur_radius;
    const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
            // Mask as the mean difference to the neighbours, exactly zero on
            // flat regions.
            const double centre = src(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            double mask = 0.0;
            for (long di = -r; di <= r; ++di)
                for (long dj = -r; dj <= r; ++dj) {
                    const long y = std::clamp(i + di, 0L, rows - 1);
                    const long x = std::clamp(j + dj, 0L, cols - 1);
                    mask += centre - src(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                }
            out.pixels(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                static_cast<float>(centre + a * mask / n);
        }
    return out;
}

namespace {

// Smallest 2^a 3^b 5^c not below n.
std::size_t fft_size(std::size_t n) {
    for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
        std::size_t k = m;
        for (std::size_t f : {2, 3, 5})
            while (k % f == 0) k /= f;
        if (k == 1) return m;
    }
}

}  // namespace

Grid<double> ncc_match(const Grid<float>& image, const Template& tmpl) {
    tmpl.validate();
    const std::size_t h = image.rows(), w = image.cols();
    const std::size_t th = tmpl.patch.rows(), tw = tmpl.patch.cols();
    if (th > h || tw > w) throw DomainError("template larger than the image");
    const std::size_t oh = h - th + 1, ow = w - tw + 1;
    const double n = static_cast<double>(th * tw);

    // Centring on the global mean keeps the window sums well conditioned
    // under brightness offsets.
    const double gmean =
        std::accumulate(image.values().begin(), image.values().end(), 0.0L) / static_cast<long double>(image.size());
    const double tmean = std::accumulate(tmpl.patch.values().begin(), tmpl.patch.values().end(), 0.0L) /
                         static_cast<long double>(tmpl.patch.size());
    double tnorm2 = 0.0;
    for (float v : tmpl.patch.values()) tnorm2 += (v - tmean) * (v - tmean);

    // Numerator: correlation of the centred image with the zero-mean template.
    const std::size_t fh = fft_size(h), fw = fft_size(w);
    std::vector<std::complex<double>> fi(fh * fw), ft(fh * fw);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) fi[r * fw + c] = image(r, c) - gmean;
    for (std::size_t r = 0; r < th; ++r)
        for (std::size_t c = 0; c < tw; ++c) ft[r * fw + c] = tmpl.patch(r, c) - tmean;
    detail::fft2d(fi, fh, fw, detail::FftDirection::Forward);
    detail::fft2d(ft, fh, fw, detail::FftDirection::Forward);
    for (std::size_t k = 0; k < fi.size(); ++k) fi[k] *= std::conj(ft[k]);
    detail::fft2d(fi, fh, fw, detail::FftDirection::Backward);
    const double scale = 1.0 / static_cast<double>(fh * fw);

    // Integral images of the centred image and its square.
    Grid<long double> s1(h + 1, w + 1, 0.0L), s2(h + 1, w + 1, 0.0L);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const long double v = static_cast<long double>(image(r, c)) - gmean;
            s1(r + 1, c + 1) = v + s1(r, c + 1) + s1(r + 1, c) - s1(r, c);
            s2(r + 1, c + 1) = v * v + s2(r, c + 1) + s2(r + 1, c) - s2(r, c);
        }
    const auto box = [&](const Grid<long double>& s, std::size_t r, std::size_t c) {
        return s(r + th, c + tw) - s(r, c + tw) - s(r + th, c) + s(r, c);
    };

    Grid<double> out(oh, ow, 0.0);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            const long double sum = box(s1, r, c);
            const long double sq = box(s2, r, c);
            const long double var = sq - sum * sum / n;
            if (!(var > 1e-12L * sq) || var <= 0.0L) continue;
            const double rho = fi[r * fw + c].real() * scale / std::sqrt(static_cast<double>(var) * tnorm2);
            out(r, c) = std::clamp(rho, -1.0, 1.0);
        }
    return out;
}

std::vector<DetectedObject> threshold_and_cluster(const Grid<double>& score, const OpticalImage& image,
                                                  const Template& tmpl, const ClusterOptions& options) {
    if (!(options.threshold > 0.0 && options.threshold < 1.0)) throw DomainError("threshold must lie in (0, 1)");
    if (!(options.radius_m > 0.0)) throw DomainError("cluster radius must be positive");

    struct Sample {
        Eigen::Vector3d xy;
        double score;
    };
    std::vector<Sample> samples;
    for (std::size_t r = 0; r < score.rows(); ++r)
        for (std::size_t c = 0; c < score.cols(); ++c) {
            if (!(score(r, c) > options.threshold)) continue;
            const double e = image.georef.easting_of(static_cast<double>(c) + tmpl.anchor_col);
            const double nn = image.georef.northing_of(static_cast<double>(r) + tmpl.anchor_row);
            samples.push_back({{e, nn, 0.0}, score(r, c)});
        }
    if (samples.empty()) return {};
    // Canonical order makes the result independent of input order.
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
        return std::tie(a.xy.y(), a.xy.x(), a.score) < std::tie(b.xy.y(), b.xy.x(), b.score);
    });
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(samples.size());
    for (const auto& s : samples) pts.push_back(s.xy);
    const detail::SpatialHash index(pts, options.radius_m);

    std::vector<Eigen::Vector3d> modes;
    std::vector<std::size_t> label(pts.size());
    std::vector<Eigen::Vector3d> mode_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::Vector3d m = pts[i];
        for (int it = 0; it < options.max_iterations; ++it) {
            Eigen::Vector3d sum = Eigen::Vector3d::Zero();
            double weight = 0.0;
            index.visit(m, options.radius_m, [&](std::size_t j, double) {
                sum += samples[j].score * pts[j];
                weight += samples[j].score;
            });
            const Eigen::Vector3d next = sum / weight;
            const double step = (next - m).norm();
            m = next;
            if (step < options.tolerance_m) break;
        }
        mode_of[i] = m;
    }
    // Merge modes closer than the radius, in canonical order.
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t k = 0;
        for (; k < modes.size(); ++k)
            if ((modes[k] - mode_of[i]).norm() < options.radius_m) break;
        if (k == modes.size()) modes.push_back(mode_of[i]);
        label[i] = k;
    }

    std::vector<DetectedObject> out(modes.size());
    std::vector<Eigen::Vector3d> centre(modes.size(), Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto& o = out[label[i]];
        ++o.members;
        o.mean_score += samples[i].score;
        centre[label[i]] += mode_of[i];
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& o = out[k];
        const Eigen::Vector3d p = centre[k] / static_cast<double>(o.members);
        o.position = {p.x(), p.y(), image.georef.zone(), image.georef.north(), 0.0};
        o.mean_score /= static_cast<double>(o.members);
    }
    return out;
}

std::vector<Eigen::Vector2d> bright_points(const Grid<float>& mean_intensity, double percentile,
                                          const PixelCoord& origin) {
    if (!(percentile > 0.0 && percentile < 100.0)) throw DomainError("percentile must lie in (0, 100)");
    if (mean_intensity.empty()) return {};
    std::vector<double> sorted(mean_intensity.values().begin(), mean_intensity.values().end());
    std::sort(sorted.begin(), sorted.end());
    const double limit = quantile_type7(sorted, percentile / 100.0);

    const std::size_t rows = mean_intensity.rows(), cols = mean_intensity.cols();
    Grid<std::uint8_t> seen(rows, cols, 0);
    std::vector<Eigen::Vector2d> out;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            if (seen(r, c) || !(mean_intensity(r, c) > limit)) continue;
            // Flood fill; the brightest pixel represents the region.
            std::pair<std::size_t, std::size_t> best{r, c};
            stack.assign(1, {r, c});
            seen(r, c) = 1;
            while (!stack.empty()) {
                const auto [y, x] = stack.back();
                stack.pop_back();
                if (mean_intensity(y, x) > mean_intensity(best.first, best.second)) best = {y, x};
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
                        if (ny < 0 || nx < 0 || ny >= static_cast<long>(rows) || nx >= static_cast<long>(cols)) continue;
                        const auto uy = static_cast<std::size_t>(ny), ux = static_cast<std::size_t>(nx);
                        if (seen(uy, ux) || !(mean_intensity(uy, ux) > limit)) continue;
                        seen(uy, ux) = 1;
                        stack.emplace_back(uy, ux);
                    }
            }
            out.emplace_back(origin.line + static_cast<double>(best.first),
                             origin.sample + static_cast<double>(best.second));
        }
    return out;
}

namespace {

struct Rigid {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    double angle = 0.0;

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return rotation * p + translation; }
};

// Closed-form least-squares rotation and translation taking p onto q.
Rigid procrustes(const std::vector<Eigen::Vector2d>& p, const std::vector<Eigen::Vector2d>& q) {
    Eigen::Vector2d pc = Eigen::Vector2d::Zero(), qc = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) {
        pc += p[i];
        qc += q[i];
    }
    pc /= static_cast<double>(p.size());
    qc /= static_cast<double>(q.size());
    double dot = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Eigen::Vector2d a = p[i] - pc, b = q[i] - qc;
        dot += a.dot(b);
        cross += a.x() * b.y() - a.y() * b.x();
    }
    Rigid t;
    t.angle = (dot == 0.0 && cross == 0.0) ? 0.0 : std::atan2(cross, dot);
    const double cs = std::cos(t.angle), sn = std::sin(t.angle);
    t.rotation << cs, -sn, sn, cs;
    t.translation = qc - t.rotation * pc;
    return t;
}

std::pair<std::size_t, double> nearest(const std::vector<Eigen::Vector2d>& set, const Eigen::Vector2d& q) {
    std::size_t best = 0;
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double e = (set[j] - q).squaredNorm();
        if (e < d2) {
            d2 = e;
            best = j;
        }
    }
    return {best, d2};
}

}  // namespace

IcpResult icp_align(const std::vector<Eigen::Vector2d>& detected, const std::vector<Eigen::Vector2d>& bright,
                    const IcpOptions& options) {
    if (detected.empty() || bright.empty()) throw DomainError("ICP needs two non-empty point sets");
    if (options.max_iterations < 1) throw DomainError("ICP needs at least one iteration");

    IcpResult out;
    Rigid current, best;
    double best_mse = std::numeric_limits<double>::infinity();
    double previous = std::numeric_limits<double>::infinity();
    int rising = 0;
    std::vector<Eigen::Vector2d> targets(detected.size());
    for (int it = 0; it < options.max_iterations; ++it) {
        double mse = 0.0;
        for (std::size_t i = 0; i < detected.size(); ++i) {
            const auto [j, d2] = nearest(bright, current.apply(detected[i]));
            targets[i] = bright[j];
            mse += d2;
        }
        mse /= static_cast<double>(detected.size());
        out.mse_history.push_back(mse);
        out.iterations = it + 1;
        if (mse < best_mse) {
            best_mse = mse;
            best = current;
        }
        rising = mse > previous ? rising + 1 : 0;
        if (rising >= 3) {
            out.diverged = true;
            break;
        }
        if (previous - mse < options.tolerance_px2 && mse <= previous) break;
        previous = mse;
        current = procrustes(detected, targets);
    }

    out.rotation = best.rotation;
    out.translation = best.translation;
    out.angle_rad = best.angle;
    out.mse = best_mse;
    for (const auto& p : detected) {
        const Eigen::Vector2d a = best.apply(p);
        const auto [j, d2] = nearest(bright, a);
        if (std::sqrt(d2) <= options.gate_px) {
            out.aligned.push_back(bright[j]);
            out.matches.emplace_back(j);
        } else {
            out.aligned.push_back(a);
            out.matches.emplace_back(std::nullopt);
        }
    }
    return out;
}

}  // namespace sargcp

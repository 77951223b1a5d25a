// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sargcp/range_doppler.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sargcp {

/// Additive error terms present in raw range timings.
enum class RangeTerm { SatelliteDynamics, Orbit, Feature, Ionosphere, Troposphere, Geodynamics };
/// Additive error terms present in raw azimuth timings. Atmospheric delays
/// have no azimuth counterpart.
enum class AzimuthTerm { SatelliteDynamics, Orbit, Feature, Geodynamics };

inline constexpr std::size_t kRangeTermCount = 6;
inline constexpr std::size_t kAzimuthTermCount = 4;

/// One slot of a CorrectionSet, e.g. "range.T" or "azimuth.SD".
struct TermId {
    enum class Axis { Range, Azimuth } axis;
    int index;

    static TermId range(RangeTerm t) { return {Axis::Range, static_cast<int>(t)}; }
    static TermId azimuth(AzimuthTerm t) { return {Axis::Azimuth, static_cast<int>(t)}; }

    friend bool operator==(const TermId&, const TermId&) = default;
};

std::string term_key(TermId id);
std::optional<TermId> parse_term_key(std::string_view key);
std::vector<TermId> all_terms();

/// Perturbations, in seconds, contained in raw timings. Correction subtracts.
struct CorrectionSet {
    std::array<double, kRangeTermCount> range{};
    std::array<double, kAzimuthTermCount> azimuth{};
    std::array<std::string, kRangeTermCount> range_provenance{};
    std::array<std::string, kAzimuthTermCount> azimuth_provenance{};

    double& at(TermId id);
    double at(TermId id) const;
    std::string& provenance(TermId id);
    const std::string& provenance(TermId id) const;

    double range_total() const;
    double azimuth_total() const;
};

/// What a provider sees when asked for a term.
struct CorrectionContext {
    const AcquisitionGeometry& geometry;
    std::string_view acquisition_id;
    Ecef approx_target;
    double epoch_days = 0.0;
};

/// Source of one term of a CorrectionSet. Implementations are immutable
/// after construction and may be evaluated concurrently.
class CorrectionProvider {
public:
    virtual ~CorrectionProvider() = default;
    virtual TermId term() const = 0;
    /// Perturbation in seconds.
    virtual double evaluate(const CorrectionContext& ctx) const = 0;
    /// Name plus parameters; echoed as provenance.
    virtual std::string describe() const = 0;
};

using ProviderPtr = std::shared_ptr<const CorrectionProvider>;

/// Along-track speed at the target's zero-Doppler time, m/s.
double along_track_speed(const CorrectionContext& ctx);

/// Fixed perturbation. Range terms may be given as a one-way length
/// (converted with 2/c); azimuth lengths convert with the platform speed.
class ConstantProvider final : public CorrectionProvider {
public:
    enum class Unit { Seconds, Meters };
    ConstantProvider(TermId term, double value, Unit unit);
    TermId term() const override { return term_; }
    double evaluate(const CorrectionContext& ctx) const override;
    std::string describe() const override;

private:
    TermId term_;
    double value_;
    Unit unit_;
};

/// Zenith path delay mapped to slant with 1/cos(mean incidence).
class ZenithMappedProvider final : public CorrectionProvider {
public:
    ZenithMappedProvider(TermId term, double zenith_delay_m);
    TermId term() const override { return term_; }
    double evaluate(const CorrectionContext& ctx) const override;
    std::string describe() const override;
    double slant_delay_m(double incidence_deg) const;

private:
    TermId term_;
    double zenith_m_;
};

/// offset + rate * (epoch - reference), in meters of one-way length
/// (range) or along-track length (azimuth).
class LinearDriftProvider final : public CorrectionProvider {
public:
    LinearDriftProvider(TermId term, double offset_m, double rate_m_per_day, double ref_day);
    TermId term() const override { return term_; }
    double evaluate(const CorrectionContext& ctx) const override;
    std::string describe() const override;

private:
    TermId term_;
    double offset_m_;
    double rate_;
    double ref_day_;
};

/// Zero-mean Gaussian perturbation keyed on (seed, acquisition, target).
/// Used by the simulator only.
class WhiteNoiseProvider final : public CorrectionProvider {
public:
    WhiteNoiseProvider(TermId term, double sigma_m, std::uint64_t seed);
    TermId term() const override { return term_; }
    double evaluate(const CorrectionContext& ctx) const override;
    std::string describe() const override;

private:
    TermId term_;
    double sigma_m_;
    std::uint64_t seed_;
};

/// Ground displacement of the target (east/north/up at the target)
/// converted to a timing perturbation by radar-coding both positions.
class DisplacementProvider final : public CorrectionProvider {
public:
    DisplacementProvider(TermId term, LocalEnu displacement);
    TermId term() const override { return term_; }
    double evaluate(const CorrectionContext& ctx) const override;
    std::string describe() const override;

private:
    TermId term_;
    LocalEnu displacement_;
};

/// Evaluates every term. Missing terms are zero with provenance "zero".
/// Throws DomainError for duplicate providers or insane magnitudes
/// (more than 10 m length-equivalent).
CorrectionSet assemble_corrections(const std::vector<ProviderPtr>& providers,
                                   const CorrectionContext& ctx);

/// Removes every term: tau - sum(range), t - sum(azimuth).
RadarTiming correct_timing(const RadarTiming& raw, const CorrectionSet& c);
/// Forward model used by the simulator: tau + sum(range), t + sum(azimuth).
RadarTiming apply_timing_errors(const RadarTiming& clean, const CorrectionSet& c);

/// One-way length equivalent of a range term, tau * c / 2.
double range_term_length(double seconds);

/// Key-value correction configuration:
///   format_version = 1
///   range.T = zenith_mapped zenith_m=2.3
///   azimuth.SD = constant seconds=1e-6
/// Lines starting with '#' are comments.
std::vector<ProviderPtr> parse_correction_config(std::istream& in, const std::string& source);
std::vector<ProviderPtr> read_correction_config(const std::string& path);

}  // namespace sargcp

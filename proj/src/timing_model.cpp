// SPDX-License-Identifier: Apache-2.0
#include "sargcp/timing_model.hpp"

#include "sargcp/error.hpp"
#include "sargcp/text.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace sargcp {

namespace {

constexpr std::array<const char*, kRangeTermCount> kRangeNames = {"SD", "O", "F", "I", "T", "G"};
constexpr std::array<const char*, kAzimuthTermCount> kAzimuthNames = {"SD", "O", "F", "G"};
constexpr double kMaxLengthEquivalent = 10.0;

std::string fmt(double v) { return text::format_double(v); }

// SplitMix64 finalizer.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return mix(h ^ mix(v)); }

std::uint64_t double_bits(double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    return u;
}

double to_seconds(TermId term, double meters, const CorrectionContext& ctx) {
    if (term.axis == TermId::Axis::Range) return 2.0 * meters / kSpeedOfLight;
    return meters / along_track_speed(ctx);
}

}  // namespace

std::string term_key(TermId id) {
    if (id.axis == TermId::Axis::Range) return std::string("range.") + kRangeNames.at(id.index);
    return std::string("azimuth.") + kAzimuthNames.at(id.index);
}

std::optional<TermId> parse_term_key(std::string_view key) {
    for (const TermId id : all_terms())
        if (term_key(id) == key) return id;
    return std::nullopt;
}

std::vector<TermId> all_terms() {
    std::vector<TermId> out;
    for (int i = 0; i < static_cast<int>(kRangeTermCount); ++i)
        out.push_back({TermId::Axis::Range, i});
    for (int i = 0; i < static_cast<int>(kAzimuthTermCount); ++i)
        out.push_back({TermId::Axis::Azimuth, i});
    return out;
}

double& CorrectionSet::at(TermId id) {
    return id.axis == TermId::Axis::Range ? range.at(id.index) : azimuth.at(id.index);
}
double CorrectionSet::at(TermId id) const {
    return id.axis == TermId::Axis::Range ? range.at(id.index) : azimuth.at(id.index);
}
std::string& CorrectionSet::provenance(TermId id) {
    return id.axis == TermId::Axis::Range ? range_provenance.at(id.index)
                                          : azimuth_provenance.at(id.index);
}
const std::string& CorrectionSet::provenance(TermId id) const {
    return id.axis == TermId::Axis::Range ? range_provenance.at(id.index)
                                          : azimuth_provenance.at(id.index);
}

double CorrectionSet::range_total() const {
    double s = 0.0;
    for (double v : range) s += v;
    return s;
}

double CorrectionSet::azimuth_total() const {
    double s = 0.0;
    for (double v : azimuth) s += v;
    return s;
}

double along_track_speed(const CorrectionContext& ctx) {
    const RadarTiming t = radar_code(ctx.geometry, ctx.approx_target);
    return azimuth_scale(ctx.geometry, t.t_az, ctx.approx_target);
}

ConstantProvider::ConstantProvider(TermId term, double value, Unit unit)
    : term_(term), value_(value), unit_(unit) {
    if (!std::isfinite(value)) throw DomainError("constant provider: non-finite value");
}

double ConstantProvider::evaluate(const CorrectionContext& ctx) const {
    return unit_ == Unit::Seconds ? value_ : to_seconds(term_, value_, ctx);
}

std::string ConstantProvider::describe() const {
    return "constant(" + std::string(unit_ == Unit::Seconds ? "seconds=" : "meters=") +
           fmt(value_) + ")";
}

ZenithMappedProvider::ZenithMappedProvider(TermId term, double zenith_delay_m)
    : term_(term), zenith_m_(zenith_delay_m) {
    if (term.axis != TermId::Axis::Range)
        throw DomainError("zenith_mapped applies to range terms only");
    if (!std::isfinite(zenith_delay_m)) throw DomainError("zenith_mapped: non-finite delay");
}

double ZenithMappedProvider::slant_delay_m(double incidence_deg) const {
    return zenith_m_ / std::cos(incidence_deg * std::numbers::pi / 180.0);
}

double ZenithMappedProvider::evaluate(const CorrectionContext& ctx) const {
    return 2.0 * slant_delay_m(ctx.geometry.incidence_deg) / kSpeedOfLight;
}

std::string ZenithMappedProvider::describe() const {
    return "zenith_mapped(zenith_m=" + fmt(zenith_m_) + ")";
}

LinearDriftProvider::LinearDriftProvider(TermId term, double offset_m, double rate_m_per_day,
                                         double ref_day)
    : term_(term), offset_m_(offset_m), rate_(rate_m_per_day), ref_day_(ref_day) {}

double LinearDriftProvider::evaluate(const CorrectionContext& ctx) const {
    return to_seconds(term_, offset_m_ + rate_ * (ctx.epoch_days - ref_day_), ctx);
}

std::string LinearDriftProvider::describe() const {
    return "drift(offset_m=" + fmt(offset_m_) + ",rate_m_per_day=" + fmt(rate_) +
           ",ref_day=" + fmt(ref_day_) + ")";
}

WhiteNoiseProvider::WhiteNoiseProvider(TermId term, double sigma_m, std::uint64_t seed)
    : term_(term), sigma_m_(sigma_m), seed_(seed) {
    if (!(sigma_m >= 0.0)) throw DomainError("white_noise: sigma must be non-negative");
}

double WhiteNoiseProvider::evaluate(const CorrectionContext& ctx) const {
    std::uint64_t h = hash_combine(seed_, static_cast<std::uint64_t>(term_.index) +
                                              (term_.axis == TermId::Axis::Range ? 0 : 16));
    for (char c : ctx.acquisition_id) h = hash_combine(h, static_cast<unsigned char>(c));
    for (int i = 0; i < 3; ++i) h = hash_combine(h, double_bits(ctx.approx_target[i]));
    // Box-Muller on two derived uniforms in (0, 1).
    const double u1 = (static_cast<double>(mix(h) >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(mix(h + 1) >> 11) + 0.5) * 0x1.0p-53;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return to_seconds(term_, sigma_m_ * z, ctx);
}

std::string WhiteNoiseProvider::describe() const {
    return "white_noise(sigma_m=" + fmt(sigma_m_) + ",seed=" + std::to_string(seed_) + ")";
}

DisplacementProvider::DisplacementProvider(TermId term, LocalEnu displacement)
    : term_(term), displacement_(displacement) {
    if (!((term.axis == TermId::Axis::Range &&
           term.index == static_cast<int>(RangeTerm::Geodynamics)) ||
          (term.axis == TermId::Axis::Azimuth &&
           term.index == static_cast<int>(AzimuthTerm::Geodynamics))))
        throw DomainError("displacement provider applies to geodynamic terms only");
}

double DisplacementProvider::evaluate(const CorrectionContext& ctx) const {
    const LocalFrame frame(ctx.approx_target);
    const Ecef moved = frame.to_ecef(displacement_);
    const RadarTiming before = radar_code(ctx.geometry, ctx.approx_target);
    const RadarTiming after = radar_code(ctx.geometry, moved);
    return term_.axis == TermId::Axis::Range ? after.tau_rg - before.tau_rg
                                             : after.t_az - before.t_az;
}

std::string DisplacementProvider::describe() const {
    return "displacement(east_m=" + fmt(displacement_.east) + ",north_m=" +
           fmt(displacement_.north) + ",up_m=" + fmt(displacement_.up) + ")";
}

CorrectionSet assemble_corrections(const std::vector<ProviderPtr>& providers,
                                   const CorrectionContext& ctx) {
    CorrectionSet set;
    for (const TermId id : all_terms()) set.provenance(id) = "zero";
    std::vector<bool> seen(kRangeTermCount + kAzimuthTermCount, false);
    double speed = -1.0;
    for (const auto& p : providers) {
        if (!p) throw DomainError("assemble_corrections: null provider");
        const TermId id = p->term();
        const std::size_t slot =
            (id.axis == TermId::Axis::Range ? 0 : kRangeTermCount) + static_cast<std::size_t>(id.index);
        if (seen[slot]) throw DomainError("duplicate provider for " + term_key(id));
        seen[slot] = true;
        double v = 0.0;
        try {
            v = p->evaluate(ctx);
        } catch (const Error& e) {
            throw Error("provider " + p->describe() + " failed for " + term_key(id) + ": " +
                        e.what());
        }
        if (!std::isfinite(v)) throw DomainError("provider " + p->describe() + " returned non-finite");
        double length = 0.0;
        if (id.axis == TermId::Axis::Range) {
            length = range_term_length(v);
        } else {
            if (speed < 0.0) speed = along_track_speed(ctx);
            length = v * speed;
        }
        if (std::abs(length) >= kMaxLengthEquivalent)
            throw DomainError(term_key(id) + " exceeds 10 m length equivalent (" + fmt(length) +
                              " m)");
        set.at(id) = v;
        set.provenance(id) = p->describe();
    }
    return set;
}

RadarTiming correct_timing(const RadarTiming& raw, const CorrectionSet& c) {
    return {raw.t_az - c.azimuth_total(), raw.tau_rg - c.range_total()};
}

RadarTiming apply_timing_errors(const RadarTiming& clean, const CorrectionSet& c) {
    return {clean.t_az + c.azimuth_total(), clean.tau_rg + c.range_total()};
}

double range_term_length(double seconds) { return seconds * kSpeedOfLight / 2.0; }

namespace {

std::map<std::string, double, std::less<>> parse_params(const std::vector<std::string_view>& tokens,
                                                        const std::string& source,
                                                        std::size_t line) {
    std::map<std::string, double, std::less<>> params;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        const auto eq = tokens[i].find('=');
        if (eq == std::string_view::npos)
            throw ParseError(source, ParseError::Unit::Line, line,
                             "expected name=value, got '" + std::string(tokens[i]) + "'");
        const auto value = text::parse_double(tokens[i].substr(eq + 1));
        if (!value)
            throw ParseError(source, ParseError::Unit::Line, line,
                             "non-numeric parameter '" + std::string(tokens[i]) + "'");
        params[std::string(tokens[i].substr(0, eq))] = *value;
    }
    return params;
}

double require(const std::map<std::string, double, std::less<>>& params, std::string_view name,
               const std::string& source, std::size_t line) {
    const auto it = params.find(name);
    if (it == params.end())
        throw ParseError(source, ParseError::Unit::Line, line,
                         "missing parameter '" + std::string(name) + "'");
    return it->second;
}

void expect_only(const std::map<std::string, double, std::less<>>& params,
                 std::initializer_list<std::string_view> allowed, const std::string& source,
                 std::size_t line) {
    for (const auto& [k, v] : params) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == k;
        if (!ok)
            throw ParseError(source, ParseError::Unit::Line, line, "unknown parameter '" + k + "'");
    }
}

}  // namespace

std::vector<ProviderPtr> parse_correction_config(std::istream& in, const std::string& source) {
    std::vector<ProviderPtr> out;
    std::string raw;
    std::size_t line = 0;
    bool version_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        const std::string_view s = text::trim(raw);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(source, ParseError::Unit::Line, line, "expected key = value");
        const std::string_view key = text::trim(s.substr(0, eq));
        const std::string_view value = text::trim(s.substr(eq + 1));
        if (key == "format_version") {
            if (value != "1")
                throw ParseError(source, ParseError::Unit::Line, line,
                                 "unsupported format_version '" + std::string(value) + "'");
            version_seen = true;
            continue;
        }
        const auto term = parse_term_key(key);
        if (!term)
            throw ParseError(source, ParseError::Unit::Line, line,
                             "unknown term '" + std::string(key) + "'");
        const auto tokens = text::split_ws(value);
        if (tokens.empty())
            throw ParseError(source, ParseError::Unit::Line, line, "missing provider name");
        const auto params = parse_params(tokens, source, line);
        const std::string_view name = tokens[0];
        try {
            if (name == "zero") {
                expect_only(params, {}, source, line);
                out.push_back(std::make_shared<ConstantProvider>(*term, 0.0,
                                                                 ConstantProvider::Unit::Seconds));
            } else if (name == "constant") {
                expect_only(params, {"seconds", "meters"}, source, line);
                if (params.size() != 1)
                    throw ParseError(source, ParseError::Unit::Line, line,
                                     "constant takes exactly one of seconds= or meters=");
                const bool secs = params.count("seconds") != 0;
                out.push_back(std::make_shared<ConstantProvider>(
                    *term, params.begin()->second,
                    secs ? ConstantProvider::Unit::Seconds : ConstantProvider::Unit::Meters));
            } else if (name == "zenith_mapped") {
                expect_only(params, {"zenith_m"}, source, line);
                out.push_back(std::make_shared<ZenithMappedProvider>(
                    *term, require(params, "zenith_m", source, line)));
            } else if (name == "drift") {
                expect_only(params, {"offset_m", "rate_m_per_day", "ref_day"}, source, line);
                out.push_back(std::make_shared<LinearDriftProvider>(
                    *term, require(params, "offset_m", source, line),
                    require(params, "rate_m_per_day", source, line),
                    params.count("ref_day") ? params.at("ref_day") : 0.0));
            } else if (name == "white_noise") {
                expect_only(params, {"sigma_m", "seed"}, source, line);
                out.push_back(std::make_shared<WhiteNoiseProvider>(
                    *term, require(params, "sigma_m", source, line),
                    static_cast<std::uint64_t>(require(params, "seed", source, line))));
            } else if (name == "displacement") {
                expect_only(params, {"east_m", "north_m", "up_m"}, source, line);
                LocalEnu d{params.count("east_m") ? params.at("east_m") : 0.0,
                           params.count("north_m") ? params.at("north_m") : 0.0,
                           params.count("up_m") ? params.at("up_m") : 0.0};
                out.push_back(std::make_shared<DisplacementProvider>(*term, d));
            } else {
                throw ParseError(source, ParseError::Unit::Line, line,
                                 "unknown provider '" + std::string(name) + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source, ParseError::Unit::Line, line, e.what());
        }
    }
    if (!version_seen)
        throw ParseError(source, ParseError::Unit::Line, line, "missing format_version");
    return out;
}

std::vector<ProviderPtr> read_correction_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open correction config '" + path + "'");
    return parse_correction_config(in, path);
}

}  // namespace sargcp

// SPDX-License-Identifier: Apache-2.0
#include "sargcp/stereo_solver.hpp"

#include "sargcp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace sargcp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One scalar residual row with the satellite state frozen at the
// observed azimuth time.
struct Row {
    std::size_t obs;
    ResidualKind kind;
    std::size_t group;
    Eigen::Vector3d sat;
    Eigen::Vector3d along;  // unit velocity
    double observed;        // slant range for range rows, 0 for azimuth rows
};

double computed(const Row& row, const Ecef& x) {
    return row.kind == ResidualKind::Range ? (x - row.sat).norm() : row.along.dot(x - row.sat);
}

Eigen::Vector3d gradient(const Row& row, const Ecef& x) {
    if (row.kind == ResidualKind::Range) return (x - row.sat).normalized();
    return row.along;
}

double condition_of(const Eigen::Matrix3d& n) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(n, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(2);
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

struct Normal {
    Eigen::Matrix3d n = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
};

Normal build(const std::vector<Row>& rows, const std::vector<double>& sigma2, const Ecef& x) {
    Normal ne;
    for (const Row& r : rows) {
        const double w = 1.0 / sigma2[r.group];
        const Eigen::Vector3d j = gradient(r, x);
        ne.n.noalias() += w * j * j.transpose();
        ne.b += w * j * (r.observed - computed(r, x));
    }
    return ne;
}

}  // namespace

std::vector<std::string> ObservationSet::geometry_ids() const {
    std::set<std::string> ids;
    for (const auto& o : observations)
        if (o.azimuth_active || o.range_active) ids.insert(o.geometry_id);
    return {ids.begin(), ids.end()};
}

std::string_view to_string(ResidualKind k) { return k == ResidualKind::Range ? "range" : "azimuth"; }

const GeometryVariance* StereoSolution::variance_of(std::string_view geometry_id) const {
    for (const auto& v : variances)
        if (v.geometry_id == geometry_id) return &v;
    return nullptr;
}

ResidualPair observation_residual(const TimingObservation& obs, const Ecef& position) {
    const OrbitState s = obs.geometry->orbit.state(obs.timing.t_az);
    const Eigen::Vector3d d = position - s.position;
    return {-s.velocity.normalized().dot(d), 0.5 * kSpeedOfLight * obs.timing.tau_rg - d.norm()};
}

StereoSolution solve(const ObservationSet& obs, std::optional<Ecef> initial,
                     const SolverOptions& options) {
    const std::vector<std::string> ids = obs.geometry_ids();
    if (ids.size() < 2) throw DomainError("stereo solve needs at least two geometries");
    std::map<std::string, std::size_t> gindex;
    for (std::size_t g = 0; g < ids.size(); ++g) gindex[ids[g]] = g;

    std::vector<Row> rows;
    std::vector<std::shared_ptr<const AcquisitionGeometry>> geom_of(ids.size());
    for (std::size_t i = 0; i < obs.observations.size(); ++i) {
        const TimingObservation& o = obs.observations[i];
        if (!o.azimuth_active && !o.range_active) continue;
        if (!o.geometry) throw DomainError("observation '" + o.id + "' has no geometry");
        if (o.provenance.empty())
            throw DomainError("observation '" + o.id + "' carries an uncorrected timing");
        const std::size_t g = gindex.at(o.geometry_id);
        if (!geom_of[g]) geom_of[g] = o.geometry;
        const OrbitState s = o.geometry->orbit.state(o.timing.t_az);
        const Eigen::Vector3d along = s.velocity.normalized();
        if (o.azimuth_active) rows.push_back({i, ResidualKind::Azimuth, 2 * g, s.position, along, 0.0});
        if (o.range_active)
            rows.push_back({i, ResidualKind::Range, 2 * g + 1, s.position, along,
                            0.5 * kSpeedOfLight * o.timing.tau_rg});
    }

    const std::size_t ngroups = 2 * ids.size();
    std::vector<std::size_t> counts(ngroups, 0);
    for (const Row& r : rows) ++counts[r.group];
    for (std::size_t g = 0; g < ngroups; ++g)
        if (counts[g] < options.min_observations)
            throw DomainError("geometry '" + ids[g / 2] + "' has too few " +
                              std::string(to_string(g % 2 ? ResidualKind::Range : ResidualKind::Azimuth)) +
                              " observations");

    Ecef x;
    if (initial) {
        x = *initial;
    } else {
        // Mean timing of the first geometry geocoded at the reference height,
        // else the centroid of whatever geometries geocode.
        std::vector<Ecef> points;
        for (std::size_t g = 0; g < ids.size(); ++g) {
            RadarTiming mean{0.0, 0.0};
            std::size_t n = 0;
            for (const auto& o : obs.observations)
                if (o.geometry_id == ids[g] && (o.azimuth_active || o.range_active)) {
                    mean.t_az += o.timing.t_az;
                    mean.tau_rg += o.timing.tau_rg;
                    ++n;
                }
            mean.t_az /= static_cast<double>(n);
            mean.tau_rg /= static_cast<double>(n);
            try {
                points.push_back(geocode(*geom_of[g], mean, options.reference_height_m));
                if (g == 0) break;
            } catch (const Error&) {
            }
        }
        if (points.empty()) throw DomainError("no geometry yields an initial position");
        x = Ecef::Zero();
        for (const auto& p : points) x += p;
        x /= static_cast<double>(points.size());
    }

    std::vector<double> sigma2(ngroups);
    for (std::size_t g = 0; g < ngroups; ++g)
        sigma2[g] = g % 2 ? options.initial_sigma_rg_m * options.initial_sigma_rg_m
                          : options.initial_sigma_az_m * options.initial_sigma_az_m;
    const double floor2 = options.sigma_floor_m * options.sigma_floor_m;

    StereoSolution sol;
    auto gauss_newton = [&] {
        for (int it = 1; it <= options.max_iterations; ++it) {
            const Normal ne = build(rows, sigma2, x);
            const double cond = condition_of(ne.n);
            if (!(cond <= options.condition_limit))
                throw IllConditionedError("normal matrix condition " + std::to_string(cond) +
                                              " exceeds limit",
                                          cond);
            const Eigen::Vector3d dx = ne.n.ldlt().solve(ne.b);
            if (!dx.allFinite()) throw ConvergenceError("Gauss-Newton produced a non-finite step");
            x += dx;
            ++sol.iterations;
            if (it >= 2 && dx.norm() < options.convergence_m) return;
        }
        throw ConvergenceError("Gauss-Newton did not converge");
    };

    gauss_newton();
    if (options.estimate_variances) {
        double previous_change = std::numeric_limits<double>::infinity();
        int small_steps = 0;
        for (int k = 0; k < options.max_vce_iterations; ++k) {
            const Normal ne = build(rows, sigma2, x);
            const Eigen::Matrix3d ninv = ne.n.inverse();
            std::vector<double> vtv(ngroups, 0.0), red(ngroups, 0.0);
            for (const Row& r : rows) {
                const Eigen::Vector3d j = gradient(r, x);
                const double v = r.observed - computed(r, x);
                vtv[r.group] += v * v;
                red[r.group] += 1.0 - j.dot(ninv * j) / sigma2[r.group];
            }
            double change = 0.0;
            for (std::size_t g = 0; g < ngroups; ++g) {
                const double updated = red[g] > 0.0 ? std::max(vtv[g] / red[g], floor2) : sigma2[g];
                change = std::max(change, std::abs(updated / sigma2[g] - 1.0));
                sigma2[g] = updated;
            }
            ++sol.vce_iterations;
            gauss_newton();
            // Two consecutive small, non-growing updates. A single small step
            // can occur while leaving an unstable balanced split.
            small_steps = (change < options.vce_tolerance && change <= previous_change)
                              ? small_steps + 1
                              : 0;
            previous_change = change;
            if (small_steps >= 2) {
                sol.vce_converged = true;
                break;
            }
        }
    } else {
        sol.vce_converged = true;
    }

    const Normal ne = build(rows, sigma2, x);
    sol.position = x;
    sol.condition = condition_of(ne.n);
    sol.covariance = ne.n.inverse();
    sol.covariance = 0.5 * (sol.covariance + sol.covariance.transpose()).eval();

    std::vector<double> red(ngroups, 0.0);
    for (const Row& r : rows) {
        const Eigen::Vector3d j = gradient(r, x);
        red[r.group] += 1.0 - j.dot(sol.covariance * j) / sigma2[r.group];
    }
    for (std::size_t g = 0; g < ids.size(); ++g) {
        GeometryVariance gv;
        gv.geometry_id = ids[g];
        gv.heading = geom_of[g]->heading;
        gv.incidence_deg = geom_of[g]->incidence_deg;
        gv.s_az = std::sqrt(sigma2[2 * g]);
        gv.s_rg = std::sqrt(sigma2[2 * g + 1]);
        gv.n_az = counts[2 * g];
        gv.n_rg = counts[2 * g + 1];
        gv.redundancy_az = red[2 * g];
        gv.redundancy_rg = red[2 * g + 1];
        sol.variances.push_back(gv);
    }
    for (const auto& o : obs.observations) {
        if (!o.azimuth_active && !o.range_active) continue;
        const ResidualPair rp = observation_residual(o, x);
        sol.residuals.push_back({o.id, o.geometry_id, o.azimuth_active ? rp.azimuth_m : kNaN,
                                 o.range_active ? rp.range_m : kNaN});
    }
    return sol;
}

std::string_view to_string(CascadeOutcome o) {
    switch (o) {
        case CascadeOutcome::Accepted: return "accepted";
        case CascadeOutcome::Rejected: return "rejected";
        case CascadeOutcome::Unsolvable: return "unsolvable";
    }
    return "unsolvable";
}

namespace {

// Drops geometries whose active azimuth or range count fell below the
// minimum. Returns the number of geometries still in play.
std::size_t prune_geometries(ObservationSet& set, int stage, std::size_t min_obs,
                             std::vector<OutlierEntry>& log) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& o : set.observations) {
        auto& c = counts[o.geometry_id];
        c.first += o.azimuth_active ? 1 : 0;
        c.second += o.range_active ? 1 : 0;
    }
    std::size_t alive = 0;
    for (const auto& [gid, c] : counts) {
        if (c.first == 0 && c.second == 0) continue;
        if (c.first >= min_obs && c.second >= min_obs) {
            ++alive;
            continue;
        }
        for (auto& o : set.observations) {
            if (o.geometry_id != gid || (!o.azimuth_active && !o.range_active)) continue;
            o.azimuth_active = o.range_active = false;
            log.push_back({stage, o.id, gid, "too_few_observations"});
        }
    }
    return alive;
}

}  // namespace

CascadeResult outlier_cascade(const ObservationSet& obs, const SolverOptions& solver,
                              const CascadeOptions& options, std::optional<Ecef> initial) {
    CascadeResult result;
    result.cleaned = obs;
    ObservationSet& set = result.cleaned;

    auto attempt = [&](int stage) -> bool {
        try {
            result.solution = solve(set, initial, solver);
            return true;
        } catch (const Error& e) {
            result.outcome = CascadeOutcome::Unsolvable;
            result.reason = "stage " + std::to_string(stage) + ": " + e.what();
            return false;
        }
    };
    auto finish = [&] {
        if (result.solution) result.solution->outlier_log = result.log;
        return result;
    };

    if (prune_geometries(set, 0, solver.min_observations, result.log) < 2) {
        result.reason = "fewer than two geometries";
        return finish();
    }

    // Stage 1: gross residuals.
    if (!attempt(1)) return finish();
    {
        std::map<std::string, std::pair<std::size_t, std::size_t>> gross;  // flagged, active
        std::vector<std::pair<bool, bool>> flags(set.observations.size());
        for (std::size_t i = 0; i < set.observations.size(); ++i) {
            const auto& o = set.observations[i];
            if (!o.azimuth_active && !o.range_active) continue;
            const ResidualPair r = observation_residual(o, result.solution->position);
            flags[i] = {o.azimuth_active && std::abs(r.azimuth_m) > options.gross_azimuth_m,
                        o.range_active && std::abs(r.range_m) > options.gross_range_m};
            auto& g = gross[o.geometry_id];
            g.first += (flags[i].first ? 1 : 0) + (flags[i].second ? 1 : 0);
            g.second += (o.azimuth_active ? 1 : 0) + (o.range_active ? 1 : 0);
        }
        for (std::size_t i = 0; i < set.observations.size(); ++i) {
            auto& o = set.observations[i];
            if (!o.azimuth_active && !o.range_active) continue;
            const auto& g = gross[o.geometry_id];
            if (static_cast<double>(g.first) > options.geometry_gross_fraction * static_cast<double>(g.second)) {
                o.azimuth_active = o.range_active = false;
                result.log.push_back({1, o.id, o.geometry_id, "geometry_mismatch"});
                continue;
            }
            if (flags[i].first) {
                o.azimuth_active = false;
                result.log.push_back({1, o.id, o.geometry_id, "gross_azimuth"});
            }
            if (flags[i].second) {
                o.range_active = false;
                result.log.push_back({1, o.id, o.geometry_id, "gross_range"});
            }
        }
        if (prune_geometries(set, 1, solver.min_observations, result.log) < 2) {
            result.reason = "stage 1: fewer than two geometries remain";
            return finish();
        }
    }

    // Stage 2: two-sigma test against the variance components.
    if (!attempt(2)) return finish();
    {
        const StereoSolution& sol = *result.solution;
        for (auto& o : set.observations) {
            if (!o.azimuth_active && !o.range_active) continue;
            const GeometryVariance* gv = sol.variance_of(o.geometry_id);
            const ResidualPair r = observation_residual(o, sol.position);
            if (o.azimuth_active && std::abs(r.azimuth_m) > options.sigma_multiplier * gv->s_az) {
                o.azimuth_active = false;
                result.log.push_back({2, o.id, o.geometry_id, "two_sigma_azimuth"});
            }
            if (o.range_active && std::abs(r.range_m) > options.sigma_multiplier * gv->s_rg) {
                o.range_active = false;
                result.log.push_back({2, o.id, o.geometry_id, "two_sigma_range"});
            }
        }
        if (prune_geometries(set, 2, solver.min_observations, result.log) < 2) {
            result.reason = "stage 2: fewer than two geometries remain";
            return finish();
        }
    }

    // Stage 3: azimuth consistency across geometries.
    if (!attempt(3)) return finish();
    for (const auto& gv : result.solution->variances) {
        if (gv.s_az > options.max_s_az_m) {
            result.outcome = CascadeOutcome::Rejected;
            result.reason = "geometry '" + gv.geometry_id + "' azimuth sigma " +
                            std::to_string(gv.s_az) + " m exceeds limit";
            result.log.push_back({3, "", gv.geometry_id, "azimuth_sigma_limit"});
            return finish();
        }
    }
    result.outcome = CascadeOutcome::Accepted;
    return finish();
}

std::string_view to_string(GeometryClass c) {
    switch (c) {
        case GeometryClass::AA: return "AA";
        case GeometryClass::DD: return "DD";
        case GeometryClass::AD: return "AD";
        case GeometryClass::ADAD: return "ADAD";
        case GeometryClass::Other: return "other";
    }
    return "other";
}

GeometryClass parse_geometry_class(std::string_view s) {
    if (s == "AA") return GeometryClass::AA;
    if (s == "DD") return GeometryClass::DD;
    if (s == "AD") return GeometryClass::AD;
    if (s == "ADAD") return GeometryClass::ADAD;
    if (s == "other") return GeometryClass::Other;
    throw DomainError("unknown geometry class '" + std::string(s) + "'");
}

GeometryClass classify_geometries(const std::vector<HeadingClass>& headings) {
    const auto asc = std::count(headings.begin(), headings.end(), HeadingClass::Ascending);
    const auto dsc = static_cast<std::ptrdiff_t>(headings.size()) - asc;
    if (asc == 2 && dsc == 0) return GeometryClass::AA;
    if (asc == 0 && dsc == 2) return GeometryClass::DD;
    if (asc == 1 && dsc == 1) return GeometryClass::AD;
    if (asc == 2 && dsc == 2) return GeometryClass::ADAD;
    return GeometryClass::Other;
}

QualityReport report_quality(const StereoSolution& sol, const Ecef& origin) {
    QualityReport q;
    const LocalFrame frame(origin);
    q.enu_covariance = frame.rotate_covariance(sol.covariance);
    q.s_e = q.scale * std::sqrt(std::max(0.0, q.enu_covariance(0, 0)));
    q.s_n = q.scale * std::sqrt(std::max(0.0, q.enu_covariance(1, 1)));
    q.s_h = q.scale * std::sqrt(std::max(0.0, q.enu_covariance(2, 2)));
    std::vector<HeadingClass> headings;
    for (const auto& v : sol.variances) headings.push_back(v.heading);
    q.geometry_class = classify_geometries(headings);
    return q;
}

QualityReport report_quality(const StereoSolution& sol) { return report_quality(sol, sol.position); }

}  // namespace sargcp

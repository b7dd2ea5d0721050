#include "hyperdest/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hyperdest::preprocess {
namespace {

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

// Marks both endpoints of every segment whose implied speed exceeds the
// limit. Returns true if any segment violates.
bool flag_violations(const std::vector<geo::GeoPoint>& pts, double interval_s,
                     double max_speed_kmh, std::vector<bool>& flagged) {
    bool any = false;
    flagged.assign(pts.size(), false);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double speed_kmh =
            geo::haversine_km(pts[i], pts[i + 1]) / interval_s * 3600.0;
        if (speed_kmh > max_speed_kmh) {
            flagged[i] = true;
            flagged[i + 1] = true;
            any = true;
        }
    }
    return any;
}

}  // namespace

bool duration_keep(const Trajectory& traj, const PreprocessConfig& cfg) {
    if (traj.points.size() < 2) return false;
    const double duration_s =
        static_cast<double>(traj.points.size() - 1) * cfg.interval_s;
    return duration_s > cfg.min_duration_s && duration_s < cfg.max_duration_s;
}

std::optional<Trajectory> speed_smooth(const Trajectory& traj,
                                       const PreprocessConfig& cfg,
                                       bool* changed) {
    if (changed) *changed = false;
    if (traj.points.size() < 2) return traj;

    Trajectory out = traj;
    std::vector<bool> flagged;
    for (int iter = 0; iter < cfg.max_median_iters; ++iter) {
        if (!flag_violations(out.points, cfg.interval_s, cfg.max_speed_kmh,
                             flagged)) {
            return out;
        }
        if (changed) *changed = true;
        const auto snapshot = out.points;
        const std::size_t n = snapshot.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!flagged[i]) continue;
            if (i == 0 || i + 1 == n) {
                // Single-neighbor endpoint: mean of the two-point window.
                const auto& nb = (i == 0) ? snapshot[1] : snapshot[n - 2];
                out.points[i].lat = 0.5 * (snapshot[i].lat + nb.lat);
                out.points[i].lon = 0.5 * (snapshot[i].lon + nb.lon);
            } else {
                out.points[i].lat = median3(snapshot[i - 1].lat, snapshot[i].lat,
                                            snapshot[i + 1].lat);
                out.points[i].lon = median3(snapshot[i - 1].lon, snapshot[i].lon,
                                            snapshot[i + 1].lon);
            }
        }
    }
    if (!flag_violations(out.points, cfg.interval_s, cfg.max_speed_kmh, flagged)) {
        return out;
    }
    return std::nullopt;  // persistent violation, drop
}

bool area_keep(const Trajectory& traj, const geo::BoundingBox& bbox) {
    if (traj.points.empty()) return false;
    return std::all_of(traj.points.begin(), traj.points.end(),
                       [&](const geo::GeoPoint& p) { return bbox.contains(p); });
}

double roundtrip_factor(const Trajectory& traj) {
    if (traj.points.size() < 2) {
        throw std::invalid_argument("roundtrip_factor: need at least 2 points");
    }
    const double beeline =
        geo::haversine_km(traj.points.front(), traj.points.back());
    if (beeline == 0.0) return std::numeric_limits<double>::infinity();
    return geo::path_length_km(traj.points) / beeline;
}

bool roundtrip_keep(const Trajectory& traj, const PreprocessConfig& cfg) {
    return roundtrip_factor(traj) < cfg.tau_max;
}

std::pair<std::vector<Trajectory>, FilterReport> run_pipeline(
    const std::vector<Trajectory>& input, const PreprocessConfig& cfg) {
    FilterReport report;
    report.input = input.size();
    std::vector<Trajectory> out;
    for (const auto& traj : input) {
        if (!duration_keep(traj, cfg)) {
            ++report.removed_duration;
            continue;
        }
        bool changed = false;
        auto smoothed = speed_smooth(traj, cfg, &changed);
        if (!smoothed) {
            ++report.removed_speed;
            continue;
        }
        if (!area_keep(*smoothed, cfg.bbox)) {
            ++report.removed_area;
            continue;
        }
        if (!roundtrip_keep(*smoothed, cfg)) {
            ++report.removed_roundtrip;
            continue;
        }
        if (changed) ++report.smoothed;
        out.push_back(std::move(*smoothed));
    }
    report.output = out.size();
    return {std::move(out), report};
}

}  // namespace hyperdest::preprocess

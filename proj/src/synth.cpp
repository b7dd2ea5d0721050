#include "hyperdest/synth.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hyperdest::synth {
namespace {

constexpr double kKmPerDegLat = 110.574;
constexpr double kKmPerDegLonEq = 111.320;

// 2014-01-01T00:00:00Z; synthetic start times span one year from here.
constexpr std::int64_t kEpochBase = 1388534400;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 step, giving each trajectory an independent stream.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::string SynthConfig::echo() const {
    std::ostringstream o;
    o << "n_hotspots=" << (hotspots.empty() ? n_hotspots : hotspots.size())
      << " kappa=" << affinity_sharpness << " n=" << n_trajectories
      << " noise_km=" << noise_km << " speed_kmh=" << speed_kmh
      << " interval_s=" << interval_s << " seed=" << seed
      << " n_drivers=" << n_drivers;
    return o.str();
}

std::vector<Hotspot> default_hotspots(const SynthConfig& cfg) {
    std::vector<Hotspot> out;
    const double clat = 0.5 * (cfg.area.min_lat + cfg.area.max_lat);
    const double clon = 0.5 * (cfg.area.min_lon + cfg.area.max_lon);
    const double rlat = 0.35 * (cfg.area.max_lat - cfg.area.min_lat);
    const double rlon = 0.35 * (cfg.area.max_lon - cfg.area.min_lon);
    const auto n = cfg.n_hotspots;
    for (std::size_t j = 0; j < n; ++j) {
        const double ang = 2.0 * geo::kPi * static_cast<double>(j) /
                           static_cast<double>(n);
        Hotspot h;
        h.center = {clat + rlat * std::sin(ang), clon + rlon * std::cos(ang)};
        h.peak_hour = 24.0 * static_cast<double>(j) / static_cast<double>(n);
        out.push_back(h);
    }
    return out;
}

std::vector<double> hotspot_probabilities(const SynthConfig& cfg,
                                          double t_hours) {
    const auto hotspots =
        cfg.hotspots.empty() ? default_hotspots(cfg) : cfg.hotspots;
    if (hotspots.empty()) {
        throw std::invalid_argument("hotspot_probabilities: no hotspots");
    }
    const double hour_of_day = std::fmod(std::fmod(t_hours, 24.0) + 24.0, 24.0);
    std::vector<double> p(hotspots.size());
    double mx = -1e300;
    for (std::size_t j = 0; j < hotspots.size(); ++j) {
        const double affinity =
            std::cos(2.0 * geo::kPi * (hour_of_day - hotspots[j].peak_hour) / 24.0);
        p[j] = cfg.affinity_sharpness * affinity;
        mx = std::max(mx, p[j]);
    }
    double z = 0.0;
    for (auto& v : p) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : p) v /= z;
    return p;
}

std::vector<Trajectory> generate(const SynthConfig& cfg) {
    const auto hotspots =
        cfg.hotspots.empty() ? default_hotspots(cfg) : cfg.hotspots;
    if (hotspots.empty()) {
        throw std::invalid_argument("synth: no hotspots configured");
    }
    const double step_km = cfg.speed_kmh * cfg.interval_s / 3600.0;
    if (step_km <= 0.0) {
        throw std::invalid_argument("synth: non-positive step length");
    }

    std::vector<Trajectory> corpus;
    corpus.reserve(cfg.n_trajectories);
    for (std::size_t i = 0; i < cfg.n_trajectories; ++i) {
        std::mt19937_64 rng(mix_seed(cfg.seed, i));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        const double t_sec = u01(rng) * 365.0 * 24.0 * 3600.0;
        const auto timestamp = kEpochBase + static_cast<std::int64_t>(t_sec);
        const double t_hours = static_cast<double>(timestamp) / 3600.0;

        // Destination hotspot from the time-dependent categorical.
        const auto probs = hotspot_probabilities(cfg, t_hours);
        double roll = u01(rng);
        std::size_t dest_idx = probs.size() - 1;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (roll < probs[j]) {
                dest_idx = j;
                break;
            }
            roll -= probs[j];
        }
        const geo::GeoPoint dest = hotspots[dest_idx].center;

        geo::GeoPoint origin;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            origin = {cfg.area.min_lat +
                          u01(rng) * (cfg.area.max_lat - cfg.area.min_lat),
                      cfg.area.min_lon +
                          u01(rng) * (cfg.area.max_lon - cfg.area.min_lon)};
            if (geo::haversine_km(origin, dest) >= cfg.min_trip_km) break;
        }

        const double trip_km = geo::haversine_km(origin, dest);
        const auto n_seg = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(trip_km / step_km)));

        Trajectory traj;
        traj.trip_id = "synth-" + std::to_string(i);
        traj.meta.timestamp = timestamp;
        traj.meta.taxi_id = static_cast<int>(i % std::max<std::size_t>(1, cfg.n_drivers));
        const double coslat = std::cos(geo::deg2rad(
            0.5 * (cfg.area.min_lat + cfg.area.max_lat)));
        for (std::size_t k = 0; k <= n_seg; ++k) {
            const double f = static_cast<double>(k) / static_cast<double>(n_seg);
            geo::GeoPoint p{origin.lat + f * (dest.lat - origin.lat),
                            origin.lon + f * (dest.lon - origin.lon)};
            if (cfg.noise_km > 0.0) {
                p.lat += gauss(rng) * cfg.noise_km / kKmPerDegLat;
                p.lon += gauss(rng) * cfg.noise_km / (kKmPerDegLonEq * coslat);
            }
            traj.points.push_back(p);
        }
        corpus.push_back(std::move(traj));
    }
    return corpus;
}

}  // namespace hyperdest::synth

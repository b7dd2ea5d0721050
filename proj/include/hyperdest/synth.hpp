#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperdest/trajectory.hpp"

namespace hyperdest::synth {

struct Hotspot {
    geo::GeoPoint center;
    double peak_hour = 0.0;  // hour of day of maximum popularity
};

// A time-dependent toy city: destinations are hotspots whose popularity
// oscillates over the day, so trip start time carries real information
// about where the trip ends.
struct SynthConfig {
    std::size_t n_hotspots = 8;        // used when hotspots is empty
    std::vector<Hotspot> hotspots;     // explicit placement overrides
    double affinity_sharpness = 3.0;   // kappa in softmax(kappa * cos(...))
    std::size_t n_trajectories = 1000;
    double noise_km = 0.05;            // GPS jitter sigma
    double speed_kmh = 30.0;
    double interval_s = 15.0;
    double min_trip_km = 1.0;
    geo::BoundingBox area{41.08, 41.22, -8.70, -8.50};
    std::uint64_t seed = 0;
    std::size_t n_drivers = 20;

    std::string echo() const;  // one-line key=value summary
};

// Exact per-hotspot destination probabilities at start time t (hours since
// epoch): softmax over j of kappa * cos(2*pi*(t - peak_j)/24).
std::vector<double> hotspot_probabilities(const SynthConfig& cfg, double t_hours);

// Default placement: hotspots evenly spread on a circle inside the area,
// peak hours evenly spaced over the day.
std::vector<Hotspot> default_hotspots(const SynthConfig& cfg);

// Deterministic given cfg.seed. Each trajectory: uniform start time over a
// year, destination drawn from hotspot_probabilities, origin uniform in
// the area (at least min_trip_km from the destination), straight-line path
// at speed_kmh sampled every interval_s with Gaussian jitter.
std::vector<Trajectory> generate(const SynthConfig& cfg);

}  // namespace hyperdest::synth

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hyperdest/trajectory.hpp"

namespace hyperdest::preprocess {

struct PreprocessConfig {
    double min_duration_s = 120.0;   // drop if duration <= this
    double max_duration_s = 7200.0;  // drop if duration >= this
    double max_speed_kmh = 240.0;
    double tau_max = 3.5;  // keep iff tau < tau_max
    double interval_s = 15.0;
    int max_median_iters = 5;
    // Default Porto-area box covering the metropolitan region.
    geo::BoundingBox bbox{41.04, 41.26, -8.74, -8.45};
};

struct FilterReport {
    std::size_t input = 0;
    std::size_t removed_duration = 0;
    std::size_t removed_speed = 0;  // persistent violations after smoothing
    std::size_t removed_area = 0;
    std::size_t removed_roundtrip = 0;
    std::size_t smoothed = 0;  // survivors altered by the median filter
    std::size_t output = 0;

    bool consistent() const {
        return input == output + removed_duration + removed_speed +
                            removed_area + removed_roundtrip;
    }
};

// Step 1: drop trips of 2 minutes or less, 2 hours or longer (inclusive
// at both boundaries), and single-point trips.
bool duration_keep(const Trajectory& traj, const PreprocessConfig& cfg);

// Step 2: median-filter points implicated in speeds above the limit.
// Returns the (possibly smoothed) trajectory, or nullopt when violations
// persist after max_median_iters passes. *changed reports whether any
// point moved.
std::optional<Trajectory> speed_smooth(const Trajectory& traj,
                                       const PreprocessConfig& cfg,
                                       bool* changed = nullptr);

// Step 3: drop trips with any point outside the area (empty trips drop too).
bool area_keep(const Trajectory& traj, const geo::BoundingBox& bbox);

// Step 4: roundtrip factor tau = path length / beeline. Zero beeline maps
// to +infinity. Throws std::invalid_argument for fewer than 2 points.
double roundtrip_factor(const Trajectory& traj);
bool roundtrip_keep(const Trajectory& traj, const PreprocessConfig& cfg);

// Full pipeline in order duration -> speed -> area -> roundtrip; preserves
// input order among survivors.
std::pair<std::vector<Trajectory>, FilterReport> run_pipeline(
    const std::vector<Trajectory>& input, const PreprocessConfig& cfg);

}  // namespace hyperdest::preprocess

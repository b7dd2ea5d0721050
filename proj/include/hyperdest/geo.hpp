#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace hyperdest::geo {

// Mean Earth radius in kilometers, shared by every distance computation.
inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]

    bool operator==(const GeoPoint&) const = default;
};

bool is_valid(const GeoPoint& p);

struct BoundingBox {
    double min_lat = 0.0;
    double max_lat = 0.0;
    double min_lon = 0.0;
    double max_lon = 0.0;

    // Closed intervals: boundary points count as inside.
    bool contains(const GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon &&
               p.lon <= max_lon;
    }
};

// Great-circle distance in km between two lat/lon points.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Sum of consecutive segment distances; 0 for a single point.
// Throws std::invalid_argument on an empty sequence.
double path_length_km(std::span<const GeoPoint> points);

}  // namespace hyperdest::geo

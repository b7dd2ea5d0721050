#include "hyperdest/geo.hpp"

#include <cmath>

namespace hyperdest::geo {

bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
           p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = deg2rad(a.lat);
    const double phi2 = deg2rad(b.lat);
    const double dphi = deg2rad(b.lat - a.lat);
    const double dlam = deg2rad(b.lon - a.lon);

    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    // Clamp against rounding; h must stay in [0, 1].
    if (h < 0.0) h = 0.0;
    if (h > 1.0) h = 1.0;

    // atan2(sqrt(h), sqrt(1-h)) is the stable form of arctan(sqrt(h/(1-h))).
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

double path_length_km(std::span<const GeoPoint> points) {
    if (points.empty()) {
        throw std::invalid_argument("path_length_km: empty point sequence");
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        total += haversine_km(points[i], points[i + 1]);
    }
    return total;
}

}  // namespace hyperdest::geo

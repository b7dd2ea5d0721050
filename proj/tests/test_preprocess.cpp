#include <doctest.h>

#include <cmath>

#include "hyperdest/preprocess.hpp"

using namespace hyperdest;
using namespace hyperdest::preprocess;

namespace {

constexpr double kBaseLat = 41.15;
constexpr double kBaseLon = -8.61;

// Degrees per km on the library's sphere (radius 6371 km).
constexpr double kKmPerDegLat = geo::kEarthRadiusKm * geo::kPi / 180.0;

double lat_offset_km(double km) { return km / kKmPerDegLat; }
double lon_offset_km(double km) {
    return km / (kKmPerDegLat * std::cos(geo::deg2rad(kBaseLat)));
}

// Straight northbound trip, one point every step_km.
Trajectory straight_trip(std::size_t n, double step_km = 0.125) {
    Trajectory t;
    t.trip_id = "t";
    t.meta.timestamp = 1372636858;
    for (std::size_t i = 0; i < n; ++i) {
        t.points.push_back(
            {kBaseLat + lat_offset_km(step_km * static_cast<double>(i)), kBaseLon});
    }
    return t;
}

}  // namespace

TEST_CASE("duration boundaries are inclusive drops") {
    PreprocessConfig cfg;
    CHECK_FALSE(duration_keep(straight_trip(9), cfg));    // 120 s exactly
    CHECK(duration_keep(straight_trip(10), cfg));         // 135 s
    CHECK_FALSE(duration_keep(straight_trip(481), cfg));  // 7200 s exactly
    CHECK(duration_keep(straight_trip(480), cfg));        // 7185 s
    CHECK_FALSE(duration_keep(straight_trip(1), cfg));    // single point
}

TEST_CASE("speed smoothing") {
    PreprocessConfig cfg;

    SUBCASE("legal trajectory is untouched") {
        auto t = straight_trip(20);
        bool changed = true;
        auto out = speed_smooth(t, cfg, &changed);
        REQUIRE(out.has_value());
        CHECK_FALSE(changed);
        CHECK(out->points == t.points);
    }

    SUBCASE("single 10 km spike is pulled back to the neighbor median") {
        auto t = straight_trip(9);
        const auto original = t.points;
        t.points[4].lon = kBaseLon + lon_offset_km(10.0);  // ~2400 km/h jump
        bool changed = false;
        auto out = speed_smooth(t, cfg, &changed);
        REQUIRE(out.has_value());
        CHECK(changed);
        // Spike landed back on the line between its neighbors.
        CHECK(out->points[4].lon == doctest::Approx(kBaseLon).epsilon(1e-12));
        CHECK(out->points[4].lat == doctest::Approx(original[4].lat).epsilon(1e-12));
        // Every implied speed is legal afterward (haversine oracle).
        for (std::size_t i = 0; i + 1 < out->points.size(); ++i) {
            const double kmh =
                geo::haversine_km(out->points[i], out->points[i + 1]) /
                cfg.interval_s * 3600.0;
            CHECK(kmh <= cfg.max_speed_kmh);
        }
    }

    SUBCASE("persistent teleporting trajectory is dropped") {
        Trajectory t;
        t.meta.timestamp = 1372636858;
        for (int i = 0; i < 12; ++i) {
            // Alternates between two points 30 km apart; the median filter
            // cannot fix it.
            t.points.push_back({kBaseLat + (i % 2 ? lat_offset_km(30.0) : 0.0),
                                kBaseLon});
        }
        CHECK_FALSE(speed_smooth(t, cfg).has_value());
    }

    SUBCASE("speed at the limit is legal (boundary is a strict >)") {
        // 240 km/h over 15 s is 1 km per step; stay a hair inside so
        // floating-point noise cannot tip a segment over the boundary.
        auto t = straight_trip(10, 1.0 - 1e-6);
        bool changed = false;
        auto out = speed_smooth(t, cfg, &changed);
        REQUIRE(out.has_value());
        CHECK_FALSE(changed);
    }
}

TEST_CASE("area filter") {
    PreprocessConfig cfg;
    auto t = straight_trip(12);
    CHECK(area_keep(t, cfg.bbox));
    t.points[5].lon = -8.40;  // outside
    CHECK_FALSE(area_keep(t, cfg.bbox));
    Trajectory empty;
    CHECK_FALSE(area_keep(empty, cfg.bbox));
}

TEST_CASE("roundtrip factor") {
    SUBCASE("collinear evenly spaced gives tau = 1") {
        auto t = straight_trip(3, 1.11195);
        CHECK(roundtrip_factor(t) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("out-and-back gives infinity") {
        Trajectory t;
        t.points = {{kBaseLat, kBaseLon},
                    {kBaseLat + lat_offset_km(1.0), kBaseLon},
                    {kBaseLat, kBaseLon}};
        CHECK(std::isinf(roundtrip_factor(t)));
        PreprocessConfig cfg;
        CHECK_FALSE(roundtrip_keep(t, cfg));
    }
    SUBCASE("right-angle path gives sqrt(2)") {
        Trajectory t;
        const geo::GeoPoint a{kBaseLat, kBaseLon};
        const geo::GeoPoint b{kBaseLat + lat_offset_km(1.0), kBaseLon};
        const geo::GeoPoint c{b.lat, kBaseLon + lon_offset_km(1.0)};
        t.points = {a, b, c};
        // Verified against the haversine oracle directly:
        const double expected = (geo::haversine_km(a, b) + geo::haversine_km(b, c)) /
                                geo::haversine_km(a, c);
        CHECK(expected == doctest::Approx(1.41421).epsilon(1e-3));
        CHECK(roundtrip_factor(t) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("fewer than two points is an error") {
        CHECK_THROWS_AS(roundtrip_factor(straight_trip(1)), std::invalid_argument);
    }
}

TEST_CASE("pipeline accounting and order") {
    PreprocessConfig cfg;

    SUBCASE("empty stream") {
        auto [out, report] = run_pipeline({}, cfg);
        CHECK(out.empty());
        CHECK(report.input == 0);
        CHECK(report.consistent());
    }

    SUBCASE("one passing trip survives every stage") {
        auto [out, report] = run_pipeline({straight_trip(40)}, cfg);
        CHECK(out.size() == 1);
        CHECK(report.consistent());
    }

    SUBCASE("crafted corpus hits each removal reason once") {
        std::vector<Trajectory> corpus;
        corpus.push_back(straight_trip(40));  // survivor
        corpus.push_back(straight_trip(5));   // duration
        {
            Trajectory tele;  // persistent speed violation
            tele.meta.timestamp = 1;
            for (int i = 0; i < 12; ++i) {
                tele.points.push_back(
                    {kBaseLat + (i % 2 ? lat_offset_km(30.0) : 0.0), kBaseLon});
            }
            corpus.push_back(tele);
        }
        {
            // Legal speeds throughout, but every point east of the box.
            auto outside = straight_trip(40);  // area
            for (auto& p : outside.points) p.lon = -8.40;
            corpus.push_back(outside);
        }
        {
            Trajectory loop;  // roundtrip
            for (int i = 0; i < 20; ++i) {
                loop.points.push_back(
                    {kBaseLat + lat_offset_km(0.125 * (i < 10 ? i : 19 - i)),
                     kBaseLon});
            }
            loop.points.push_back(loop.points.front());
            corpus.push_back(loop);
        }
        {
            auto smoothable = straight_trip(40);  // survivor with one spike
            smoothable.points[20].lon = kBaseLon + lon_offset_km(10.0);
            corpus.push_back(smoothable);
        }

        auto [out, report] = run_pipeline(corpus, cfg);
        CHECK(report.input == 6);
        CHECK(report.removed_duration == 1);
        CHECK(report.removed_speed == 1);
        CHECK(report.removed_area == 1);
        CHECK(report.removed_roundtrip == 1);
        CHECK(report.smoothed == 1);
        CHECK(report.output == 2);
        CHECK(report.consistent());
        // Order preserved among survivors.
        REQUIRE(out.size() == 2);
        CHECK(out[0].points[0].lat == doctest::Approx(kBaseLat));

        // Every survivor satisfies all four predicates simultaneously.
        for (const auto& t : out) {
            CHECK(duration_keep(t, cfg));
            bool changed = false;
            auto again = speed_smooth(t, cfg, &changed);
            REQUIRE(again.has_value());
            CHECK_FALSE(changed);
            CHECK(area_keep(t, cfg.bbox));
            CHECK(roundtrip_keep(t, cfg));
        }
    }
}

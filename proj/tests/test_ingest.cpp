#include <doctest.h>

#include <sstream>

#include "hyperdest/ingest.hpp"

using namespace hyperdest;
using namespace hyperdest::ingest;

namespace {

const char* kHeader =
    "\"TRIP_ID\",\"CALL_TYPE\",\"ORIGIN_CALL\",\"ORIGIN_STAND\",\"TAXI_ID\","
    "\"TIMESTAMP\",\"DAY_TYPE\",\"MISSING_DATA\",\"POLYLINE\"";

std::string with_header(const std::string& rows) {
    return std::string(kHeader) + "\n" + rows;
}

}  // namespace

TEST_CASE("parses a typical row, longitude first in the file") {
    std::istringstream in(with_header(
        "\"1372636858620000589\",\"C\",\"\",\"\",\"20000589\",\"1372636858\","
        "\"A\",\"False\",\"[[-8.61,41.15]]\"\n"));
    auto trips = parse_csv_all(in);
    REQUIRE(trips.size() == 1);
    const auto& t = trips[0];
    CHECK(t.trip_id == "1372636858620000589");
    CHECK(t.call_type == 'C');
    CHECK_FALSE(t.origin_call.has_value());
    CHECK_FALSE(t.origin_stand.has_value());
    CHECK(t.taxi_id == 20000589);
    CHECK(t.timestamp == 1372636858);
    CHECK_FALSE(t.missing_data);
    REQUIRE(t.polyline.size() == 1);
    CHECK(t.polyline[0].lat == doctest::Approx(41.15));  // stored lat-first
    CHECK(t.polyline[0].lon == doctest::Approx(-8.61));
}

TEST_CASE("empty polyline yields zero points") {
    std::istringstream in(with_header(
        "\"x\",\"B\",\"\",\"15\",\"1\",\"1372636858\",\"A\",\"False\",\"[]\"\n"));
    auto trips = parse_csv_all(in);
    REQUIRE(trips.size() == 1);
    CHECK(trips[0].polyline.empty());
    CHECK(trips[0].origin_stand == 15);
}

TEST_CASE("malformed rows go to the reject log and parsing continues") {
    std::istringstream in(with_header(
        "\"bad\",\"C\",\"\",\"\",\"1\",\"1372636858\",\"A\",\"False\",\"[[oops\"\n"
        "\"ok\",\"A\",\"7\",\"\",\"2\",\"1372636999\",\"B\",\"False\","
        "\"[[-8.6,41.1],[-8.59,41.11]]\"\n"));
    std::vector<RejectEntry> rejects;
    auto trips = parse_csv_all(in, &rejects);
    REQUIRE(trips.size() == 1);
    CHECK(trips[0].trip_id == "ok");
    CHECK(trips[0].origin_call == 7);
    REQUIRE(rejects.size() == 1);
    CHECK(rejects[0].row_number == 1);

    std::ostringstream log;
    write_reject_log(log, rejects);
    CHECK(log.str().find("1\t") == 0);
}

TEST_CASE("bad header is rejected outright") {
    std::istringstream in("A,B,C\n");
    CHECK_THROWS_AS(parse_csv_all(in), std::runtime_error);
}

TEST_CASE("row round-trip: parse -> serialize -> parse is identity") {
    std::istringstream in(with_header(
        "\"42\",\"B\",\"\",\"33\",\"612\",\"1388620000\",\"C\",\"True\","
        "\"[[-8.618643,41.141412],[-8.618499,41.141376]]\"\n"));
    auto trips = parse_csv_all(in);
    REQUIRE(trips.size() == 1);
    std::istringstream again(csv_header() + "\n" + to_csv_row(trips[0]) + "\n");
    auto reparsed = parse_csv_all(again);
    REQUIRE(reparsed.size() == 1);
    CHECK(reparsed[0] == trips[0]);
}

TEST_CASE("to_trajectory contracts") {
    RawTrip t;
    t.trip_id = "t";
    t.taxi_id = 9;
    t.timestamp = 1372636858;
    t.polyline = {{41.15, -8.61}, {41.16, -8.60}};

    SUBCASE("passthrough with absent stand") {
        auto traj = to_trajectory(t);
        REQUIRE(traj.has_value());
        CHECK(traj->points.size() == 2);
        CHECK(traj->meta.timestamp == 1372636858);
        CHECK_FALSE(traj->meta.origin_stand.has_value());
    }
    SUBCASE("missing_data skips") {
        t.missing_data = true;
        CHECK_FALSE(to_trajectory(t).has_value());
    }
    SUBCASE("zero points skips") {
        t.polyline.clear();
        CHECK_FALSE(to_trajectory(t).has_value());
    }
}

TEST_CASE("corpus persistence round-trip") {
    std::vector<Trajectory> corpus(2);
    corpus[0].trip_id = "a";
    corpus[0].points = {{41.15, -8.61}, {41.151234567, -8.6}};
    corpus[0].meta = {1372636858, 3, 15, std::nullopt};
    corpus[1].trip_id = "b";
    corpus[1].points = {{41.2, -8.5}};
    corpus[1].meta = {1388620000, 4, std::nullopt, 777};

    std::ostringstream out;
    write_corpus(out, corpus, {"note"});
    std::istringstream in(out.str());
    auto loaded = read_corpus(in);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].trip_id == "a");
    CHECK(loaded[0].meta.origin_stand == 15);
    CHECK(loaded[1].meta.origin_call == 777);
    CHECK(loaded[0].points[1].lat == doctest::Approx(41.151234567).epsilon(1e-9));
}

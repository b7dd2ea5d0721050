#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hyperdest/trajectory.hpp"

namespace hyperdest::ingest {

// One row of the Porto competition CSV. POLYLINE is stored lat-first even
// though the file holds [lon, lat] pairs -- see the parser.
struct RawTrip {
    std::string trip_id;
    char call_type = 'A';  // A, B or C
    std::optional<int> origin_call;
    std::optional<int> origin_stand;
    int taxi_id = 0;
    std::int64_t timestamp = 0;
    char day_type = 'A';  // parsed but unused downstream
    bool missing_data = false;
    std::vector<geo::GeoPoint> polyline;

    bool operator==(const RawTrip&) const = default;
};

struct RejectEntry {
    std::size_t row_number;  // 1-based data row (header excluded)
    std::string reason;
};

// Streaming parser: invokes on_trip for every well-formed row and collects
// malformed rows into the reject list without aborting. Memory use is
// bounded by one row at a time.
// Throws std::runtime_error if the header does not match the Porto schema.
void parse_csv(std::istream& in, const std::function<void(RawTrip)>& on_trip,
               std::vector<RejectEntry>* rejects = nullptr);

// Convenience: parse the whole stream into memory.
std::vector<RawTrip> parse_csv_all(std::istream& in,
                                   std::vector<RejectEntry>* rejects = nullptr);

// Re-serialize a trip to its CSV row form (round-trips through parse_csv).
std::string to_csv_row(const RawTrip& trip);
std::string csv_header();

// Reject log format: "row_number<TAB>reason", one entry per line.
void write_reject_log(std::ostream& out, const std::vector<RejectEntry>& rejects);

// Converts a usable raw trip to the internal trajectory record.
// Returns nullopt (skip) when missing_data is set or the polyline is empty.
std::optional<Trajectory> to_trajectory(const RawTrip& trip);

}  // namespace hyperdest::ingest

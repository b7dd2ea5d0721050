#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hyperdest/geo.hpp"

namespace hyperdest {

struct MetadataRaw {
    std::int64_t timestamp = 0;  // Unix seconds, trip start
    int taxi_id = 0;
    std::optional<int> origin_stand;
    std::optional<int> origin_call;

    bool operator==(const MetadataRaw&) const = default;
};

struct Trajectory {
    std::string trip_id;
    std::vector<geo::GeoPoint> points;
    MetadataRaw meta;

    bool operator==(const Trajectory&) const = default;
};

// Line-oriented corpus format, one trajectory per record:
//   trip_id <TAB> timestamp <TAB> taxi_id <TAB> stand|- <TAB> customer|-
//           <TAB> n_points <TAB> lat,lon;lat,lon;...
// The first line is a "# hyperdest-corpus v1" marker; further '#' lines
// are free-form comments (e.g. a config echo) and are skipped on read.
inline constexpr const char* kCorpusMagic = "# hyperdest-corpus v1";

void write_corpus(std::ostream& out, const std::vector<Trajectory>& corpus,
                  const std::vector<std::string>& comments = {});
std::vector<Trajectory> read_corpus(std::istream& in);

void save_corpus(const std::string& path, const std::vector<Trajectory>& corpus,
                 const std::vector<std::string>& comments = {});
std::vector<Trajectory> load_corpus(const std::string& path);

}  // namespace hyperdest

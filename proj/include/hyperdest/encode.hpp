#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hyperdest/diffcore.hpp"
#include "hyperdest/trajectory.hpp"

namespace hyperdest::encode {

// Sinusoidal period in hours for day / week / year cycles.
inline constexpr double kPeriodDay = 24.0;
inline constexpr double kPeriodWeek = 168.0;
inline constexpr double kPeriodYear = 8760.0;
inline constexpr std::array<double, 4> kPhases = {
    0.0, geo::kPi / 2.0, geo::kPi, 3.0 * geo::kPi / 2.0};

// Layout of the hypernetwork input z:
//   [day(4) | week(4) | year(4) | driver(10) | stand(10) | customer(10)]
inline constexpr std::size_t kTemporalDim = 4;
inline constexpr std::size_t kCategoryDim = 10;
inline constexpr std::size_t kZDim = 3 * kTemporalDim + 3 * kCategoryDim;  // 42

struct TimescaleMask {
    bool day = true;
    bool week = true;
    bool year = true;
};

struct ReferenceSet {
    std::vector<geo::GeoPoint> points;
    double min_sep_km = 0.1;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
};

// Draws reference points uniformly from all points of all trajectories,
// keeping a draw only when it is at least min_sep_km from every point
// already kept. Deterministic given the seed.
// Throws std::runtime_error naming the achieved count when n cannot be
// reached within max_draws attempts (default 10*n*100).
ReferenceSet sample_references(const std::vector<Trajectory>& corpus,
                               std::size_t n, double min_sep_km,
                               std::uint64_t seed, std::size_t max_draws = 0);

// CSV persistence: "index,lat,lon" with a header row.
void save_references(const std::string& path, const ReferenceSet& refs);
ReferenceSet load_references(const std::string& path);

// Digest over the serialized points; checkpoints embed it so a checkpoint
// cannot be evaluated against the wrong reference set.
std::uint64_t reference_digest(const ReferenceSet& refs);

// Softmax of negated Haversine distances (km) from p to every reference
// point. Sums to 1; largest weight at the nearest reference.
std::vector<double> soft_weights(const geo::GeoPoint& p, const ReferenceSet& refs);

// e = delta^T E. delta is data (no gradient to the GPS point); the result
// is linear in E, so dL/dE is the outer product delta * dL/de.
diff::Var soft_encode(diff::Tape& tape, const geo::GeoPoint& p,
                      const ReferenceSet& refs, const diff::Var& table);

// c(t) = sin(2*pi*t/C + phi_k) for the four phases; exactly periodic in C.
std::array<double, 4> temporal_encode(double t_hours, double period_hours);

// Maps raw categorical ids to embedding-table rows. Row 0 is "absent",
// row 1 is "unknown"; real ids start at row 2.
struct CategoricalVocab {
    std::map<int, std::size_t> index;

    static constexpr std::size_t kAbsentRow = 0;
    static constexpr std::size_t kUnknownRow = 1;

    std::size_t rows() const { return index.size() + 2; }
    // Absent -> row 0; unseen id -> row 1.
    std::size_t lookup(const std::optional<int>& id) const;
    // Builds from observed ids, collapsing those seen fewer than
    // min_occurrences times to "unknown".
    static CategoricalVocab build(const std::vector<int>& ids,
                                  std::size_t min_occurrences = 1);
};

struct CategoricalVocabs {
    CategoricalVocab driver;
    CategoricalVocab stand;
    CategoricalVocab customer;
};

// Vocabularies derived from a training corpus. Customers seen fewer than
// 50 times collapse to "unknown"; drivers and stands keep every id.
CategoricalVocabs build_vocabs(const std::vector<Trajectory>& corpus);

// Assembles z = [c_day | c_week | c_year | driver | stand | customer].
// Masked timescales contribute zero slots; the layout never changes.
diff::Var build_z(diff::Tape& tape, const MetadataRaw& meta,
                  const CategoricalVocabs& vocabs, const diff::Var& driver_table,
                  const diff::Var& stand_table, const diff::Var& customer_table,
                  const TimescaleMask& mask = {});

}  // namespace hyperdest::encode

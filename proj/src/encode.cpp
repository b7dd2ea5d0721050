#include "hyperdest/encode.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hyperdest::encode {

ReferenceSet sample_references(const std::vector<Trajectory>& corpus,
                               std::size_t n, double min_sep_km,
                               std::uint64_t seed, std::size_t max_draws) {
    std::vector<geo::GeoPoint> pool;
    for (const auto& t : corpus) {
        pool.insert(pool.end(), t.points.begin(), t.points.end());
    }
    if (pool.empty()) {
        throw std::runtime_error("sample_references: empty corpus");
    }
    if (max_draws == 0) max_draws = 10 * n * 100;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

    ReferenceSet refs;
    refs.min_sep_km = min_sep_km;
    refs.seed = seed;
    std::size_t draws = 0;
    while (refs.points.size() < n && draws < max_draws) {
        ++draws;
        const geo::GeoPoint cand = pool[pick(rng)];
        bool ok = true;
        for (const auto& kept : refs.points) {
            if (geo::haversine_km(cand, kept) < min_sep_km) {
                ok = false;
                break;
            }
        }
        if (ok) refs.points.push_back(cand);
    }
    if (refs.points.size() < n) {
        throw std::runtime_error(
            "sample_references: only reached " +
            std::to_string(refs.points.size()) + " of " + std::to_string(n) +
            " points after " + std::to_string(draws) + " draws");
    }
    return refs;
}

void save_references(const std::string& path, const ReferenceSet& refs) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "index,lat,lon\n";
    char buf[80];
    for (std::size_t i = 0; i < refs.points.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12f,%.12f\n", i,
                      refs.points[i].lat, refs.points[i].lon);
        f << buf;
    }
}

ReferenceSet load_references(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("index,lat,lon", 0) != 0) {
        throw std::runtime_error("reference csv: bad header in " + path);
    }
    ReferenceSet refs;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::size_t idx;
        double lat, lon;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &idx, &lat, &lon) != 3) {
            throw std::runtime_error("reference csv: bad row '" + line + "'");
        }
        refs.points.push_back({lat, lon});
    }
    return refs;
}

std::uint64_t reference_digest(const ReferenceSet& refs) {
    // FNV-1a over the fixed-format decimal rendering of every point.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const char* s) {
        for (; *s; ++s) {
            h ^= static_cast<unsigned char>(*s);
            h *= 1099511628211ULL;
        }
    };
    char buf[80];
    for (const auto& p : refs.points) {
        std::snprintf(buf, sizeof(buf), "%.12f,%.12f;", p.lat, p.lon);
        mix(buf);
    }
    return h;
}

std::vector<double> soft_weights(const geo::GeoPoint& p, const ReferenceSet& refs) {
    const std::size_t n = refs.size();
    if (n == 0) throw std::runtime_error("soft_weights: empty reference set");
    std::vector<double> w(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        w[j] = -geo::haversine_km(p, refs.points[j]);
        mx = std::max(mx, w[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        w[j] = std::exp(w[j] - mx);
        z += w[j];
    }
    for (auto& v : w) v /= z;
    return w;
}

diff::Var soft_encode(diff::Tape& tape, const geo::GeoPoint& p,
                      const ReferenceSet& refs, const diff::Var& table) {
    if (table->value.shape.size() != 2 || table->value.rows() != refs.size()) {
        throw std::invalid_argument(
            "soft_encode: table rows must equal reference count");
    }
    auto delta = diff::make_const(diff::Tensor::vector(soft_weights(p, refs)),
                                  "delta");
    return diff::vecmat(tape, delta, table);
}

std::array<double, 4> temporal_encode(double t_hours, double period_hours) {
    std::array<double, 4> out;
    const double base = 2.0 * geo::kPi / period_hours * t_hours;
    for (std::size_t k = 0; k < 4; ++k) {
        out[k] = std::sin(base + kPhases[k]);
    }
    return out;
}

std::size_t CategoricalVocab::lookup(const std::optional<int>& id) const {
    if (!id) return kAbsentRow;
    auto it = index.find(*id);
    return it == index.end() ? kUnknownRow : it->second;
}

CategoricalVocab CategoricalVocab::build(const std::vector<int>& ids,
                                         std::size_t min_occurrences) {
    std::map<int, std::size_t> counts;
    for (int id : ids) ++counts[id];
    CategoricalVocab v;
    std::size_t next = 2;
    for (const auto& [id, c] : counts) {
        if (c >= min_occurrences) v.index[id] = next++;
    }
    return v;
}

CategoricalVocabs build_vocabs(const std::vector<Trajectory>& corpus) {
    std::vector<int> drivers, stands, customers;
    for (const auto& t : corpus) {
        drivers.push_back(t.meta.taxi_id);
        if (t.meta.origin_stand) stands.push_back(*t.meta.origin_stand);
        if (t.meta.origin_call) customers.push_back(*t.meta.origin_call);
    }
    CategoricalVocabs v;
    v.driver = CategoricalVocab::build(drivers);
    v.stand = CategoricalVocab::build(stands);
    v.customer = CategoricalVocab::build(customers, 50);
    return v;
}

diff::Var build_z(diff::Tape& tape, const MetadataRaw& meta,
                  const CategoricalVocabs& vocabs, const diff::Var& driver_table,
                  const diff::Var& stand_table, const diff::Var& customer_table,
                  const TimescaleMask& mask) {
    const double t_hours = static_cast<double>(meta.timestamp) / 3600.0;
    std::vector<double> temporal(3 * kTemporalDim, 0.0);
    const std::array<std::pair<bool, double>, 3> scales = {
        {{mask.day, kPeriodDay}, {mask.week, kPeriodWeek}, {mask.year, kPeriodYear}}};
    for (std::size_t s = 0; s < 3; ++s) {
        if (!scales[s].first) continue;
        const auto c = temporal_encode(t_hours, scales[s].second);
        for (std::size_t k = 0; k < kTemporalDim; ++k) {
            temporal[s * kTemporalDim + k] = c[k];
        }
    }
    auto sinusoids =
        diff::make_const(diff::Tensor::vector(std::move(temporal)), "c(t)");
    auto drv = diff::row(tape, driver_table, vocabs.driver.lookup(meta.taxi_id));
    auto stn = diff::row(tape, stand_table, vocabs.stand.lookup(meta.origin_stand));
    auto cst =
        diff::row(tape, customer_table, vocabs.customer.lookup(meta.origin_call));
    return diff::concat(tape, {sinusoids, drv, stn, cst});
}

}  // namespace hyperdest::encode

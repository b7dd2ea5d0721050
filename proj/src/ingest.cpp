#include "hyperdest/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hyperdest::ingest {
namespace {

const char* kHeaderFields[9] = {"TRIP_ID",   "CALL_TYPE", "ORIGIN_CALL",
                                "ORIGIN_STAND", "TAXI_ID", "TIMESTAMP",
                                "DAY_TYPE",  "MISSING_DATA", "POLYLINE"};

// Splits one CSV line honoring double-quoted fields (commas inside quotes,
// doubled quotes as escapes).
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

// POLYLINE text is a bracketed list of [lon, lat] pairs. Longitude comes
// FIRST in the file; we store latitude first. Swapping these silently is
// the classic bug for this dataset.
std::vector<geo::GeoPoint> parse_polyline(const std::string& text) {
    std::vector<geo::GeoPoint> pts;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto expect = [&](char c) {
        skip_ws();
        if (i >= text.size() || text[i] != c) {
            throw std::runtime_error(std::string("POLYLINE: expected '") + c + "'");
        }
        ++i;
    };
    auto number = [&] {
        skip_ws();
        std::size_t end = i;
        while (end < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[end])) ||
                text[end] == '-' || text[end] == '+' || text[end] == '.' ||
                text[end] == 'e' || text[end] == 'E')) {
            ++end;
        }
        if (end == i) throw std::runtime_error("POLYLINE: expected number");
        const double v = std::stod(text.substr(i, end - i));
        i = end;
        return v;
    };

    expect('[');
    skip_ws();
    if (i < text.size() && text[i] == ']') {
        ++i;
        return pts;
    }
    while (true) {
        expect('[');
        const double lon = number();
        expect(',');
        const double lat = number();
        expect(']');
        pts.push_back({lat, lon});
        skip_ws();
        if (i < text.size() && text[i] == ',') {
            ++i;
            continue;
        }
        break;
    }
    expect(']');
    return pts;
}

std::optional<int> parse_optional_int(const std::string& s) {
    if (s.empty() || s == "NA") return std::nullopt;
    return std::stoi(s);
}

RawTrip parse_row(const std::vector<std::string>& f) {
    if (f.size() != 9) {
        throw std::runtime_error("expected 9 fields, got " +
                                 std::to_string(f.size()));
    }
    RawTrip t;
    t.trip_id = f[0];
    if (f[1].size() != 1 || (f[1][0] != 'A' && f[1][0] != 'B' && f[1][0] != 'C')) {
        throw std::runtime_error("bad CALL_TYPE '" + f[1] + "'");
    }
    t.call_type = f[1][0];
    t.origin_call = parse_optional_int(f[2]);
    t.origin_stand = parse_optional_int(f[3]);
    t.taxi_id = std::stoi(f[4]);
    t.timestamp = std::stoll(f[5]);
    if (t.timestamp <= 0) throw std::runtime_error("non-positive TIMESTAMP");
    if (f[6].size() != 1 || (f[6][0] != 'A' && f[6][0] != 'B' && f[6][0] != 'C')) {
        throw std::runtime_error("bad DAY_TYPE '" + f[6] + "'");
    }
    t.day_type = f[6][0];
    if (f[7] == "True" || f[7] == "TRUE" || f[7] == "true") {
        t.missing_data = true;
    } else if (f[7] == "False" || f[7] == "FALSE" || f[7] == "false") {
        t.missing_data = false;
    } else {
        throw std::runtime_error("bad MISSING_DATA '" + f[7] + "'");
    }
    t.polyline = parse_polyline(f[8]);
    for (const auto& p : t.polyline) {
        if (!geo::is_valid(p)) throw std::runtime_error("POLYLINE: point out of range");
    }
    return t;
}

}  // namespace

void parse_csv(std::istream& in, const std::function<void(RawTrip)>& on_trip,
               std::vector<RejectEntry>* rejects) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("csv: empty input, no header");
    }
    auto header = split_csv_line(line);
    if (header.size() != 9) {
        throw std::runtime_error("csv: header does not match Porto schema");
    }
    for (std::size_t i = 0; i < 9; ++i) {
        if (header[i] != kHeaderFields[i]) {
            throw std::runtime_error("csv: header field " + std::to_string(i) +
                                     " is '" + header[i] + "', expected '" +
                                     kHeaderFields[i] + "'");
        }
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        try {
            on_trip(parse_row(split_csv_line(line)));
        } catch (const std::exception& e) {
            if (rejects) rejects->push_back({row, e.what()});
        }
    }
}

std::vector<RawTrip> parse_csv_all(std::istream& in,
                                   std::vector<RejectEntry>* rejects) {
    std::vector<RawTrip> out;
    parse_csv(in, [&](RawTrip t) { out.push_back(std::move(t)); }, rejects);
    return out;
}

std::string csv_header() {
    std::string h;
    for (int i = 0; i < 9; ++i) {
        if (i) h += ',';
        h += '"';
        h += kHeaderFields[i];
        h += '"';
    }
    return h;
}

std::string to_csv_row(const RawTrip& trip) {
    std::ostringstream o;
    auto q = [&](const std::string& s) { o << '"' << s << '"'; };
    q(trip.trip_id);
    o << ',';
    q(std::string(1, trip.call_type));
    o << ',';
    q(trip.origin_call ? std::to_string(*trip.origin_call) : "");
    o << ',';
    q(trip.origin_stand ? std::to_string(*trip.origin_stand) : "");
    o << ',';
    q(std::to_string(trip.taxi_id));
    o << ',';
    q(std::to_string(trip.timestamp));
    o << ',';
    q(std::string(1, trip.day_type));
    o << ',';
    q(trip.missing_data ? "True" : "False");
    o << ',';
    std::string poly = "[";
    char buf[64];
    for (std::size_t i = 0; i < trip.polyline.size(); ++i) {
        if (i) poly += ',';
        std::snprintf(buf, sizeof(buf), "[%.10g,%.10g]", trip.polyline[i].lon,
                      trip.polyline[i].lat);
        poly += buf;
    }
    poly += ']';
    q(poly);
    return o.str();
}

void write_reject_log(std::ostream& out, const std::vector<RejectEntry>& rejects) {
    for (const auto& r : rejects) {
        out << r.row_number << '\t' << r.reason << '\n';
    }
}

std::optional<Trajectory> to_trajectory(const RawTrip& trip) {
    if (trip.missing_data || trip.polyline.empty()) return std::nullopt;
    Trajectory t;
    t.trip_id = trip.trip_id;
    t.points = trip.polyline;
    t.meta.timestamp = trip.timestamp;
    t.meta.taxi_id = trip.taxi_id;
    t.meta.origin_stand = trip.origin_stand;
    t.meta.origin_call = trip.origin_call;
    return t;
}

}  // namespace hyperdest::ingest

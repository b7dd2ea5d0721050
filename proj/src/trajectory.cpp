#include "hyperdest/trajectory.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyperdest {
namespace {

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10f", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

void write_corpus(std::ostream& out, const std::vector<Trajectory>& corpus,
                  const std::vector<std::string>& comments) {
    out << kCorpusMagic << '\n';
    for (const auto& c : comments) {
        out << "# " << c << '\n';
    }
    for (const auto& t : corpus) {
        out << t.trip_id << '\t' << t.meta.timestamp << '\t' << t.meta.taxi_id
            << '\t';
        if (t.meta.origin_stand) {
            out << *t.meta.origin_stand;
        } else {
            out << '-';
        }
        out << '\t';
        if (t.meta.origin_call) {
            out << *t.meta.origin_call;
        } else {
            out << '-';
        }
        out << '\t' << t.points.size() << '\t';
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            if (i) out << ';';
            out << format_coord(t.points[i].lat) << ','
                << format_coord(t.points[i].lon);
        }
        out << '\n';
    }
}

std::vector<Trajectory> read_corpus(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kCorpusMagic, 0) != 0) {
        throw std::runtime_error("corpus: missing '# hyperdest-corpus v1' header");
    }
    std::vector<Trajectory> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, '\t');
        if (fields.size() != 7) {
            throw std::runtime_error("corpus line " + std::to_string(lineno) +
                                     ": expected 7 fields, got " +
                                     std::to_string(fields.size()));
        }
        Trajectory t;
        t.trip_id = fields[0];
        t.meta.timestamp = std::stoll(fields[1]);
        t.meta.taxi_id = std::stoi(fields[2]);
        if (fields[3] != "-") t.meta.origin_stand = std::stoi(fields[3]);
        if (fields[4] != "-") t.meta.origin_call = std::stoi(fields[4]);
        const std::size_t n = std::stoul(fields[5]);
        if (!fields[6].empty()) {
            for (const auto& pair : split(fields[6], ';')) {
                auto xy = split(pair, ',');
                if (xy.size() != 2) {
                    throw std::runtime_error("corpus line " +
                                             std::to_string(lineno) +
                                             ": bad point '" + pair + "'");
                }
                t.points.push_back({std::stod(xy[0]), std::stod(xy[1])});
            }
        }
        if (t.points.size() != n) {
            throw std::runtime_error("corpus line " + std::to_string(lineno) +
                                     ": point count mismatch");
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_corpus(const std::string& path, const std::vector<Trajectory>& corpus,
                 const std::vector<std::string>& comments) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    write_corpus(f, corpus, comments);
}

std::vector<Trajectory> load_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return read_corpus(f);
}

}  // namespace hyperdest

#include "hyperdest/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hyperdest::eval {

std::size_t prefix_index(double q, std::size_t n) {
    const auto i = static_cast<std::size_t>(
        std::llround(q * static_cast<double>(n)));
    return std::max<std::size_t>(1, std::min(i, n));
}

EvalReport evaluate_predictor(const std::vector<Trajectory>& validation,
                              const Predictor& predict,
                              const std::string& label) {
    if (validation.empty()) {
        throw std::invalid_argument("evaluate: empty validation set");
    }
    EvalReport rep;
    rep.label = label;
    rep.count = validation.size();
    std::map<double, double> q_sums;
    for (double q : kPrefixFractions) q_sums[q] = 0.0;

    double mhd_sum = 0.0;
    for (const auto& traj : validation) {
        const std::size_t n = traj.points.size();
        const geo::GeoPoint dest = traj.points.back();
        double traj_sum = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            traj_sum += geo::haversine_km(predict(traj, i), dest);
        }
        mhd_sum += traj_sum / static_cast<double>(n);
        for (double q : kPrefixFractions) {
            const std::size_t i = prefix_index(q, n);
            q_sums[q] += geo::haversine_km(predict(traj, i), dest);
        }
    }
    rep.mhd_km = mhd_sum / static_cast<double>(validation.size());
    for (double q : kPrefixFractions) {
        rep.mhd_at[q] = q_sums[q] / static_cast<double>(validation.size());
    }
    return rep;
}

EvalReport evaluate(const model::ModelParams& params,
                    const encode::ReferenceSet& refs,
                    const encode::CategoricalVocabs& vocabs,
                    const std::vector<Trajectory>& validation,
                    const std::string& label) {
    if (validation.empty()) {
        throw std::invalid_argument("evaluate: empty validation set");
    }
    if (params.spec.n_ref != refs.size()) {
        throw std::invalid_argument("evaluate: reference set size mismatch");
    }
    auto ref_matrix = model::reference_matrix(refs);

    EvalReport rep;
    rep.label = label.empty() ? model::variant_name(params.spec.variant) : label;
    rep.count = validation.size();
    std::map<double, double> q_sums;
    for (double q : kPrefixFractions) q_sums[q] = 0.0;

    double mhd_sum = 0.0;
    for (const auto& traj : validation) {
        const std::size_t n = traj.points.size();
        const geo::GeoPoint dest = traj.points.back();

        std::vector<std::vector<double>> deltas;
        deltas.reserve(n);
        for (const auto& p : traj.points) {
            deltas.push_back(encode::soft_weights(p, refs));
        }
        diff::Tape tape;
        auto alphas =
            model::forward_trajectory(tape, params, deltas, traj.meta, vocabs);

        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto yhat = model::predict_point(tape, alphas[i], ref_matrix);
            dist[i] = geo::haversine_km(
                {yhat->value.data[0], yhat->value.data[1]}, dest);
        }
        double traj_sum = 0.0;
        for (double d : dist) traj_sum += d;
        mhd_sum += traj_sum / static_cast<double>(n);
        for (double q : kPrefixFractions) {
            q_sums[q] += dist[prefix_index(q, n) - 1];
        }
    }
    rep.mhd_km = mhd_sum / static_cast<double>(validation.size());
    for (double q : kPrefixFractions) {
        rep.mhd_at[q] = q_sums[q] / static_cast<double>(validation.size());
    }
    return rep;
}

namespace {

struct PublishedRow {
    const char* label;
    double mhd;
    double at[5];  // q = 0.1 .. 0.9; NaN marks "not published"
};

// Porto-scale numbers quoted from the literature for context only.
const PublishedRow kPublished[] = {
    {"pre-LSTM (published, not reproduced)", 1.354, {2.482, 1.844, 1.225, 0.729, 0.394}},
    {"hyper-LSTM (published, not reproduced)", 1.320, {2.459, 1.825, 1.214, 0.691, 0.334}},
    {"post-LSTM (published, not reproduced)", 1.317, {2.429, 1.800, 1.195, 0.678, 0.335}},
    {"concatenation (published, not reproduced)", 1.432, {NAN, NAN, NAN, NAN, NAN}},
    {"no metadata (published, not reproduced)", 1.382, {NAN, NAN, NAN, NAN, NAN}},
};

std::string fmt_cell(double v) {
    if (std::isnan(v)) return "     -";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%6.3f", v);
    return buf;
}

}  // namespace

std::string compare(const std::vector<EvalReport>& reports,
                    bool include_published) {
    std::ostringstream o;
    char head[160];
    std::snprintf(head, sizeof(head), "%-44s %6s %9s %9s %9s %9s %9s\n",
                  "model", "MHD", "MHD_0.1", "MHD_0.3", "MHD_0.5", "MHD_0.7",
                  "MHD_0.9");
    o << head;
    auto row = [&](const std::string& label, double mhd, const double* at) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-44s ", label.c_str());
        o << buf << fmt_cell(mhd);
        for (int i = 0; i < 5; ++i) o << "   " << fmt_cell(at[i]);
        o << '\n';
    };
    for (const auto& r : reports) {
        double at[5];
        int i = 0;
        for (double q : kPrefixFractions) {
            auto it = r.mhd_at.find(q);
            at[i++] = it == r.mhd_at.end() ? NAN : it->second;
        }
        row(r.label, r.mhd_km, at);
    }
    if (include_published) {
        for (const auto& p : kPublished) row(p.label, p.mhd, p.at);
    }
    return o.str();
}

std::string report_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream o;
    o << "label,count,mhd_km,mhd_0.1,mhd_0.3,mhd_0.5,mhd_0.7,mhd_0.9\n";
    char buf[64];
    for (const auto& r : reports) {
        o << r.label << ',' << r.count;
        std::snprintf(buf, sizeof(buf), ",%.9f", r.mhd_km);
        o << buf;
        for (double q : kPrefixFractions) {
            std::snprintf(buf, sizeof(buf), ",%.9f", r.mhd_at.at(q));
            o << buf;
        }
        o << '\n';
    }
    return o.str();
}

EvalReport parse_report_csv_row(const std::string& line) {
    std::istringstream in(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
        throw std::runtime_error("report csv: expected 8 fields, got " +
                                 std::to_string(fields.size()));
    }
    EvalReport r;
    r.label = fields[0];
    r.count = std::stoul(fields[1]);
    r.mhd_km = std::stod(fields[2]);
    for (std::size_t i = 0; i < kPrefixFractions.size(); ++i) {
        r.mhd_at[kPrefixFractions[i]] = std::stod(fields[3 + i]);
    }
    return r;
}

}  // namespace hyperdest::eval

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hyperdest/model.hpp"

namespace hyperdest::eval {

inline const std::vector<double> kPrefixFractions = {0.1, 0.3, 0.5, 0.7, 0.9};

struct EvalReport {
    std::string label;
    double mhd_km = 0.0;
    std::map<double, double> mhd_at;  // q -> km
    std::size_t count = 0;
};

// Prefix index used for MHD_q: i = max(1, round(q * N)), 1-based.
std::size_t prefix_index(double q, std::size_t n);

// A predictor maps (trajectory, prefix length) to a predicted destination.
using Predictor =
    std::function<geo::GeoPoint(const Trajectory&, std::size_t prefix_len)>;

// MHD = mean over trajectories of the per-trajectory mean prefix distance
// (the training objective averaged over the validation set); MHD_q takes a
// single prediction per trajectory at the q-fraction prefix.
// Throws std::invalid_argument on an empty validation set.
EvalReport evaluate_predictor(const std::vector<Trajectory>& validation,
                              const Predictor& predict,
                              const std::string& label = "");

// Evaluates trained model parameters. Deterministic and side-effect free;
// repeated calls give bit-identical reports.
EvalReport evaluate(const model::ModelParams& params,
                    const encode::ReferenceSet& refs,
                    const encode::CategoricalVocabs& vocabs,
                    const std::vector<Trajectory>& validation,
                    const std::string& label = "");

// Aligned text table of reports, followed by static rows quoting published
// results for context (marked "published, not reproduced").
std::string compare(const std::vector<EvalReport>& reports,
                    bool include_published = true);

// CSV: label,count,mhd_km,mhd_0.1,...,mhd_0.9
std::string report_csv(const std::vector<EvalReport>& reports);
EvalReport parse_report_csv_row(const std::string& line);

}  // namespace hyperdest::eval

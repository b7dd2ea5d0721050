#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyperdest/diffcore.hpp"
#include "hyperdest/encode.hpp"

namespace hyperdest::model {

enum class Variant {
    pre_lstm,
    hyper_lstm,
    post_lstm,
    concat_baseline,
    naive_baseline,
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws on unknown

struct ModelSpec {
    Variant variant = Variant::post_lstm;
    std::size_t embed_dim = 16;   // m
    std::size_t hidden = 64;
    std::size_t penult = 128;
    std::size_t n_ref = 4096;
    encode::TimescaleMask mask;
};

// Gate order: input, forget, cell, output.
struct LstmWeights {
    std::array<diff::Var, 4> wx;  // hidden x in
    std::array<diff::Var, 4> wh;  // hidden x hidden
    std::array<diff::Var, 4> b;   // hidden
};

// One block of a hyper-generated parameter set: either a weight matrix
// (rows of which pass through weight normalization) or a raw bias vector.
struct ThetaBlock {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;  // 0 marks a bias vector of length `rows`
    bool is_matrix() const { return cols != 0; }
};

// Hypernetwork h: z -> theta, a single linear map A z + c. g holds one
// learned scale per generated matrix row; biases are not normalized.
struct HyperLayer {
    std::vector<ThetaBlock> layout;
    diff::Var a;  // theta_dim x z_dim
    diff::Var c;  // theta_dim
    diff::Var g;  // total matrix rows across layout
};

std::size_t theta_size(const std::vector<ThetaBlock>& layout);
std::size_t theta_matrix_rows(const std::vector<ThetaBlock>& layout);

// theta = A z + c, sliced per block; every matrix row is replaced by
// weight_norm(row, g_row) so its norm equals |g_row|.
// Throws when a generated row direction is degenerate (all-zero).
std::vector<diff::Var> generate_params(diff::Tape& tape, const HyperLayer& hl,
                                       const diff::Var& z);

struct ModelParams {
    ModelSpec spec;
    diff::Var e_ref;  // n_ref x m
    diff::Var driver_table, stand_table, customer_table;
    std::optional<LstmWeights> lstm;    // absent for hyper_lstm
    diff::Var mid_w, mid_b;             // concat/naive mid layer only
    diff::Var head1_w, head1_b;         // hidden -> penult
    diff::Var head2_w, head2_b;         // penult -> n_ref
    std::optional<HyperLayer> hyper;    // pre/hyper/post variants

    // Stable-ordered (name, tensor) view over every learnable parameter.
    std::vector<std::pair<std::string, diff::Var>> learnable() const;
};

// Fresh parameters at small random init; deterministic given seed.
ModelParams init_params(const ModelSpec& spec, std::size_t driver_rows,
                        std::size_t stand_rows, std::size_t customer_rows,
                        std::uint64_t seed);

// One LSTM step; returns (h', c').
std::pair<diff::Var, diff::Var> lstm_step(diff::Tape& tape,
                                          const LstmWeights& w,
                                          const diff::Var& x,
                                          const diff::Var& h,
                                          const diff::Var& c);

// Runs a trajectory through the selected architecture. deltas[i] is the
// soft-encoding weight vector for point i (length n_ref). Returns one
// softmax vector alpha per step.
std::vector<diff::Var> forward_trajectory(
    diff::Tape& tape, const ModelParams& params,
    const std::vector<std::vector<double>>& deltas, const MetadataRaw& meta,
    const encode::CategoricalVocabs& vocabs);

// Constant n_ref x 2 matrix of reference coordinates (lat, lon).
diff::Var reference_matrix(const encode::ReferenceSet& refs);

// y_hat = sum_j alpha_j p_ref_j, componentwise over (lat, lon).
diff::Var predict_point(diff::Tape& tape, const diff::Var& alpha,
                        const diff::Var& ref_matrix);

// Differentiable Haversine distance (km) from a predicted (lat, lon)
// pair to a fixed target. Falls back to the small-angle expansion when
// the points nearly coincide so the gradient stays finite.
diff::Var haversine_loss_km(diff::Tape& tape, const diff::Var& yhat,
                            const geo::GeoPoint& target);

// L = (1/N) sum_i d_H(y_hat_i, p_N)
diff::Var trajectory_loss(diff::Tape& tape, const std::vector<diff::Var>& alphas,
                          const diff::Var& ref_matrix, const geo::GeoPoint& dest);

}  // namespace hyperdest::model

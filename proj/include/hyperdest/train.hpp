#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hyperdest/model.hpp"

namespace hyperdest::train {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    model::ModelSpec spec;
};

class AdamOptimizer {
public:
    AdamOptimizer(std::vector<std::pair<std::string, diff::Var>> params,
                  const TrainConfig& cfg);

    // Clips the global gradient norm to cfg.clip_norm, applies one update,
    // then zeroes all gradients.
    void step();

    std::int64_t step_count() const { return t_; }
    // Exposed for checkpointing.
    const std::vector<std::pair<std::string, diff::Var>>& params() const {
        return params_;
    }
    std::vector<diff::Tensor>& moment1() { return m_; }
    std::vector<diff::Tensor>& moment2() { return v_; }
    std::int64_t& step_count_mut() { return t_; }

private:
    std::vector<std::pair<std::string, diff::Var>> params_;
    std::vector<diff::Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_, clip_;
    std::int64_t t_ = 0;
};

// Global L2 norm across all parameter gradients; scales them down when the
// norm exceeds max_norm.
double clip_gradients(const std::vector<std::pair<std::string, diff::Var>>& params,
                      double max_norm);

// Padded batch of trajectories. delta holds soft-encoding weights for
// every (trajectory, step); padded steps have an all-zero delta row and a
// false mask entry, and contribute neither loss nor gradient.
struct PaddedBatch {
    std::size_t batch = 0;
    std::size_t max_len = 0;
    std::size_t n_ref = 0;
    std::vector<std::vector<std::vector<double>>> delta;  // [b][step][n_ref]
    std::vector<std::vector<bool>> mask;                  // [b][step]
    std::vector<geo::GeoPoint> dest;                      // [b]
    std::vector<MetadataRaw> meta;                        // [b]
};

PaddedBatch pad_and_mask(const std::vector<const Trajectory*>& batch,
                         const encode::ReferenceSet& refs);

// Batch loss: mean over trajectories of the per-trajectory mean prefix
// loss, honoring the mask.
diff::Var batch_loss(diff::Tape& tape, const model::ModelParams& params,
                     const PaddedBatch& batch, const diff::Var& ref_matrix,
                     const encode::CategoricalVocabs& vocabs);

struct LossLogEntry {
    std::size_t epoch;
    std::size_t step;
    double loss_km;
};

struct TrainResult {
    model::ModelParams params;
    std::vector<LossLogEntry> log;
    std::vector<double> epoch_mean_loss;
};

// Full-sequence training over the corpus; deterministic given cfg.seed.
// Throws std::runtime_error naming the step if the loss goes non-finite.
TrainResult train(const std::vector<Trajectory>& corpus,
                  const encode::ReferenceSet& refs,
                  const encode::CategoricalVocabs& vocabs,
                  const TrainConfig& cfg);

void write_loss_log(std::ostream& out, const std::vector<LossLogEntry>& log);

// Seeded shuffle split: 10,000 validation trajectories when the corpus has
// at least 20,000, otherwise 10% (at least 1).
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_corpus(
    const std::vector<Trajectory>& corpus, std::uint64_t seed);

// --- checkpoint ---------------------------------------------------------
// Single binary file: magic, version, reference digest, config echo,
// named f64 tensor blocks for parameters and Adam state.
struct Checkpoint {
    TrainConfig config;
    std::uint64_t reference_digest = 0;
    std::string config_echo;
    std::int64_t adam_step = 0;
    std::vector<std::pair<std::string, diff::Tensor>> tensors;      // params
    std::vector<std::pair<std::string, diff::Tensor>> adam_m, adam_v;
    std::size_t driver_rows = 0, stand_rows = 0, customer_rows = 0;
    std::vector<std::pair<int, std::size_t>> driver_vocab, stand_vocab,
        customer_vocab;
};

Checkpoint make_checkpoint(const model::ModelParams& params,
                           const AdamOptimizer& opt, const TrainConfig& cfg,
                           const encode::ReferenceSet& refs,
                           const encode::CategoricalVocabs& vocabs);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws on truncation, bad magic or version.
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds model parameters (and vocabularies) from a checkpoint.
// Throws when the digest does not match the supplied reference set.
std::pair<model::ModelParams, encode::CategoricalVocabs> restore_model(
    const Checkpoint& ckpt, const encode::ReferenceSet& refs);

}  // namespace hyperdest::train

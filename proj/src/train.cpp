#include "hyperdest/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hyperdest::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, Var>> params,
                             const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      clip_(cfg.clip_norm) {
    for (const auto& [name, p] : params_) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

double clip_gradients(const std::vector<std::pair<std::string, Var>>& params,
                      double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : params) {
        for (double g : p->grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (const auto& [name, p] : params) {
            for (auto& g : p->grad.data) g *= s;
        }
    }
    return norm;
}

void AdamOptimizer::step() {
    clip_gradients(params_, clip_);
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i].second;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data[j];
            m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
            v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i].data[j] / bc1;
            const double vhat = v_[i].data[j] / bc2;
            p.value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        p.zero_grad();
    }
}

PaddedBatch pad_and_mask(const std::vector<const Trajectory*>& batch,
                         const encode::ReferenceSet& refs) {
    PaddedBatch pb;
    pb.batch = batch.size();
    pb.n_ref = refs.size();
    for (const auto* t : batch) {
        pb.max_len = std::max(pb.max_len, t->points.size());
    }
    for (const auto* t : batch) {
        std::vector<std::vector<double>> rows;
        std::vector<bool> mask;
        rows.reserve(pb.max_len);
        for (const auto& p : t->points) {
            rows.push_back(encode::soft_weights(p, refs));
            mask.push_back(true);
        }
        while (rows.size() < pb.max_len) {
            rows.emplace_back(pb.n_ref, 0.0);
            mask.push_back(false);
        }
        pb.delta.push_back(std::move(rows));
        pb.mask.push_back(std::move(mask));
        pb.dest.push_back(t->points.back());
        pb.meta.push_back(t->meta);
    }
    return pb;
}

Var batch_loss(Tape& tape, const model::ModelParams& params,
               const PaddedBatch& batch, const Var& ref_matrix,
               const encode::CategoricalVocabs& vocabs) {
    if (batch.batch == 0) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<Var> per_traj;
    for (std::size_t b = 0; b < batch.batch; ++b) {
        // Only real steps enter the forward pass; padded rows are skipped
        // entirely, which is exactly "zero loss and zero gradient".
        std::vector<std::vector<double>> real;
        for (std::size_t s = 0; s < batch.max_len; ++s) {
            if (batch.mask[b][s]) real.push_back(batch.delta[b][s]);
        }
        auto alphas =
            model::forward_trajectory(tape, params, real, batch.meta[b], vocabs);
        auto loss = model::trajectory_loss(tape, alphas, ref_matrix, batch.dest[b]);
        per_traj.push_back(diff::reshape(tape, loss, {1}));
    }
    return diff::mean(tape, diff::concat(tape, per_traj));
}

TrainResult train(const std::vector<Trajectory>& corpus,
                  const encode::ReferenceSet& refs,
                  const encode::CategoricalVocabs& vocabs,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.learning_rate < 0.0) {
        throw std::invalid_argument("train: negative learning rate");
    }
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
    model::ModelSpec spec = cfg.spec;
    if (spec.n_ref != refs.size()) {
        throw std::invalid_argument("train: spec.n_ref does not match reference set");
    }

    TrainResult res;
    res.params = model::init_params(spec, vocabs.driver.rows(),
                                    vocabs.stand.rows(), vocabs.customer.rows(),
                                    cfg.seed);
    AdamOptimizer opt(res.params.learnable(), cfg);
    auto ref_matrix = model::reference_matrix(refs);

    // Soft-encoding weights depend only on geometry; compute once.
    std::vector<PaddedBatch> batches;
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        std::size_t epoch_batches = 0;
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + cfg.batch_size);
            std::vector<const Trajectory*> chunk;
            for (std::size_t i = start; i < end; ++i) {
                chunk.push_back(&corpus[order[i]]);
            }
            Tape tape;
            auto loss = batch_loss(tape, res.params,
                                   pad_and_mask(chunk, refs), ref_matrix, vocabs);
            const double loss_km = loss->value.data[0];
            if (!std::isfinite(loss_km)) {
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) +
                    " step " + std::to_string(step));
            }
            tape.backward(loss);
            opt.step();
            res.log.push_back({epoch, step, loss_km});
            epoch_sum += loss_km;
            ++epoch_batches;
            ++step;
        }
        res.epoch_mean_loss.push_back(epoch_sum /
                                      static_cast<double>(epoch_batches));
    }
    return res;
}

void write_loss_log(std::ostream& out, const std::vector<LossLogEntry>& log) {
    out << "epoch,step,loss_km\n";
    char buf[96];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9f\n", e.epoch, e.step,
                      e.loss_km);
        out << buf;
    }
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_corpus(
    const std::vector<Trajectory>& corpus, std::uint64_t seed) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t held;
    if (corpus.size() >= 20000) {
        held = 10000;
    } else {
        held = std::max<std::size_t>(1, corpus.size() / 10);
    }
    std::vector<Trajectory> train_set, val_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < held) {
            val_set.push_back(corpus[order[i]]);
        } else {
            train_set.push_back(corpus[order[i]]);
        }
    }
    return {std::move(train_set), std::move(val_set)};
}

// --- checkpoint I/O -----------------------------------------------------
namespace {

constexpr char kMagic[8] = {'H', 'D', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& o, std::uint32_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& o, std::uint64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_i64(std::ostream& o, std::int64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ostream& o, double v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_str(std::ostream& o, const std::string& s) {
    put_u64(o, s.size());
    o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_tensor(std::ostream& o, const std::string& name, const Tensor& t) {
    put_str(o, name);
    put_u64(o, t.shape.size());
    for (auto d : t.shape) put_u64(o, d);
    for (double v : t.data) put_f64(o, v);
}

struct Reader {
    std::istream& in;
    void fail() const { throw std::runtime_error("checkpoint: truncated or corrupt file"); }
    std::uint32_t u32() {
        std::uint32_t v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) fail();
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) fail();
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) fail();
        return v;
    }
    double f64() {
        double v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) fail();
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > (1ULL << 32)) fail();
        std::string s(n, '\0');
        if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) fail();
        return s;
    }
    std::pair<std::string, Tensor> tensor() {
        auto name = str();
        const std::uint64_t nd = u64();
        if (nd > 8) fail();
        std::vector<std::size_t> shape(nd);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = u64();
            total *= d;
        }
        if (total > (1ULL << 28)) fail();
        Tensor t{shape};
        for (auto& v : t.data) v = f64();
        return {std::move(name), std::move(t)};
    }
};

void put_vocab(std::ostream& o, const std::vector<std::pair<int, std::size_t>>& v) {
    put_u64(o, v.size());
    for (const auto& [id, row] : v) {
        put_i64(o, id);
        put_u64(o, row);
    }
}

std::vector<std::pair<int, std::size_t>> read_vocab(Reader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1ULL << 24)) r.fail();
    std::vector<std::pair<int, std::size_t>> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto id = static_cast<int>(r.i64());
        const auto row = static_cast<std::size_t>(r.u64());
        v.emplace_back(id, row);
    }
    return v;
}

std::vector<std::pair<int, std::size_t>> vocab_pairs(
    const encode::CategoricalVocab& v) {
    return {v.index.begin(), v.index.end()};
}

}  // namespace

Checkpoint make_checkpoint(const model::ModelParams& params,
                           const AdamOptimizer& opt, const TrainConfig& cfg,
                           const encode::ReferenceSet& refs,
                           const encode::CategoricalVocabs& vocabs) {
    Checkpoint c;
    c.config = cfg;
    c.reference_digest = encode::reference_digest(refs);
    std::ostringstream echo;
    echo << "variant=" << model::variant_name(cfg.spec.variant)
         << " n_ref=" << cfg.spec.n_ref << " m=" << cfg.spec.embed_dim
         << " hidden=" << cfg.spec.hidden << " penult=" << cfg.spec.penult
         << " epochs=" << cfg.epochs << " batch=" << cfg.batch_size
         << " lr=" << cfg.learning_rate << " seed=" << cfg.seed
         << " timescales=" << (cfg.spec.mask.day ? "day," : "")
         << (cfg.spec.mask.week ? "week," : "")
         << (cfg.spec.mask.year ? "year" : "");
    c.config_echo = echo.str();
    c.adam_step = opt.step_count();
    for (const auto& [name, p] : params.learnable()) {
        c.tensors.emplace_back(name, p->value);
    }
    auto& m = const_cast<AdamOptimizer&>(opt).moment1();
    auto& v = const_cast<AdamOptimizer&>(opt).moment2();
    const auto& plist = opt.params();
    for (std::size_t i = 0; i < plist.size(); ++i) {
        c.adam_m.emplace_back(plist[i].first, m[i]);
        c.adam_v.emplace_back(plist[i].first, v[i]);
    }
    c.driver_rows = vocabs.driver.rows();
    c.stand_rows = vocabs.stand.rows();
    c.customer_rows = vocabs.customer.rows();
    c.driver_vocab = vocab_pairs(vocabs.driver);
    c.stand_vocab = vocab_pairs(vocabs.stand);
    c.customer_vocab = vocab_pairs(vocabs.customer);
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(kMagic, sizeof(kMagic));
    put_u32(f, kVersion);
    put_u64(f, c.reference_digest);
    put_str(f, c.config_echo);
    // config
    put_u64(f, c.config.epochs);
    put_u64(f, c.config.batch_size);
    put_f64(f, c.config.learning_rate);
    put_f64(f, c.config.beta1);
    put_f64(f, c.config.beta2);
    put_f64(f, c.config.adam_eps);
    put_f64(f, c.config.clip_norm);
    put_u64(f, c.config.seed);
    put_str(f, model::variant_name(c.config.spec.variant));
    put_u64(f, c.config.spec.embed_dim);
    put_u64(f, c.config.spec.hidden);
    put_u64(f, c.config.spec.penult);
    put_u64(f, c.config.spec.n_ref);
    put_u32(f, (c.config.spec.mask.day ? 1u : 0u) |
                   (c.config.spec.mask.week ? 2u : 0u) |
                   (c.config.spec.mask.year ? 4u : 0u));
    put_u64(f, c.driver_rows);
    put_u64(f, c.stand_rows);
    put_u64(f, c.customer_rows);
    put_vocab(f, c.driver_vocab);
    put_vocab(f, c.stand_vocab);
    put_vocab(f, c.customer_vocab);
    put_i64(f, c.adam_step);
    put_u64(f, c.tensors.size());
    for (const auto& [name, t] : c.tensors) put_tensor(f, name, t);
    put_u64(f, c.adam_m.size());
    for (const auto& [name, t] : c.adam_m) put_tensor(f, name, t);
    put_u64(f, c.adam_v.size());
    for (const auto& [name, t] : c.adam_v) put_tensor(f, name, t);
    if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    if (!f.read(magic, sizeof(magic)) ||
        !std::equal(magic, magic + 8, kMagic)) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    Reader r{f};
    if (r.u32() != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    }
    Checkpoint c;
    c.reference_digest = r.u64();
    c.config_echo = r.str();
    c.config.epochs = r.u64();
    c.config.batch_size = r.u64();
    c.config.learning_rate = r.f64();
    c.config.beta1 = r.f64();
    c.config.beta2 = r.f64();
    c.config.adam_eps = r.f64();
    c.config.clip_norm = r.f64();
    c.config.seed = r.u64();
    c.config.spec.variant = model::variant_from_name(r.str());
    c.config.spec.embed_dim = r.u64();
    c.config.spec.hidden = r.u64();
    c.config.spec.penult = r.u64();
    c.config.spec.n_ref = r.u64();
    const std::uint32_t maskbits = r.u32();
    c.config.spec.mask = {(maskbits & 1u) != 0, (maskbits & 2u) != 0,
                          (maskbits & 4u) != 0};
    c.driver_rows = r.u64();
    c.stand_rows = r.u64();
    c.customer_rows = r.u64();
    c.driver_vocab = read_vocab(r);
    c.stand_vocab = read_vocab(r);
    c.customer_vocab = read_vocab(r);
    c.adam_step = r.i64();
    const std::uint64_t nt = r.u64();
    for (std::uint64_t i = 0; i < nt; ++i) c.tensors.push_back(r.tensor());
    const std::uint64_t nm = r.u64();
    for (std::uint64_t i = 0; i < nm; ++i) c.adam_m.push_back(r.tensor());
    const std::uint64_t nv = r.u64();
    for (std::uint64_t i = 0; i < nv; ++i) c.adam_v.push_back(r.tensor());
    return c;
}

std::pair<model::ModelParams, encode::CategoricalVocabs> restore_model(
    const Checkpoint& ckpt, const encode::ReferenceSet& refs) {
    if (encode::reference_digest(refs) != ckpt.reference_digest) {
        throw std::runtime_error(
            "checkpoint: reference-set digest mismatch (was this checkpoint "
            "trained with a different refs file?)");
    }
    encode::CategoricalVocabs vocabs;
    for (const auto& [id, row] : ckpt.driver_vocab) vocabs.driver.index[id] = row;
    for (const auto& [id, row] : ckpt.stand_vocab) vocabs.stand.index[id] = row;
    for (const auto& [id, row] : ckpt.customer_vocab)
        vocabs.customer.index[id] = row;

    auto params = model::init_params(ckpt.config.spec, ckpt.driver_rows,
                                     ckpt.stand_rows, ckpt.customer_rows,
                                     ckpt.config.seed);
    std::map<std::string, Tensor> by_name(ckpt.tensors.begin(),
                                          ckpt.tensors.end());
    for (auto& [name, p] : params.learnable()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        }
        if (it->second.shape != p->value.shape) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name +
                                     "'");
        }
        p->value = it->second;
        p->zero_grad();
    }
    return {std::move(params), std::move(vocabs)};
}

}  // namespace hyperdest::train

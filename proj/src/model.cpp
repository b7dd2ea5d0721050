#include "hyperdest/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace hyperdest::model {

using diff::Tape;
using diff::Tensor;
using diff::Var;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::pre_lstm: return "pre-lstm";
        case Variant::hyper_lstm: return "hyper-lstm";
        case Variant::post_lstm: return "post-lstm";
        case Variant::concat_baseline: return "concat";
        case Variant::naive_baseline: return "naive";
    }
    throw std::logic_error("variant_name: bad enum");
}

Variant variant_from_name(const std::string& name) {
    if (name == "pre-lstm") return Variant::pre_lstm;
    if (name == "hyper-lstm") return Variant::hyper_lstm;
    if (name == "post-lstm") return Variant::post_lstm;
    if (name == "concat") return Variant::concat_baseline;
    if (name == "naive") return Variant::naive_baseline;
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected pre-lstm, hyper-lstm, post-lstm, "
                                "concat or naive)");
}

std::size_t theta_size(const std::vector<ThetaBlock>& layout) {
    std::size_t n = 0;
    for (const auto& b : layout) n += b.rows * (b.is_matrix() ? b.cols : 1);
    return n;
}

std::size_t theta_matrix_rows(const std::vector<ThetaBlock>& layout) {
    std::size_t n = 0;
    for (const auto& b : layout) {
        if (b.is_matrix()) n += b.rows;
    }
    return n;
}

std::vector<Var> generate_params(Tape& tape, const HyperLayer& hl, const Var& z) {
    auto theta = diff::add(tape, diff::matmul(tape, hl.a, z), hl.c);
    std::vector<Var> out;
    std::size_t off = 0;
    std::size_t g_off = 0;
    for (const auto& blk : hl.layout) {
        if (blk.is_matrix()) {
            auto flat = diff::slice(tape, theta, off, off + blk.rows * blk.cols);
            auto mat = diff::reshape(tape, flat, {blk.rows, blk.cols});
            auto g = diff::slice(tape, hl.g, g_off, g_off + blk.rows);
            out.push_back(diff::weight_norm_rows(tape, mat, g));
            off += blk.rows * blk.cols;
            g_off += blk.rows;
        } else {
            out.push_back(diff::slice(tape, theta, off, off + blk.rows));
            off += blk.rows;
        }
    }
    return out;
}

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi,
                      std::mt19937_64& rng) {
    Tensor t{std::move(shape)};
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.data) v = d(rng);
    return t;
}

Var init_linear_w(std::size_t out, std::size_t in, std::mt19937_64& rng,
                  const std::string& name) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return diff::make_param(uniform_tensor({out, in}, -bound, bound, rng), name);
}

Var init_bias(std::size_t out, const std::string& name) {
    return diff::make_param(Tensor{std::vector<std::size_t>{out}}, name);
}

LstmWeights init_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    static const char* gate[4] = {"i", "f", "g", "o"};
    LstmWeights w;
    for (int k = 0; k < 4; ++k) {
        w.wx[k] = init_linear_w(hidden, in, rng, std::string("lstm.wx_") + gate[k]);
        w.wh[k] = init_linear_w(hidden, hidden, rng,
                                std::string("lstm.wh_") + gate[k]);
        w.b[k] = init_bias(hidden, std::string("lstm.b_") + gate[k]);
    }
    return w;
}

std::vector<ThetaBlock> hyper_layout(const ModelSpec& spec) {
    const std::size_t m = spec.embed_dim, h = spec.hidden;
    switch (spec.variant) {
        case Variant::pre_lstm:
            return {{"pre.w", h, m}, {"pre.b", h, 0}};
        case Variant::post_lstm:
            return {{"post.w", h, h}, {"post.b", h, 0}};
        case Variant::hyper_lstm: {
            std::vector<ThetaBlock> layout;
            static const char* gate[4] = {"i", "f", "g", "o"};
            for (int k = 0; k < 4; ++k) {
                layout.push_back({std::string("lstm.wx_") + gate[k], h, m});
                layout.push_back({std::string("lstm.wh_") + gate[k], h, h});
                layout.push_back({std::string("lstm.b_") + gate[k], h, 0});
            }
            return layout;
        }
        default:
            return {};
    }
}

}  // namespace

std::vector<std::pair<std::string, Var>> ModelParams::learnable() const {
    std::vector<std::pair<std::string, Var>> out;
    auto push = [&](const Var& v) {
        if (v) out.emplace_back(v->name, v);
    };
    push(e_ref);
    push(driver_table);
    push(stand_table);
    push(customer_table);
    if (lstm) {
        for (int k = 0; k < 4; ++k) {
            push(lstm->wx[k]);
            push(lstm->wh[k]);
            push(lstm->b[k]);
        }
    }
    push(mid_w);
    push(mid_b);
    push(head1_w);
    push(head1_b);
    push(head2_w);
    push(head2_b);
    if (hyper) {
        push(hyper->a);
        push(hyper->c);
        push(hyper->g);
    }
    return out;
}

ModelParams init_params(const ModelSpec& spec, std::size_t driver_rows,
                        std::size_t stand_rows, std::size_t customer_rows,
                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.spec = spec;
    const std::size_t m = spec.embed_dim, h = spec.hidden;

    p.e_ref = diff::make_param(
        uniform_tensor({spec.n_ref, m}, -0.05, 0.05, rng), "e_ref");
    p.driver_table = diff::make_param(
        uniform_tensor({driver_rows, encode::kCategoryDim}, -0.05, 0.05, rng),
        "driver_table");
    p.stand_table = diff::make_param(
        uniform_tensor({stand_rows, encode::kCategoryDim}, -0.05, 0.05, rng),
        "stand_table");
    p.customer_table = diff::make_param(
        uniform_tensor({customer_rows, encode::kCategoryDim}, -0.05, 0.05, rng),
        "customer_table");

    switch (spec.variant) {
        case Variant::pre_lstm:
            p.lstm = init_lstm(h, h, rng);  // hyper linear feeds hidden-dim input
            break;
        case Variant::hyper_lstm:
            break;  // the whole LSTM is generated
        case Variant::post_lstm:
            p.lstm = init_lstm(m, h, rng);
            break;
        case Variant::concat_baseline:
            p.lstm = init_lstm(m, h, rng);
            p.mid_w = init_linear_w(h, h + encode::kZDim, rng, "mid.w");
            p.mid_b = init_bias(h, "mid.b");
            break;
        case Variant::naive_baseline:
            p.lstm = init_lstm(m, h, rng);
            p.mid_w = init_linear_w(h, h, rng, "mid.w");
            p.mid_b = init_bias(h, "mid.b");
            break;
    }

    p.head1_w = init_linear_w(spec.penult, h, rng, "head1.w");
    p.head1_b = init_bias(spec.penult, "head1.b");
    p.head2_w = init_linear_w(spec.n_ref, spec.penult, rng, "head2.w");
    p.head2_b = init_bias(spec.n_ref, "head2.b");

    auto layout = hyper_layout(spec);
    if (!layout.empty()) {
        HyperLayer hl;
        hl.layout = layout;
        const std::size_t td = theta_size(layout);
        hl.a = diff::make_param(
            uniform_tensor({td, encode::kZDim}, -0.05, 0.05, rng), "hyper.a");
        // Constant offset keeps generated row directions non-degenerate at
        // step 0 even if z is all-zero.
        Tensor c{std::vector<std::size_t>{td}};
        c.fill(0.1);
        hl.c = diff::make_param(std::move(c), "hyper.c");
        Tensor g{std::vector<std::size_t>{theta_matrix_rows(layout)}};
        g.fill(1.0);
        hl.g = diff::make_param(std::move(g), "hyper.g");
        p.hyper = std::move(hl);
    }
    return p;
}

std::pair<Var, Var> lstm_step(Tape& tape, const LstmWeights& w, const Var& x,
                              const Var& h, const Var& c) {
    auto gate = [&](int k) {
        return diff::add(tape,
                         diff::add(tape, diff::matmul(tape, w.wx[k], x),
                                   diff::matmul(tape, w.wh[k], h)),
                         w.b[k]);
    };
    auto i = diff::sigmoid(tape, gate(0));
    auto f = diff::sigmoid(tape, gate(1));
    auto g = diff::tanh(tape, gate(2));
    auto o = diff::sigmoid(tape, gate(3));
    auto c_new = diff::add(tape, diff::mul(tape, f, c), diff::mul(tape, i, g));
    auto h_new = diff::mul(tape, o, diff::tanh(tape, c_new));
    return {h_new, c_new};
}

namespace {

Var linear(Tape& tape, const Var& w, const Var& b, const Var& x) {
    return diff::add(tape, diff::matmul(tape, w, x), b);
}

}  // namespace

std::vector<Var> forward_trajectory(Tape& tape, const ModelParams& params,
                                    const std::vector<std::vector<double>>& deltas,
                                    const MetadataRaw& meta,
                                    const encode::CategoricalVocabs& vocabs) {
    const ModelSpec& spec = params.spec;
    if (deltas.empty()) {
        throw std::invalid_argument("forward_trajectory: empty trajectory");
    }

    const bool needs_z = spec.variant != Variant::naive_baseline;
    Var z;
    if (needs_z) {
        z = encode::build_z(tape, meta, vocabs, params.driver_table,
                            params.stand_table, params.customer_table,
                            spec.mask);
    }

    // Hyper-generated blocks, fixed for the whole trajectory (z is
    // trajectory-level metadata).
    std::vector<Var> gen;
    if (params.hyper) {
        gen = generate_params(tape, *params.hyper, z);
    }

    LstmWeights lstm_w;
    if (spec.variant == Variant::hyper_lstm) {
        for (int k = 0; k < 4; ++k) {
            lstm_w.wx[k] = gen[3 * k + 0];
            lstm_w.wh[k] = gen[3 * k + 1];
            lstm_w.b[k] = gen[3 * k + 2];
        }
    } else {
        lstm_w = *params.lstm;
    }

    const std::size_t h_dim = spec.hidden;
    Var h = diff::make_const(Tensor{std::vector<std::size_t>{h_dim}}, "h0");
    Var c = diff::make_const(Tensor{std::vector<std::size_t>{h_dim}}, "c0");

    std::vector<Var> alphas;
    alphas.reserve(deltas.size());
    for (const auto& delta : deltas) {
        if (delta.size() != spec.n_ref) {
            throw std::invalid_argument(
                "forward_trajectory: delta length does not match n_ref");
        }
        auto dvar = diff::make_const(Tensor::vector(delta), "delta");
        Var e = diff::vecmat(tape, dvar, params.e_ref);

        Var x = e;
        if (spec.variant == Variant::pre_lstm) {
            x = diff::add(tape, diff::matmul(tape, gen[0], e), gen[1]);
        }
        std::tie(h, c) = lstm_step(tape, lstm_w, x, h, c);

        Var u = h;
        switch (spec.variant) {
            case Variant::post_lstm:
                u = diff::add(tape, diff::matmul(tape, gen[0], h), gen[1]);
                break;
            case Variant::concat_baseline:
                u = linear(tape, params.mid_w, params.mid_b,
                           diff::concat(tape, {h, z}));
                break;
            case Variant::naive_baseline:
                u = linear(tape, params.mid_w, params.mid_b, h);
                break;
            default:
                break;
        }
        auto pen = linear(tape, params.head1_w, params.head1_b, u);
        auto logits = linear(tape, params.head2_w, params.head2_b, pen);
        alphas.push_back(diff::softmax(tape, logits));
    }
    return alphas;
}

Var reference_matrix(const encode::ReferenceSet& refs) {
    Tensor m = Tensor::matrix(refs.size(), 2);
    for (std::size_t j = 0; j < refs.size(); ++j) {
        m.at(j, 0) = refs.points[j].lat;
        m.at(j, 1) = refs.points[j].lon;
    }
    return diff::make_const(std::move(m), "ref_points");
}

Var predict_point(Tape& tape, const Var& alpha, const Var& ref_matrix) {
    return diff::vecmat(tape, alpha, ref_matrix);
}

Var haversine_loss_km(Tape& tape, const Var& yhat, const geo::GeoPoint& target) {
    if (yhat->value.shape != std::vector<std::size_t>{2}) {
        throw std::invalid_argument("haversine_loss_km: yhat must be (lat, lon)");
    }
    const double r = geo::kEarthRadiusKm;
    const double d2r = geo::kPi / 180.0;
    const double phi1 = yhat->value.data[0] * d2r;
    const double lam1 = yhat->value.data[1] * d2r;
    const double phi2 = target.lat * d2r;
    const double lam2 = target.lon * d2r;
    const double dphi = phi2 - phi1;
    const double dlam = lam2 - lam1;
    const double cc = std::cos(phi1) * std::cos(phi2);

    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    double a = sp * sp + cc * sl * sl;
    if (a < 0.0) a = 0.0;
    if (a > 1.0) a = 1.0;

    double dist, dd_dphi1, dd_dlam1;
    if (a < 1e-15) {
        // Small-angle expansion: d ~= r * sqrt(dphi^2 + cc * dlam^2).
        const double u = dphi * dphi + cc * dlam * dlam;
        dist = r * std::sqrt(u);
        if (u < 1e-30) {
            dd_dphi1 = 0.0;
            dd_dlam1 = 0.0;
        } else {
            const double k = r / (2.0 * std::sqrt(u));
            dd_dphi1 = k * (-2.0 * dphi - std::sin(phi1) * std::cos(phi2) * dlam * dlam);
            dd_dlam1 = k * (-2.0 * cc * dlam);
        }
    } else {
        dist = 2.0 * r * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
        const double dd_da = r / std::sqrt(a * (1.0 - a));
        const double da_dphi1 =
            -std::sin(dphi) / 2.0 - std::sin(phi1) * std::cos(phi2) * sl * sl;
        const double da_dlam1 = -cc * std::sin(dlam) / 2.0;
        dd_dphi1 = dd_da * da_dphi1;
        dd_dlam1 = dd_da * da_dlam1;
    }
    // Chain to degrees.
    const double glat = dd_dphi1 * d2r;
    const double glon = dd_dlam1 * d2r;
    return tape.record(Tensor::scalar(dist), {yhat}, [glat, glon](diff::Node& n) {
        const double g = n.grad.data[0];
        n.parents[0]->grad.data[0] += g * glat;
        n.parents[0]->grad.data[1] += g * glon;
    });
}

Var trajectory_loss(Tape& tape, const std::vector<Var>& alphas,
                    const Var& ref_matrix, const geo::GeoPoint& dest) {
    if (alphas.empty()) {
        throw std::invalid_argument("trajectory_loss: no predictions");
    }
    std::vector<Var> dists;
    dists.reserve(alphas.size());
    for (const auto& alpha : alphas) {
        auto yhat = predict_point(tape, alpha, ref_matrix);
        dists.push_back(haversine_loss_km(tape, yhat, dest));
    }
    std::vector<Var> as_vec;
    for (auto& d : dists) as_vec.push_back(diff::reshape(tape, d, {1}));
    return diff::mean(tape, diff::concat(tape, as_vec));
}

}  // namespace hyperdest::model

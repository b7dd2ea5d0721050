#include "hyperdest/diffcore.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hyperdest::diff {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    data.assign(n, 0.0);
}

Tensor Tensor::scalar(double v) {
    Tensor t{std::vector<std::size_t>{}};
    t.data.assign(1, v);
    return t;
}

Tensor Tensor::vector(std::vector<double> v) {
    Tensor t;
    t.shape = {v.size()};
    t.data = std::move(v);
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols) {
    return Tensor{std::vector<std::size_t>{rows, cols}};
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(),
                       [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

std::string shape_str(const Tensor& t) {
    std::ostringstream o;
    o << '[';
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) o << 'x';
        o << t.shape[i];
    }
    o << ']';
    return o.str();
}

namespace {

Var make_node(Tensor value, bool trainable, std::string name) {
    auto n = std::make_shared<Node>();
    n->grad = Tensor(value.shape);
    n->value = std::move(value);
    n->trainable = trainable;
    n->name = std::move(name);
    return n;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                shape_str(a) + " and " + shape_str(b));
}

bool is_scalar(const Tensor& t) { return t.shape.empty() || t.size() == 1; }

}  // namespace

Var make_param(Tensor value, std::string name) {
    return make_node(std::move(value), true, std::move(name));
}

Var make_const(Tensor value, std::string name) {
    return make_node(std::move(value), false, std::move(name));
}

Var Tape::record(Tensor value, std::vector<Var> parents,
                 std::function<void(Node&)> backprop) {
#ifndef NDEBUG
    if (!value.all_finite()) {
        throw std::runtime_error("diffcore: non-finite value in forward pass");
    }
#endif
    auto n = make_node(std::move(value), false, "");
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    ops_.push_back(n);
    return n;
}

void Tape::backward(const Var& loss) {
    if (!loss || !is_scalar(loss->value)) {
        throw std::invalid_argument("backward: loss must be a scalar node");
    }
    loss->grad.data[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

Var matmul(Tape& t, const Var& a, const Var& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.shape.size() != 2) shape_error("matmul", A, B);
    const std::size_t r = A.rows(), k = A.cols();
    if (B.shape.size() == 2) {
        if (B.rows() != k) shape_error("matmul", A, B);
        const std::size_t c = B.cols();
        Tensor out = Tensor::matrix(r, c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                const double av = A.at(i, j);
                for (std::size_t l = 0; l < c; ++l)
                    out.at(i, l) += av * B.at(j, l);
            }
        return t.record(std::move(out), {a, b}, [r, k, c](Node& n) {
            auto& pa = *n.parents[0];
            auto& pb = *n.parents[1];
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t l = 0; l < c; ++l) {
                    const double g = n.grad.at(i, l);
                    for (std::size_t j = 0; j < k; ++j) {
                        pa.grad.at(i, j) += g * pb.value.at(j, l);
                        pb.grad.at(j, l) += g * pa.value.at(i, j);
                    }
                }
        });
    }
    if (B.shape.size() == 1) {
        if (B.shape[0] != k) shape_error("matmul", A, B);
        Tensor out{std::vector<std::size_t>{r}};
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += A.at(i, j) * B.data[j];
            out.data[i] = acc;
        }
        return t.record(std::move(out), {a, b}, [r, k](Node& n) {
            auto& pa = *n.parents[0];
            auto& pb = *n.parents[1];
            for (std::size_t i = 0; i < r; ++i) {
                const double g = n.grad.data[i];
                for (std::size_t j = 0; j < k; ++j) {
                    pa.grad.at(i, j) += g * pb.value.data[j];
                    pb.grad.data[j] += g * pa.value.at(i, j);
                }
            }
        });
    }
    shape_error("matmul", A, B);
}

Var vecmat(Tape& t, const Var& v, const Var& m) {
    const Tensor& V = v->value;
    const Tensor& M = m->value;
    if (V.shape.size() != 1 || M.shape.size() != 2 || M.rows() != V.shape[0]) {
        shape_error("vecmat", V, M);
    }
    const std::size_t k = M.rows(), c = M.cols();
    Tensor out{std::vector<std::size_t>{c}};
    for (std::size_t j = 0; j < k; ++j) {
        const double vv = V.data[j];
        if (vv == 0.0) continue;
        for (std::size_t l = 0; l < c; ++l) out.data[l] += vv * M.at(j, l);
    }
    return t.record(std::move(out), {v, m}, [k, c](Node& n) {
        auto& pv = *n.parents[0];
        auto& pm = *n.parents[1];
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            const double vv = pv.value.data[j];
            for (std::size_t l = 0; l < c; ++l) {
                const double g = n.grad.data[l];
                acc += g * pm.value.at(j, l);
                if (vv != 0.0) pm.grad.at(j, l) += g * vv;
            }
            pv.grad.data[j] += acc;
        }
    });
}

Var add(Tape& t, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) shape_error("add", a->value, b->value);
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    return t.record(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += n.grad.data[i];
            n.parents[1]->grad.data[i] += n.grad.data[i];
        }
    });
}

Var mul(Tape& t, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) shape_error("mul", a->value, b->value);
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
    return t.record(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += n.grad.data[i] * n.parents[1]->value.data[i];
            n.parents[1]->grad.data[i] += n.grad.data[i] * n.parents[0]->value.data[i];
        }
    });
}

Var scale(Tape& t, const Var& a, double k) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= k;
    return t.record(std::move(out), {a}, [k](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad.data[i] += k * n.grad.data[i];
    });
}

Var concat(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.shape.size() != 1) {
            throw std::invalid_argument("concat: all inputs must be 1-D");
        }
        total += p->value.size();
    }
    Tensor out{std::vector<std::size_t>{total}};
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += p->value.size();
    }
    return t.record(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (auto& p : n.parents) {
            for (std::size_t i = 0; i < p->value.size(); ++i)
                p->grad.data[i] += n.grad.data[off + i];
            off += p->value.size();
        }
    });
}

Var slice(Tape& t, const Var& a, std::size_t lo, std::size_t hi) {
    if (a->value.shape.size() != 1 || lo > hi || hi > a->value.size()) {
        throw std::invalid_argument("slice: bad range on shape " +
                                    shape_str(a->value));
    }
    Tensor out{std::vector<std::size_t>{hi - lo}};
    std::copy(a->value.data.begin() + static_cast<std::ptrdiff_t>(lo),
              a->value.data.begin() + static_cast<std::ptrdiff_t>(hi),
              out.data.begin());
    return t.record(std::move(out), {a}, [lo](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad.data[lo + i] += n.grad.data[i];
    });
}

Var reshape(Tape& t, const Var& a, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != a->value.size()) {
        throw std::invalid_argument("reshape: element count mismatch for " +
                                    shape_str(a->value));
    }
    Tensor out;
    out.shape = std::move(shape);
    out.data = a->value.data;
    return t.record(std::move(out), {a}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad.data[i] += n.grad.data[i];
    });
}

Var sum(Tape& t, const Var& a) {
    double acc = std::accumulate(a->value.data.begin(), a->value.data.end(), 0.0);
    return t.record(Tensor::scalar(acc), {a}, [](Node& n) {
        const double g = n.grad.data[0];
        for (auto& gd : n.parents[0]->grad.data) gd += g;
    });
}

Var mean(Tape& t, const Var& a) {
    if (a->value.size() == 0) throw std::invalid_argument("mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(a->value.size());
    double acc = std::accumulate(a->value.data.begin(), a->value.data.end(), 0.0);
    return t.record(Tensor::scalar(acc * inv), {a}, [inv](Node& n) {
        const double g = n.grad.data[0] * inv;
        for (auto& gd : n.parents[0]->grad.data) gd += g;
    });
}

namespace {

void softmax_row(const double* in, double* out, std::size_t n) {
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

}  // namespace

Var softmax(Tape& t, const Var& a) {
    const Tensor& A = a->value;
    if (A.shape.empty() || A.shape.size() > 2) {
        throw std::invalid_argument("softmax: expects 1-D or 2-D, got " +
                                    shape_str(A));
    }
    const std::size_t n = A.shape.back();
    const std::size_t rows = A.size() / n;
    Tensor out = A;
    for (std::size_t r = 0; r < rows; ++r)
        softmax_row(&A.data[r * n], &out.data[r * n], n);
    return t.record(std::move(out), {a}, [n, rows](Node& nd) {
        // dL/dx_i = y_i (g_i - sum_j g_j y_j), per row
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = &nd.value.data[r * n];
            const double* g = &nd.grad.data[r * n];
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
            for (std::size_t i = 0; i < n; ++i)
                nd.parents[0]->grad.data[r * n + i] += y[i] * (g[i] - dot);
        }
    });
}

Var sigmoid(Tape& t, const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return t.record(std::move(out), {a}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double y = n.value.data[i];
            n.parents[0]->grad.data[i] += n.grad.data[i] * y * (1.0 - y);
        }
    });
}

Var tanh(Tape& t, const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::tanh(v);
    return t.record(std::move(out), {a}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double y = n.value.data[i];
            n.parents[0]->grad.data[i] += n.grad.data[i] * (1.0 - y * y);
        }
    });
}

Var l2_norm(Tape& t, const Var& a) {
    if (a->value.shape.size() != 1) {
        throw std::invalid_argument("l2_norm: expects 1-D, got " +
                                    shape_str(a->value));
    }
    double acc = 0.0;
    for (double v : a->value.data) acc += v * v;
    const double nrm = std::sqrt(acc);
    return t.record(Tensor::scalar(nrm), {a}, [nrm](Node& n) {
        if (nrm == 0.0) return;  // subgradient 0 at the origin
        const double g = n.grad.data[0] / nrm;
        for (std::size_t i = 0; i < n.parents[0]->value.size(); ++i)
            n.parents[0]->grad.data[i] += g * n.parents[0]->value.data[i];
    });
}

Var row(Tape& t, const Var& table, std::size_t idx) {
    const Tensor& T = table->value;
    if (T.shape.size() != 2 || idx >= T.rows()) {
        throw std::invalid_argument("row: index " + std::to_string(idx) +
                                    " out of range for " + shape_str(T));
    }
    const std::size_t c = T.cols();
    Tensor out{std::vector<std::size_t>{c}};
    std::copy(T.data.begin() + static_cast<std::ptrdiff_t>(idx * c),
              T.data.begin() + static_cast<std::ptrdiff_t>((idx + 1) * c),
              out.data.begin());
    return t.record(std::move(out), {table}, [idx, c](Node& n) {
        for (std::size_t i = 0; i < c; ++i)
            n.parents[0]->grad.data[idx * c + i] += n.grad.data[i];
    });
}

namespace {

constexpr double kMinRowNorm = 1e-12;

// w = (g/||v||) v ; dv = (g/||v||)(dw - (v.dw/||v||^2) v) ; dg = v.dw/||v||
void weight_norm_row_backward(const double* v, double v_norm, double g,
                              const double* dw, std::size_t n, double* dv,
                              double* dg) {
    double vdw = 0.0;
    for (std::size_t i = 0; i < n; ++i) vdw += v[i] * dw[i];
    const double s = g / v_norm;
    const double proj = vdw / (v_norm * v_norm);
    for (std::size_t i = 0; i < n; ++i) dv[i] += s * (dw[i] - proj * v[i]);
    *dg += vdw / v_norm;
}

}  // namespace

Var weight_norm(Tape& t, const Var& v, const Var& g) {
    const Tensor& V = v->value;
    if (V.shape.size() != 1) {
        throw std::invalid_argument("weight_norm: v must be 1-D");
    }
    if (g->value.size() != 1) {
        throw std::invalid_argument("weight_norm: g must be scalar");
    }
    double acc = 0.0;
    for (double x : V.data) acc += x * x;
    const double nrm = std::sqrt(acc);
    if (nrm < kMinRowNorm) {
        throw std::runtime_error("weight_norm: degenerate direction, ||v|| = " +
                                 std::to_string(nrm));
    }
    const double s = g->value.data[0] / nrm;
    Tensor out = V;
    for (auto& x : out.data) x *= s;
    return t.record(std::move(out), {v, g}, [nrm](Node& n) {
        auto& pv = *n.parents[0];
        auto& pg = *n.parents[1];
        weight_norm_row_backward(pv.value.data.data(), nrm, pg.value.data[0],
                                 n.grad.data.data(), pv.value.size(),
                                 pv.grad.data.data(), &pg.grad.data[0]);
    });
}

Var weight_norm_rows(Tape& t, const Var& v, const Var& g) {
    const Tensor& V = v->value;
    const Tensor& G = g->value;
    if (V.shape.size() != 2 || G.shape.size() != 1 || G.shape[0] != V.rows()) {
        shape_error("weight_norm_rows", V, G);
    }
    const std::size_t r = V.rows(), c = V.cols();
    std::vector<double> norms(r);
    Tensor out = V;
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += V.at(i, j) * V.at(i, j);
        norms[i] = std::sqrt(acc);
        if (norms[i] < kMinRowNorm) {
            throw std::runtime_error(
                "weight_norm_rows: degenerate direction in row " +
                std::to_string(i));
        }
        const double s = G.data[i] / norms[i];
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= s;
    }
    return t.record(std::move(out), {v, g},
                    [r, c, norms = std::move(norms)](Node& n) {
                        auto& pv = *n.parents[0];
                        auto& pg = *n.parents[1];
                        for (std::size_t i = 0; i < r; ++i) {
                            weight_norm_row_backward(
                                &pv.value.data[i * c], norms[i],
                                pg.value.data[i], &n.grad.data[i * c], c,
                                &pv.grad.data[i * c], &pg.grad.data[i]);
                        }
                    });
}

}  // namespace hyperdest::diff

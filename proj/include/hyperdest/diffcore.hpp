#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hyperdest::diff {

// Dense row-major f64 tensor. No broadcasting; shapes must match exactly
// where an op requires it.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    void fill(double v);
};

std::string shape_str(const Tensor& t);

struct Node;
using Var = std::shared_ptr<Node>;

// A value in the computation graph. Parameters are long-lived leaf nodes;
// op nodes are recorded on a Tape per forward pass. Gradients accumulate
// (+=) and are zeroed explicitly between optimizer steps.
struct Node {
    Tensor value;
    Tensor grad;  // same shape as value
    bool trainable = false;
    std::string name;
    std::vector<Var> parents;
    // Propagates this->grad into parents' grads.
    std::function<void(Node&)> backprop;

    void zero_grad() { grad.fill(0.0); }
};

Var make_param(Tensor value, std::string name);
Var make_const(Tensor value, std::string name = "");

// Records op nodes in topological (execution) order; backward() walks them
// in exact reverse order so single-threaded runs are bit-reproducible.
class Tape {
public:
    Var record(Tensor value, std::vector<Var> parents,
               std::function<void(Node&)> backprop);
    // Seeds d(loss)/d(loss) = 1 and accumulates into every reachable grad.
    // Throws std::invalid_argument if loss is not scalar.
    void backward(const Var& loss);
    std::size_t size() const { return ops_.size(); }

private:
    std::vector<Var> ops_;
};

// --- forward ops ------------------------------------------------------
// (a: r×k, b: k×c) -> r×c; or (a: r×k, b: k) -> r
Var matmul(Tape& t, const Var& a, const Var& b);
// (v: k, m: k×c) -> c   (row-vector times matrix)
Var vecmat(Tape& t, const Var& v, const Var& m);
Var add(Tape& t, const Var& a, const Var& b);        // same shape
Var mul(Tape& t, const Var& a, const Var& b);        // elementwise
Var scale(Tape& t, const Var& a, double k);
Var concat(Tape& t, const std::vector<Var>& parts);  // 1-D
Var slice(Tape& t, const Var& a, std::size_t lo, std::size_t hi);  // 1-D [lo,hi)
Var reshape(Tape& t, const Var& a, std::vector<std::size_t> shape);
Var sum(Tape& t, const Var& a);   // -> scalar
Var mean(Tape& t, const Var& a);  // -> scalar
Var softmax(Tape& t, const Var& a);  // 1-D, or 2-D along the last axis
Var sigmoid(Tape& t, const Var& a);
Var tanh(Tape& t, const Var& a);
Var l2_norm(Tape& t, const Var& a);  // 1-D -> scalar
// Embedding lookup: row idx of a 2-D table -> 1-D vector.
Var row(Tape& t, const Var& table, std::size_t idx);

// Weight normalization w = (g / ||v||) v; g scalar, v 1-D.
// Throws when ||v|| < 1e-12 (degenerate direction).
Var weight_norm(Tape& t, const Var& v, const Var& g);
// Row-wise variant: V r×c, g of length r; each row normalized to |g_i|.
Var weight_norm_rows(Tape& t, const Var& v, const Var& g);

}  // namespace hyperdest::diff

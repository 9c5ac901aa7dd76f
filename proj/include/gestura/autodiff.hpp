#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "gestura/tensor.hpp"

namespace gestura::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    // Gradient after Tape::backward; empty for nodes that do not require gradients.
    std::span<const double> grad() const;
    bool requires_grad() const;

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Linear record of primitive operations. Single-threaded; replayed once in reverse by backward().
class Tape {
public:
    // Adjoint rule: reads the node's output gradient and accumulates into its parents.
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Records an op output. The node requires gradients iff any parent does.
    Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
    Var record(Tensor value, std::span<const Var> parents, Backward backward);

    // Seeds d(loss)/d(loss) = 1 and propagates in reverse tape order.
    void backward(Var loss);

    bool consumed() const noexcept { return consumed_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    // Mutable gradient buffer used by adjoint rules; empty if the node needs no gradient.
    std::span<double> grad_buffer(std::size_t id) { return nodes_[id].grad; }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        bool requires_grad = false;
        Backward backward;
    };

    Var push(Tensor value, bool requires_grad, Backward backward);

    std::deque<Node> nodes_;
    bool consumed_ = false;
};

// Primitive ops. Shapes follow the matrix view of Tensor (rows x cols) unless noted.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a[m x n] + row[n] broadcast over rows.
Var add_row(Var a, Var row);
// a[m x n] * row[n] broadcast over rows.
Var mul_row(Var a, Var row);
Var scale(Var a, double factor);
// a * s where s holds exactly one element.
Var scale_by(Var a, Var s);
Var gelu(Var a);
Var leaky_relu(Var a, double slope);
// Softmax along the last axis, max-shifted.
Var softmax(Var a);
// Row softmax restricted to entries where mask[r * cols + c] != 0; masked-out outputs are exactly 0.
Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask);
// Per-row standardization without affine terms.
Var layer_norm(Var a, double eps = 1e-5);
// Mean over rows: [m x n] -> [1 x n].
Var mean_rows(Var a);
Var col_slice(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
// col[m x 1] (+) row[1 x n] -> [m x n] with out[i][j] = col[i] + row[j].
Var outer_add(Var col, Var row);
// Zero-padded 1-D convolution. x[T x Cin], kernel[K x Cin x Cout] -> [T x Cout];
// out[t] = sum_k x[t + k * dilation - pad_left] * kernel[k].
Var conv1d(Var x, Var kernel, std::size_t dilation, std::size_t pad_left);
// Causal variant: pad_left = (K - 1) * dilation, so out[t] depends on x[0..t] only.
Var conv1d_dilated(Var x, Var kernel, std::size_t dilation);
Var sum(Var a);
Var mean(Var a);
Var element(Var a, std::size_t index);
Var reshape(Var a, Shape shape);
// weight * (logsumexp(logits) - logits[label]) for a single example.
Var cross_entropy(Var logits, std::size_t label, double weight = 1.0);
Var mse(Var a, const Tensor& target);

// Non-recording numeric helpers.
std::vector<double> softmax(std::span<const double> x);

}  // namespace gestura::ad

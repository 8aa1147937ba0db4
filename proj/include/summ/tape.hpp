#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "summ/tensor.hpp"

namespace summ {

// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over Tensor-valued operations. Nodes are recorded in
// creation order, which is a valid topological order; backward() walks them in
// exact reverse creation order and accumulates gradients into every node.
//
// A Tape is confined to one thread. mark()/truncate() allow a decoder to reuse
// one tape across many inference steps without unbounded growth.
class Tape {
public:
    Var leaf(Tensor value);

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    // Valid after backward(); zero for leaves the loss never touched.
    const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }

    // --- primitives ---
    // C = A * B, [r x k] * [k x c] -> [r x c]
    Var matmul(Var a, Var b);
    // Same shape, or broadcast of a [1 x c] row over the rows of a [r x c] tensor.
    Var add(Var a, Var b);
    // Elementwise product; same broadcast rule as add.
    Var mul(Var a, Var b);
    // k * x + c elementwise, constants.
    Var affine(Var a, double k, double c);
    // s (1x1) * A elementwise; gradient flows to both.
    Var scale_by(Var s, Var a);
    Var sigmoid(Var a);
    Var tanh(Var a);
    // Row-wise softmax with max subtraction.
    Var softmax_rows(Var a);
    // [r x c1], [r x c2] -> [r x (c1+c2)]
    Var concat_cols(Var a, Var b);
    // Stack of [1 x c] rows -> [n x c].
    Var stack_rows(const std::vector<Var>& rows);
    Var transpose(Var a);
    // Column-wise max over rows -> [1 x c]; ties break toward the lowest row index.
    Var max_pool_rows(Var a);
    // Embedding-style row gather: out[k] = table[ids[k]]; backward scatter-adds.
    Var take_rows(Var table, std::vector<int> ids);
    // [1 x n] values scattered into a [1 x width] row: out[ids[k]] += a[k].
    Var scatter_add_cols(Var a, std::vector<int> ids, int width);
    // Append `extra` zero columns.
    Var pad_cols(Var a, int extra);
    // out (1x1) = a[0][idx]
    Var at_col(Var a, int idx);
    // Elementwise min; ties route the gradient to the first argument.
    Var minimum(Var a, Var b);
    // log(max(a, floor)); zero gradient where the floor is active.
    Var log_floored(Var a, double floor);
    Var sum_all(Var a);

    // Gradient of a scalar loss w.r.t. every node. Reallocates all gradients.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    std::size_t mark() const { return nodes_.size(); }
    void truncate(std::size_t mark);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back;  // empty for leaves
    };

    int check(Var v) const;
    Var push(Tensor value, std::function<void(Tape&)> back);
    Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }

    std::vector<Node> nodes_;
};

// Central finite-difference gradient check.
//
// `eval` recomputes the scalar objective from the current parameter values;
// `analytic` returns the tape gradients for the listed parameters, in order.
// Every coordinate of every parameter is perturbed by +-eps; the relative
// error is |a - fd| / max(1, |a|, |fd|).
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_name;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool passed = false;
};

GradCheckReport grad_check(const std::function<double()>& eval,
                           const std::function<std::vector<Tensor>()>& analytic,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double eps, double tol);

}  // namespace summ

// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "recbench/common.hpp"
#include "recbench/rng.hpp"

namespace recbench::tensor {

class Tape;

// Dense tensor node. Tensors are cheap handles sharing one of these.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<real_t> val;
    std::vector<real_t> grad;     // allocated lazily, same length as val
    bool requires_grad = false;   // leaf parameter flag
    bool needs_grad = false;      // requires_grad or produced from such inputs
    const Tape* producer = nullptr;  // tape that recorded the producing op
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, real_t value);
    static Tensor from(std::vector<std::size_t> shape, std::vector<real_t> values);
    static Tensor scalar(real_t value);
    // Trainable leaf initialized to zero; optimizer targets have requires_grad set.
    static Tensor param(std::vector<std::size_t> shape);

    bool defined() const { return node_ != nullptr; }
    TensorNode* node() const { return node_.get(); }

    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->val.size(); }
    // Matrix views: rank-1 tensors are treated as a single row.
    std::size_t rows() const { return node_->shape.size() >= 2 ? node_->shape[0] : 1; }
    std::size_t cols() const {
        return node_->shape.size() >= 2 ? node_->shape[1] : (node_->shape.empty() ? 1 : node_->shape[0]);
    }

    std::vector<real_t>& val() { return node_->val; }
    const std::vector<real_t>& val() const { return node_->val; }
    std::vector<real_t>& grad() { return node_->grad; }
    const std::vector<real_t>& grad() const { return node_->grad; }

    real_t item() const;
    real_t at(std::size_t i, std::size_t j) const { return node_->val[i * cols() + j]; }
    real_t& at(std::size_t i, std::size_t j) { return node_->val[i * cols() + j]; }

    bool requires_grad() const { return node_->requires_grad; }
    bool needs_grad() const { return node_ && node_->needs_grad; }

    void ensure_grad();  // allocate + zero-fill the grad buffer
    void zero_grad();

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_output(Tape* tape, std::vector<std::size_t> shape,
                              std::initializer_list<Tensor> inputs);
};

// Records executed operations in order; backward() replays them reversed.
// Single-writer: one tape per logical training stream.
class Tape {
public:
    void record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return entries_.size(); }

    // Seeds d(loss)/d(loss)=1 and propagates to every tensor that needs grads.
    // The tape is consumed: entries are cleared afterwards.
    void backward(const Tensor& loss);

    void reset() { entries_.clear(); }

private:
    std::vector<std::function<void()>> entries_;
};

void backward(Tape& tape, const Tensor& loss);

// ---------------------------------------------------------------------------
// Ops. Every op takes the tape first; tape == nullptr runs forward-only
// (evaluation mode). All matrix ops are row-major 2-D.
// ---------------------------------------------------------------------------

// C[m,n] = A[m,k] * B[k,n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
// C[m,n] = A[m,k] * B[n,k]^T
Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b);
// Y[r,o] = X[r,f] * W[f,o] + bias[o] broadcast over rows
Tensor linear(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(Tape* tape, const Tensor& x, real_t c);

Tensor sum_all(Tape* tape, const Tensor& x);   // -> scalar
Tensor mean_all(Tape* tape, const Tensor& x);  // -> scalar

// Row gather: out[i] = x[indices[i]]. Gradients scatter-add into x.
Tensor take_rows(Tape* tape, const Tensor& x, const std::vector<int>& indices);
// Stack 1-row-or-more matrices with equal column counts.
Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts);
Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b);

// out[i] = dot(a.row(i), b.row(i))
Tensor rowwise_dot(Tape* tape, const Tensor& a, const Tensor& b);

// Multiply each row by 0/1 keep flags (used to zero padded positions).
Tensor mask_rows(Tape* tape, const Tensor& x, const std::vector<std::uint8_t>& keep);

// Softmax over each row restricted to entries with mask != 0. Masked entries
// are exactly zero in the output; a fully masked row yields an all-zero row.
Tensor masked_softmax_rows(Tape* tape, const Tensor& x, const std::vector<std::uint8_t>& mask);

// Row-wise layer norm with learned gain/bias of length cols.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  real_t eps = 1e-5);

Tensor gelu(Tape* tape, const Tensor& x);  // tanh approximation
Tensor sigmoid(Tape* tape, const Tensor& x);

// Stable binary cross entropy for (positive, negative) score pairs:
// out[i] = softplus(-pos[i]) + softplus(neg[i]).
Tensor bce_pair(Tape* tape, const Tensor& pos_scores, const Tensor& neg_scores);

// Mean over rows of (logsumexp(row) - row[target]); used by the MLM objective.
Tensor cross_entropy_rows(Tape* tape, const Tensor& logits, const std::vector<int>& targets);

// Inverted dropout: keep with prob 1-p and scale kept entries by 1/(1-p).
// p == 0 returns the input unchanged.
Tensor dropout(Tape* tape, const Tensor& x, real_t p, Rng& rng);

// Multi-head scaled-dot-product attention over one sequence.
// q,k,v: [L,d] with d divisible by heads; head h uses the contiguous column
// block [h*dh, (h+1)*dh). key_valid masks keys out of every query's softmax;
// causal additionally restricts query t to keys <= t. attn_dropout > 0
// applies inverted dropout to the attention weights (training only).
Tensor multi_head_attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, bool causal,
                            const std::vector<std::uint8_t>& key_valid, real_t attn_dropout = 0,
                            Rng* rng = nullptr);

std::string shape_str(const Tensor& t);

}  // namespace recbench::tensor

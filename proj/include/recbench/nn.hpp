// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "recbench/rng.hpp"
#include "recbench/tensor.hpp"

namespace recbench::nn {

using tensor::Tape;
using tensor::Tensor;

// A named trainable leaf; the unit of optimizer grouping and checkpointing.
struct NamedParam {
    std::string name;
    Tensor value;
};

using ParamList = std::vector<NamedParam>;

// Forward-pass context. tape == nullptr (the default) means evaluation mode:
// nothing is recorded and dropout is disabled regardless of the configured rate.
struct FwdCtx {
    Tape* tape = nullptr;
    Rng* rng = nullptr;
    real_t dropout = 0;

    bool training() const { return tape != nullptr; }
    real_t drop_p() const { return training() ? dropout : real_t(0); }
};

// Truncated normal (mean 0, +/-2 sigma) fill; the default weight init.
void init_trunc_normal(Tensor& t, Rng& rng, real_t stddev = 0.02);

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out]

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x) const { return linear(tape, x, w, b); }
    void params(ParamList& out, const std::string& prefix) const;
    std::size_t param_count() const { return w.numel() + b.numel(); }
};

// Hidden layer for residual-free GELU stacks (adapters, towers, post-fusion).
// Fan-in-scaled init keeps activations O(1) through depth; the global 0.02
// init would shrink the signal by orders of magnitude per layer.
Linear make_stack_linear(std::size_t in, std::size_t out, Rng& rng);

struct LayerNorm {
    Tensor gain;  // ones
    Tensor bias;  // zeros

    LayerNorm() = default;
    explicit LayerNorm(std::size_t width);
    Tensor forward(Tape* tape, const Tensor& x) const {
        return tensor::layer_norm(tape, x, gain, bias);
    }
    void params(ParamList& out, const std::string& prefix) const;
};

// Pre-norm transformer block: x + MHSA(LN(x)), then x + FFN(LN(x)) with a
// GELU feed-forward of inner width 4d. Dropout is applied to the attention
// weights and to both sublayer outputs.
struct TransformerBlock {
    std::size_t width = 0;
    std::size_t heads = 0;
    LayerNorm ln1, ln2;
    Linear wq, wk, wv, wo;
    Linear ff1, ff2;

    TransformerBlock() = default;
    TransformerBlock(std::size_t width, std::size_t heads, Rng& rng);

    Tensor forward(const FwdCtx& ctx, const Tensor& x, bool causal,
                   const std::vector<std::uint8_t>& key_valid) const;
    void params(ParamList& out, const std::string& prefix) const;
};

// Spec'd transformer-block entry point over a single sequence.
Tensor attention_block(const FwdCtx& ctx, const TransformerBlock& block, const Tensor& x,
                       bool causal);

std::size_t total_params(const ParamList& params);

}  // namespace recbench::nn

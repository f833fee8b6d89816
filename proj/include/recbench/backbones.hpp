// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "recbench/nn.hpp"

namespace recbench::backbones {

using nn::FwdCtx;
using nn::ParamList;
using tensor::Tensor;

// Sequential user tower: learned positional embeddings plus causal
// transformer blocks over encoded item vectors, final layer norm. The state
// at position t summarizes items 1..t. Padded positions are masked out of
// attention and forced to zero in the output.
class SasrecBackbone {
public:
    SasrecBackbone(std::size_t dim, std::size_t max_len, std::size_t blocks, std::size_t heads,
                   Rng& rng);

    // item_vec_seq: [L, d]; valid[i] == 0 marks a padded position. Positional
    // rows are assigned by offset from the first valid position, so a
    // left-padded call matches the same sequence processed at exact length.
    Tensor user_states(const FwdCtx& ctx, const Tensor& item_vec_seq,
                       const std::vector<std::uint8_t>& valid) const;

    void params(ParamList& out, const std::string& prefix) const;
    std::size_t dim() const { return dim_; }
    std::size_t max_len() const { return max_len_; }

private:
    std::size_t dim_, max_len_;
    Tensor pos_emb;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm final_ln_;
};

// Two-tower user side: one embedding row per user, optionally followed by
// GELU tower layers of the same width (the default of zero layers means the
// lookup is the user vector).
class DssmBackbone {
public:
    DssmBackbone(std::size_t num_users, std::size_t dim, std::size_t tower_layers, Rng& rng);

    Tensor user_vectors(const FwdCtx& ctx, const std::vector<int>& users) const;
    void params(ParamList& out, const std::string& prefix) const;
    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_;
    Tensor user_table_;
    std::vector<nn::Linear> tower_;
};

// Raw matching score: plain dot product. The sigmoid lives inside the loss
// and never participates in ranking.
real_t score(const Tensor& user_vec, const Tensor& item_vec);

// One user state/vector [1,d] against a bank of item vectors [m,d] -> [1,m].
Tensor score_against(tensor::Tape* tape, const Tensor& user_vec, const Tensor& item_vecs);

}  // namespace recbench::backbones

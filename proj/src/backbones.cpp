// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/backbones.hpp"

namespace recbench::backbones {

SasrecBackbone::SasrecBackbone(std::size_t dim, std::size_t max_len, std::size_t blocks,
                               std::size_t heads, Rng& rng)
    : dim_(dim), max_len_(max_len) {
    pos_emb = tensor::Tensor::param({max_len, dim});
    nn::init_trunc_normal(pos_emb, rng);
    for (std::size_t b = 0; b < blocks; ++b) blocks_.emplace_back(dim, heads, rng);
    final_ln_ = nn::LayerNorm(dim);
}

Tensor SasrecBackbone::user_states(const FwdCtx& ctx, const Tensor& item_vec_seq,
                                   const std::vector<std::uint8_t>& valid) const {
    const std::size_t L = item_vec_seq.rows();
    if (item_vec_seq.cols() != dim_) {
        throw ShapeError("sasrec: item vectors " + tensor::shape_str(item_vec_seq) +
                         " do not match dim " + std::to_string(dim_));
    }
    if (L > max_len_) {
        throw ContractError("sasrec: sequence length " + std::to_string(L) +
                            " exceeds positional table " + std::to_string(max_len_));
    }
    if (valid.size() != L) throw ShapeError("sasrec: valid mask length != L");

    std::size_t first_valid = 0;
    while (first_valid < L && !valid[first_valid]) ++first_valid;
    if (first_valid == L) return Tensor::zeros({L, dim_});  // all padded

    std::vector<int> pos_idx(L, 0);
    for (std::size_t i = first_valid; i < L; ++i) pos_idx[i] = static_cast<int>(i - first_valid);

    Tensor x = tensor::add(ctx.tape, item_vec_seq, tensor::take_rows(ctx.tape, pos_emb, pos_idx));
    if (ctx.drop_p() > 0) x = tensor::dropout(ctx.tape, x, ctx.drop_p(), *ctx.rng);
    for (const auto& block : blocks_) x = block.forward(ctx, x, /*causal=*/true, valid);
    x = final_ln_.forward(ctx.tape, x);
    return tensor::mask_rows(ctx.tape, x, valid);
}

void SasrecBackbone::params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".pos_emb", pos_emb});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b].params(out, prefix + ".block" + std::to_string(b));
    }
    final_ln_.params(out, prefix + ".final_ln");
}

DssmBackbone::DssmBackbone(std::size_t num_users, std::size_t dim, std::size_t tower_layers,
                           Rng& rng)
    : dim_(dim) {
    user_table_ = tensor::Tensor::param({num_users, dim});
    nn::init_trunc_normal(user_table_, rng);
    for (std::size_t i = 0; i < tower_layers; ++i) tower_.push_back(nn::make_stack_linear(dim, dim, rng));
}

Tensor DssmBackbone::user_vectors(const FwdCtx& ctx, const std::vector<int>& users) const {
    Tensor x = tensor::take_rows(ctx.tape, user_table_, users);
    for (const auto& layer : tower_) {
        x = tensor::gelu(ctx.tape, layer.forward(ctx.tape, x));
    }
    return x;
}

void DssmBackbone::params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".user_table", user_table_});
    for (std::size_t i = 0; i < tower_.size(); ++i) {
        tower_[i].params(out, prefix + ".tower" + std::to_string(i));
    }
}

real_t score(const Tensor& user_vec, const Tensor& item_vec) {
    if (user_vec.numel() != item_vec.numel()) {
        throw ShapeError("score: dim mismatch " + tensor::shape_str(user_vec) + " vs " +
                         tensor::shape_str(item_vec));
    }
    real_t acc = 0;
    for (std::size_t i = 0; i < user_vec.numel(); ++i) acc += user_vec.val()[i] * item_vec.val()[i];
    return acc;
}

Tensor score_against(tensor::Tape* tape, const Tensor& user_vec, const Tensor& item_vecs) {
    return tensor::matmul_nt(tape, user_vec, item_vecs);
}

}  // namespace recbench::backbones

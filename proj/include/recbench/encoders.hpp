// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "recbench/catalog.hpp"
#include "recbench/nn.hpp"

namespace recbench::encoders {

using nn::FwdCtx;
using nn::Linear;
using nn::ParamList;
using tensor::Tensor;

// Maps item indices to d-dimensional vectors. Every implementation emits the
// same width, so backbones compose with any encoder unchanged.
//
// Parameters are split into two groups: me_params covers the modality-encoder
// core (tuned with its own learning rate), other_params covers everything
// randomly initialized for the recommendation task (ID tables, DT-layers,
// adapters, fusion heads).
class ItemEncoder {
public:
    virtual ~ItemEncoder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string kind() const = 0;
    // Returns |items| x d. Gradients flow only into looked-up/encoded rows.
    virtual Tensor encode(const FwdCtx& ctx, const std::vector<int>& items) = 0;
    virtual void me_params(ParamList& out, const std::string& prefix) const = 0;
    virtual void other_params(ParamList& out, const std::string& prefix) const = 0;
};

// Plain ID embedding table, one trainable row per catalog item.
class IdEmbeddingEncoder final : public ItemEncoder {
public:
    IdEmbeddingEncoder(std::size_t num_items, std::size_t dim, Rng& rng);

    std::size_t dim() const override { return dim_; }
    std::string kind() const override { return "id"; }
    Tensor encode(const FwdCtx& ctx, const std::vector<int>& items) override;
    void me_params(ParamList&, const std::string&) const override {}
    void other_params(ParamList& out, const std::string& prefix) const override;

    Tensor& table() { return table_; }

private:
    std::size_t dim_;
    Tensor table_;
};

struct TextEncoderConfig {
    std::size_t vocab_size = 0;
    std::size_t width = 64;        // transformer width
    std::size_t blocks = 2;
    std::size_t heads = 2;
    std::size_t max_positions = 31;  // CLS + max title tokens
    std::size_t out_dim = 64;        // backbone hidden size d
};

// From-scratch text encoder: token+position embeddings, non-causal
// transformer blocks with pad masking, CLS pooling, then an affine DT-layer
// mapping the encoder width to the backbone dimension.
class TextEncoder final : public ItemEncoder {
public:
    TextEncoder(TextEncoderConfig cfg, std::vector<std::vector<int>> item_tokens, Rng& rng);

    std::size_t dim() const override { return cfg_.out_dim; }
    std::string kind() const override { return "text_e2e"; }
    Tensor encode(const FwdCtx& ctx, const std::vector<int>& items) override;
    void me_params(ParamList& out, const std::string& prefix) const override;
    void other_params(ParamList& out, const std::string& prefix) const override;

    const TextEncoderConfig& config() const { return cfg_; }
    const std::vector<std::vector<int>>& item_tokens() const { return item_tokens_; }

    // Encodes one explicit token sequence to its pre-DT CLS vector [1 x width].
    Tensor encode_tokens(const FwdCtx& ctx, const std::vector<int>& tokens);

    Tensor tok_emb, pos_emb;
    std::vector<nn::TransformerBlock> blocks;
    nn::LayerNorm final_ln;
    Linear dt;

private:
    TextEncoderConfig cfg_;
    std::vector<std::vector<int>> item_tokens_;
};

// Two-stage pathway: fixed pre-extracted feature vectors behind an adapter
// stack. The source features never receive gradients.
class FrozenFeatureEncoder final : public ItemEncoder {
public:
    // features: num_items x feature_dim, adapter_depth hidden GELU layers of
    // width out_dim, then the DT-layer to out_dim.
    FrozenFeatureEncoder(std::vector<std::vector<real_t>> features, std::size_t adapter_depth,
                         std::size_t out_dim, Rng& rng);

    std::size_t dim() const override { return out_dim_; }
    std::string kind() const override { return "frozen" + std::to_string(adapters_.size()); }
    Tensor encode(const FwdCtx& ctx, const std::vector<int>& items) override;
    void me_params(ParamList&, const std::string&) const override {}
    void other_params(ParamList& out, const std::string& prefix) const override;

    const Tensor& features() const { return features_; }
    std::vector<Linear>& adapters() { return adapters_; }
    Linear& dt_layer() { return dt_; }

private:
    std::size_t out_dim_;
    Tensor features_;  // constant: requires_grad stays false
    std::vector<Linear> adapters_;
    Linear dt_;
};

enum class FusionMode { kAdd, kCon };

struct FusionSpec {
    FusionMode mode = FusionMode::kAdd;
    std::size_t post_depth = 0;  // one of {0,2,4,6,8}
};

// ID + modality fusion: ADD sums equal-width vectors, CON concatenates and
// projects 2d -> d; either may be followed by a GELU layer stack of width d.
class FusionHead {
public:
    FusionHead() = default;
    FusionHead(FusionSpec spec, std::size_t dim, Rng& rng);

    Tensor fuse(const FwdCtx& ctx, const Tensor& id_vecs, const Tensor& mo_vecs) const;
    void params(ParamList& out, const std::string& prefix) const;
    const FusionSpec& spec() const { return spec_; }

private:
    FusionSpec spec_;
    Linear proj_;  // CON only
    std::vector<Linear> stack_;
};

class FusionEncoder final : public ItemEncoder {
public:
    FusionEncoder(std::unique_ptr<IdEmbeddingEncoder> id_side, std::unique_ptr<ItemEncoder> mo_side,
                  FusionSpec spec, Rng& rng);

    std::size_t dim() const override { return id_->dim(); }
    std::string kind() const override;
    Tensor encode(const FwdCtx& ctx, const std::vector<int>& items) override;
    void me_params(ParamList& out, const std::string& prefix) const override;
    void other_params(ParamList& out, const std::string& prefix) const override;

private:
    std::unique_ptr<IdEmbeddingEncoder> id_;
    std::unique_ptr<ItemEncoder> mo_;
    FusionHead head_;
};

// Masked-token pretraining for the text encoder core. Each epoch masks
// mask_prob of the word tokens (always replacing with the MASK id) and
// minimizes cross entropy over the vocabulary at masked positions only.
struct MlmReport {
    std::vector<real_t> epoch_losses;
};
MlmReport mlm_pretrain(TextEncoder& encoder, real_t mask_prob, int epochs, int batch_size,
                       real_t lr, std::uint64_t seed);

}  // namespace recbench::encoders

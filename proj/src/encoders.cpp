// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/encoders.hpp"

#include <algorithm>
#include <unordered_map>

#include "recbench/optim.hpp"

namespace recbench::encoders {

namespace {

// Deduplicates items preserving first-appearance order; fills positions with
// each request's index into the unique list.
std::vector<int> dedupe(const std::vector<int>& items, std::vector<int>& positions) {
    std::vector<int> unique;
    std::unordered_map<int, int> where;
    positions.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto [it, inserted] = where.emplace(items[i], static_cast<int>(unique.size()));
        if (inserted) unique.push_back(items[i]);
        positions[i] = it->second;
    }
    return unique;
}

}  // namespace

// --- ID embedding -------------------------------------------------------

IdEmbeddingEncoder::IdEmbeddingEncoder(std::size_t num_items, std::size_t dim, Rng& rng)
    : dim_(dim) {
    table_ = Tensor::param({num_items, dim});
    nn::init_trunc_normal(table_, rng);
}

Tensor IdEmbeddingEncoder::encode(const FwdCtx& ctx, const std::vector<int>& items) {
    return tensor::take_rows(ctx.tape, table_, items);
}

void IdEmbeddingEncoder::other_params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".table", table_});
}

// --- text encoder ---------------------------------------------------------

TextEncoder::TextEncoder(TextEncoderConfig cfg, std::vector<std::vector<int>> item_tokens, Rng& rng)
    : cfg_(cfg), item_tokens_(std::move(item_tokens)) {
    if (cfg_.vocab_size == 0) throw ConfigError("TextEncoder: vocab_size must be positive");
    tok_emb = Tensor::param({cfg_.vocab_size, cfg_.width});
    pos_emb = Tensor::param({cfg_.max_positions, cfg_.width});
    nn::init_trunc_normal(tok_emb, rng);
    nn::init_trunc_normal(pos_emb, rng);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) blocks.emplace_back(cfg_.width, cfg_.heads, rng);
    final_ln = nn::LayerNorm(cfg_.width);
    dt = Linear(cfg_.width, cfg_.out_dim, rng);
}

Tensor TextEncoder::encode_tokens(const FwdCtx& ctx, const std::vector<int>& tokens) {
    if (tokens.empty()) throw ContractError("TextEncoder: empty token sequence");
    if (tokens.size() > cfg_.max_positions) {
        throw ContractError("TextEncoder: sequence length " + std::to_string(tokens.size()) +
                            " exceeds positional table " + std::to_string(cfg_.max_positions));
    }
    std::vector<int> pos_idx(tokens.size());
    std::vector<std::uint8_t> valid(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        pos_idx[i] = static_cast<int>(i);
        valid[i] = tokens[i] != catalog::kPadId;
    }
    Tensor x = tensor::add(ctx.tape, tensor::take_rows(ctx.tape, tok_emb, tokens),
                           tensor::take_rows(ctx.tape, pos_emb, pos_idx));
    for (const auto& block : blocks) x = block.forward(ctx, x, /*causal=*/false, valid);
    return tensor::take_rows(ctx.tape, x, {0});  // CLS position
}

Tensor TextEncoder::encode(const FwdCtx& ctx, const std::vector<int>& items) {
    std::vector<int> positions;
    const auto unique = dedupe(items, positions);
    std::vector<Tensor> cls_rows;
    cls_rows.reserve(unique.size());
    for (int item : unique) {
        if (item < 0 || static_cast<std::size_t>(item) >= item_tokens_.size()) {
            throw BoundsError("TextEncoder: item " + std::to_string(item) + " out of range");
        }
        cls_rows.push_back(encode_tokens(ctx, item_tokens_[item]));
    }
    Tensor pooled = tensor::concat_rows(ctx.tape, cls_rows);
    pooled = final_ln.forward(ctx.tape, pooled);
    Tensor projected = dt.forward(ctx.tape, pooled);
    if (unique.size() == items.size()) return projected;
    return tensor::take_rows(ctx.tape, projected, positions);
}

void TextEncoder::me_params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".me.tok_emb", tok_emb});
    out.push_back({prefix + ".me.pos_emb", pos_emb});
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        blocks[b].params(out, prefix + ".me.block" + std::to_string(b));
    }
    final_ln.params(out, prefix + ".me.final_ln");
}

void TextEncoder::other_params(ParamList& out, const std::string& prefix) const {
    dt.params(out, prefix + ".dt");
}

// --- frozen features --------------------------------------------------------

FrozenFeatureEncoder::FrozenFeatureEncoder(std::vector<std::vector<real_t>> features,
                                           std::size_t adapter_depth, std::size_t out_dim,
                                           Rng& rng)
    : out_dim_(out_dim) {
    if (features.empty()) throw ConfigError("FrozenFeatureEncoder: no feature vectors");
    const std::size_t f = features.front().size();
    std::vector<real_t> flat;
    flat.reserve(features.size() * f);
    for (const auto& row : features) {
        if (row.size() != f) {
            throw ShapeError("FrozenFeatureEncoder: inconsistent feature widths " +
                             std::to_string(row.size()) + " vs " + std::to_string(f));
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    features_ = Tensor::from({features.size(), f}, std::move(flat));
    std::size_t in = f;
    for (std::size_t i = 0; i < adapter_depth; ++i) {
        adapters_.push_back(nn::make_stack_linear(in, out_dim, rng));
        in = out_dim;
    }
    dt_ = Linear(in, out_dim, rng);
}

Tensor FrozenFeatureEncoder::encode(const FwdCtx& ctx, const std::vector<int>& items) {
    Tensor x = tensor::take_rows(ctx.tape, features_, items);
    for (const auto& layer : adapters_) {
        x = tensor::gelu(ctx.tape, layer.forward(ctx.tape, x));
    }
    return dt_.forward(ctx.tape, x);
}

void FrozenFeatureEncoder::other_params(ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < adapters_.size(); ++i) {
        adapters_[i].params(out, prefix + ".adapter" + std::to_string(i));
    }
    dt_.params(out, prefix + ".dt");
}

// --- fusion -------------------------------------------------------------

namespace {

void validate_fusion_depth(std::size_t depth) {
    if (depth != 0 && depth != 2 && depth != 4 && depth != 6 && depth != 8) {
        throw ConfigError("FusionSpec: post-fusion depth must be one of {0,2,4,6,8}, got " +
                          std::to_string(depth));
    }
}

}  // namespace

FusionHead::FusionHead(FusionSpec spec, std::size_t dim, Rng& rng) : spec_(spec) {
    validate_fusion_depth(spec_.post_depth);
    if (spec_.mode == FusionMode::kCon) proj_ = Linear(2 * dim, dim, rng);
    for (std::size_t i = 0; i < spec_.post_depth; ++i) {
        stack_.push_back(nn::make_stack_linear(dim, dim, rng));
    }
}

Tensor FusionHead::fuse(const FwdCtx& ctx, const Tensor& id_vecs, const Tensor& mo_vecs) const {
    Tensor x;
    if (spec_.mode == FusionMode::kAdd) {
        if (id_vecs.cols() != mo_vecs.cols()) {
            throw ShapeError("fuse: ADD needs equal dims, " + tensor::shape_str(id_vecs) + " vs " +
                             tensor::shape_str(mo_vecs));
        }
        x = tensor::add(ctx.tape, id_vecs, mo_vecs);
    } else {
        x = proj_.forward(ctx.tape, tensor::concat_cols(ctx.tape, id_vecs, mo_vecs));
    }
    for (const auto& layer : stack_) {
        x = tensor::gelu(ctx.tape, layer.forward(ctx.tape, x));
    }
    return x;
}

void FusionHead::params(ParamList& out, const std::string& prefix) const {
    if (spec_.mode == FusionMode::kCon) proj_.params(out, prefix + ".proj");
    for (std::size_t i = 0; i < stack_.size(); ++i) {
        stack_[i].params(out, prefix + ".post" + std::to_string(i));
    }
}

FusionEncoder::FusionEncoder(std::unique_ptr<IdEmbeddingEncoder> id_side,
                             std::unique_ptr<ItemEncoder> mo_side, FusionSpec spec, Rng& rng)
    : id_(std::move(id_side)), mo_(std::move(mo_side)) {
    if (id_->dim() != mo_->dim()) {
        throw ConfigError("FusionEncoder: id dim " + std::to_string(id_->dim()) +
                          " != modality dim " + std::to_string(mo_->dim()));
    }
    head_ = FusionHead(spec, id_->dim(), rng);
}

std::string FusionEncoder::kind() const {
    return std::string("fusion_") + (head_.spec().mode == FusionMode::kAdd ? "add" : "con") + "_" +
           std::to_string(head_.spec().post_depth) + "+" + mo_->kind();
}

Tensor FusionEncoder::encode(const FwdCtx& ctx, const std::vector<int>& items) {
    Tensor id_vecs = id_->encode(ctx, items);
    Tensor mo_vecs = mo_->encode(ctx, items);
    return head_.fuse(ctx, id_vecs, mo_vecs);
}

void FusionEncoder::me_params(ParamList& out, const std::string& prefix) const {
    mo_->me_params(out, prefix);
}

void FusionEncoder::other_params(ParamList& out, const std::string& prefix) const {
    id_->other_params(out, prefix + ".id");
    mo_->other_params(out, prefix);
    head_.params(out, prefix + ".fusion");
}

// --- masked-token pretraining ---------------------------------------------

MlmReport mlm_pretrain(TextEncoder& encoder, real_t mask_prob, int epochs, int batch_size,
                       real_t lr, std::uint64_t seed) {
    if (mask_prob <= 0 || mask_prob >= 1) {
        throw ContractError("mlm_pretrain: mask_prob must be in (0,1)");
    }
    std::vector<int> corpus;
    for (std::size_t i = 0; i < encoder.item_tokens().size(); ++i) {
        if (encoder.item_tokens()[i].size() > 1) corpus.push_back(static_cast<int>(i));
    }
    if (corpus.empty()) throw ContractError("mlm_pretrain: corpus has no non-empty titles");

    const std::size_t width = encoder.config().width;
    const std::size_t vocab = encoder.config().vocab_size;
    Rng init_rng(derive_seed(seed, "mlm_head"));
    Linear head(width, vocab, init_rng);

    ParamList params;
    encoder.me_params(params, "mlm");
    head.params(params, "mlm.head");
    optim::AdamW opt({{params, lr, 0}});

    MlmReport report;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        Rng erng(derive_seed(seed, "mlm_epoch", static_cast<std::uint64_t>(epoch)));
        auto order = corpus;
        erng.shuffle(order);
        real_t epoch_loss = 0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            tensor::Tape tape;
            FwdCtx ctx{&tape, nullptr, 0};
            std::vector<Tensor> masked_rows;
            std::vector<int> targets;
            for (std::size_t i = start; i < end; ++i) {
                auto tokens = encoder.item_tokens()[order[i]];
                std::vector<int> masked_pos;
                for (std::size_t t = 0; t < tokens.size(); ++t) {
                    if (tokens[t] < catalog::kReservedTokens) continue;
                    if (erng.uniform() < mask_prob) {
                        targets.push_back(tokens[t]);
                        tokens[t] = catalog::kMaskId;
                        masked_pos.push_back(static_cast<int>(t));
                    }
                }
                if (masked_pos.empty()) continue;
                // re-run the block stack on the masked sequence, keep masked rows
                std::vector<int> pos_idx(tokens.size());
                std::vector<std::uint8_t> valid(tokens.size(), 1);
                for (std::size_t t = 0; t < tokens.size(); ++t) pos_idx[t] = static_cast<int>(t);
                Tensor x = tensor::add(ctx.tape, tensor::take_rows(ctx.tape, encoder.tok_emb, tokens),
                                       tensor::take_rows(ctx.tape, encoder.pos_emb, pos_idx));
                for (const auto& block : encoder.blocks) {
                    x = block.forward(ctx, x, /*causal=*/false, valid);
                }
                masked_rows.push_back(tensor::take_rows(ctx.tape, x, masked_pos));
            }
            if (masked_rows.empty()) continue;  // nothing masked: skip batch
            Tensor hidden = tensor::concat_rows(ctx.tape, masked_rows);
            hidden = encoder.final_ln.forward(ctx.tape, hidden);
            Tensor logits = head.forward(ctx.tape, hidden);
            Tensor loss = tensor::cross_entropy_rows(ctx.tape, logits, targets);
            const real_t loss_val = loss.item();
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
            epoch_loss += loss_val;
            ++batches;
        }
        report.epoch_losses.push_back(batches > 0 ? epoch_loss / static_cast<real_t>(batches)
                                                  : real_t(0));
    }
    return report;
}

}  // namespace recbench::encoders

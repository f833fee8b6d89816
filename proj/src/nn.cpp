// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/nn.hpp"

#include <cmath>

namespace recbench::nn {

void init_trunc_normal(Tensor& t, Rng& rng, real_t stddev) {
    for (auto& v : t.val()) v = static_cast<real_t>(rng.truncated_normal(stddev));
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
    w = Tensor::param({in, out});
    b = Tensor::param({out});
    init_trunc_normal(w, rng);
}

void Linear::params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

Linear make_stack_linear(std::size_t in, std::size_t out, Rng& rng) {
    Linear layer(in, out, rng);
    init_trunc_normal(layer.w, rng, std::sqrt(real_t(2) / static_cast<real_t>(in)));
    return layer;
}

LayerNorm::LayerNorm(std::size_t width) {
    gain = Tensor::param({width});
    std::fill(gain.val().begin(), gain.val().end(), real_t(1));
    bias = Tensor::param({width});
}

void LayerNorm::params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
}

TransformerBlock::TransformerBlock(std::size_t width_, std::size_t heads_, Rng& rng)
    : width(width_),
      heads(heads_),
      ln1(width_),
      ln2(width_),
      wq(width_, width_, rng),
      wk(width_, width_, rng),
      wv(width_, width_, rng),
      wo(width_, width_, rng),
      ff1(width_, 4 * width_, rng),
      ff2(4 * width_, width_, rng) {
    if (heads == 0 || width % heads != 0) {
        throw ConfigError("TransformerBlock: width " + std::to_string(width) +
                          " not divisible by heads " + std::to_string(heads));
    }
}

Tensor TransformerBlock::forward(const FwdCtx& ctx, const Tensor& x, bool causal,
                                 const std::vector<std::uint8_t>& key_valid) const {
    Tape* tape = ctx.tape;
    const real_t p = ctx.drop_p();

    Tensor a = ln1.forward(tape, x);
    Tensor q = wq.forward(tape, a);
    Tensor k = wk.forward(tape, a);
    Tensor v = wv.forward(tape, a);
    Tensor h = tensor::multi_head_attention(tape, q, k, v, heads, causal, key_valid, p, ctx.rng);
    h = wo.forward(tape, h);
    if (p > 0) h = tensor::dropout(tape, h, p, *ctx.rng);
    Tensor x1 = tensor::add(tape, x, h);

    Tensor f = ln2.forward(tape, x1);
    f = ff1.forward(tape, f);
    f = tensor::gelu(tape, f);
    f = ff2.forward(tape, f);
    if (p > 0) f = tensor::dropout(tape, f, p, *ctx.rng);
    return tensor::add(tape, x1, f);
}

void TransformerBlock::params(ParamList& out, const std::string& prefix) const {
    ln1.params(out, prefix + ".ln1");
    ln2.params(out, prefix + ".ln2");
    wq.params(out, prefix + ".wq");
    wk.params(out, prefix + ".wk");
    wv.params(out, prefix + ".wv");
    wo.params(out, prefix + ".wo");
    ff1.params(out, prefix + ".ff1");
    ff2.params(out, prefix + ".ff2");
}

Tensor attention_block(const FwdCtx& ctx, const TransformerBlock& block, const Tensor& x,
                       bool causal) {
    std::vector<std::uint8_t> all_valid(x.rows(), 1);
    return block.forward(ctx, x, causal, all_valid);
}

std::size_t total_params(const ParamList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.numel();
    return n;
}

}  // namespace recbench::nn

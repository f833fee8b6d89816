// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recbench/backbones.hpp"
#include "recbench/encoders.hpp"
#include "recbench/training.hpp"
#include "testing_util.hpp"

using namespace recbench;
using namespace recbench::backbones;
using tensor::Tape;
using tensor::Tensor;
using testutil::fill_uniform;

TEST_CASE("sasrec states have the input shape and causal dependence") {
    Rng rng(1);
    SasrecBackbone backbone(8, 12, 2, 2, rng);
    Tensor seq = Tensor::zeros({6, 8});
    fill_uniform(seq, rng);
    std::vector<std::uint8_t> valid(6, 1);
    nn::FwdCtx eval_ctx;
    Tensor states = backbone.user_states(eval_ctx, seq, valid);
    CHECK(states.rows() == 6);
    CHECK(states.cols() == 8);

    Tensor seq2 = Tensor::from(seq.shape(), seq.val());
    for (std::size_t j = 0; j < 8; ++j) seq2.at(4, j) += 5;  // perturb position 4
    Tensor states2 = backbone.user_states(eval_ctx, seq2, valid);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 8; ++j) CHECK(states2.at(i, j) == states.at(i, j));
    }
    bool later_changed = false;
    for (std::size_t j = 0; j < 8; ++j) later_changed = later_changed || states2.at(4, j) != states.at(4, j);
    CHECK(later_changed);
}

TEST_CASE("sasrec: all-pad input yields exactly zero states") {
    Rng rng(2);
    SasrecBackbone backbone(8, 12, 2, 2, rng);
    Tensor seq = Tensor::zeros({4, 8});
    fill_uniform(seq, rng);
    nn::FwdCtx eval_ctx;
    Tensor states = backbone.user_states(eval_ctx, seq, {0, 0, 0, 0});
    for (real_t v : states.val()) CHECK(v == 0);
}

TEST_CASE("sasrec: left-padded call equals the exact-length call on valid rows") {
    Rng rng(3);
    SasrecBackbone backbone(6, 10, 2, 2, rng);
    nn::FwdCtx eval_ctx;
    Tensor tail = Tensor::zeros({3, 6});
    fill_uniform(tail, rng);

    Tensor padded = Tensor::zeros({5, 6});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 6; ++j) padded.at(i + 2, j) = tail.at(i, j);
    }
    Tensor exact_states = backbone.user_states(eval_ctx, tail, {1, 1, 1});
    Tensor padded_states = backbone.user_states(eval_ctx, padded, {0, 0, 1, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(padded_states.at(i + 2, j) == doctest::Approx(exact_states.at(i, j)).epsilon(1e-12));
        }
    }
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 6; ++j) CHECK(padded_states.at(i, j) == 0);
    }
}

TEST_CASE("sasrec length 1 degenerates to a per-item transform") {
    Rng rng(4);
    SasrecBackbone backbone(6, 10, 2, 2, rng);
    nn::FwdCtx eval_ctx;
    Tensor one = Tensor::zeros({1, 6});
    fill_uniform(one, rng);
    Tensor states = backbone.user_states(eval_ctx, one, {1});
    CHECK(states.rows() == 1);
    for (real_t v : states.val()) CHECK(std::isfinite(v));
}

TEST_CASE("sasrec rejects sequences beyond the positional table") {
    Rng rng(5);
    SasrecBackbone backbone(4, 3, 1, 2, rng);
    Tensor seq = Tensor::zeros({5, 4});
    CHECK_THROWS_AS(backbone.user_states(nn::FwdCtx{}, seq, std::vector<std::uint8_t>(5, 1)),
                    ContractError);
}

TEST_CASE("dssm with zero tower layers returns the raw embedding row") {
    Rng rng(6);
    DssmBackbone backbone(10, 8, 0, rng);
    nn::FwdCtx eval_ctx;
    Tensor v = backbone.user_vectors(eval_ctx, {3});
    nn::ParamList params;
    backbone.params(params, "bb");
    const auto& table = params.front().value;
    for (std::size_t j = 0; j < 8; ++j) CHECK(v.at(0, j) == table.at(3, j));

    Tensor again = backbone.user_vectors(eval_ctx, {3});
    CHECK(again.val() == v.val());

    CHECK_THROWS_AS(backbone.user_vectors(eval_ctx, {11}), BoundsError);
}

TEST_CASE("dssm tower layers add the expected parameter count") {
    Rng rng(7);
    const std::size_t d = 8;
    DssmBackbone l0(10, d, 0, rng);
    DssmBackbone l3(10, d, 3, rng);
    nn::ParamList p0, p3;
    l0.params(p0, "bb");
    l3.params(p3, "bb");
    CHECK(nn::total_params(p3) - nn::total_params(p0) == 3 * (d * d + d));

    nn::FwdCtx eval_ctx;
    Tensor v = l3.user_vectors(eval_ctx, {0});
    CHECK(v.cols() == d);
}

TEST_CASE("score is a plain dot product with bilinearity") {
    Tensor u = Tensor::from({1, 3}, {1, 0, 2});
    Tensor v = Tensor::from({1, 3}, {0, 5, 0});
    CHECK(score(u, v) == 0);  // orthogonal

    Tensor w = Tensor::from({1, 3}, {3, -1, 1});
    Tensor w2 = Tensor::from({1, 3}, {6, -2, 2});
    CHECK(score(u, w2) == doctest::Approx(2 * score(u, w)).epsilon(1e-12));

    Tensor bad = Tensor::from({1, 2}, {1, 1});
    CHECK_THROWS_AS(score(u, bad), ShapeError);
}

TEST_CASE("batch scoring equals independent dot products") {
    Rng rng(8);
    const std::size_t m = 50, d = 8;
    Tensor user = Tensor::zeros({1, d});
    Tensor items = Tensor::zeros({m, d});
    fill_uniform(user, rng);
    fill_uniform(items, rng);
    Tensor scores = score_against(nullptr, user, items);
    REQUIRE(scores.numel() == m);
    for (std::size_t i = 0; i < m; ++i) {
        real_t acc = 0;
        for (std::size_t j = 0; j < d; ++j) acc += user.val()[j] * items.at(i, j);
        CHECK(scores.val()[i] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("backbone x encoder grid: all eight configurations smoke-train") {
    using namespace recbench::encoders;
    using namespace recbench::training;
    // tiny synthetic split
    Rng gen(99);
    const int users = 24, items = 12;
    catalog::DatasetSplit split;
    split.num_items = items;
    for (int u = 0; u < users; ++u) {
        std::vector<int> seq;
        for (int t = 0; t < 6; ++t) seq.push_back(static_cast<int>(gen.bounded(items)));
        split.valid.push_back(seq[4]);
        split.test.push_back(seq[5]);
        seq.resize(4);
        split.train.push_back(seq);
    }
    std::vector<std::vector<int>> tokens(items);
    Rng trng(5);
    for (auto& t : tokens) {
        t.push_back(catalog::kClsId);
        for (int i = 0; i < 4; ++i) {
            t.push_back(catalog::kReservedTokens + static_cast<int>(trng.bounded(20)));
        }
    }
    std::vector<std::vector<real_t>> feats(items, std::vector<real_t>(5));
    for (auto& f : feats) {
        for (auto& v : f) v = static_cast<real_t>(trng.normal());
    }

    const std::size_t d = 8;
    TextEncoderConfig tcfg;
    tcfg.vocab_size = 32;
    tcfg.width = 8;
    tcfg.blocks = 1;
    tcfg.heads = 2;
    tcfg.max_positions = 8;
    tcfg.out_dim = d;

    for (BackboneKind kind : {BackboneKind::kSasrec, BackboneKind::kDssm}) {
        for (int which = 0; which < 4; ++which) {
            Rng rng(1000 + which);
            std::unique_ptr<ItemEncoder> enc;
            switch (which) {
                case 0: enc = std::make_unique<IdEmbeddingEncoder>(items, d, rng); break;
                case 1: enc = std::make_unique<TextEncoder>(tcfg, tokens, rng); break;
                case 2: enc = std::make_unique<FrozenFeatureEncoder>(feats, 2, d, rng); break;
                default:
                    enc = std::make_unique<FusionEncoder>(
                        std::make_unique<IdEmbeddingEncoder>(items, d, rng),
                        std::make_unique<TextEncoder>(tcfg, tokens, rng),
                        FusionSpec{FusionMode::kCon, 2}, rng);
            }
            RecModel model(kind, std::move(enc), users, 8, 1, 2, 0, rng);
            HyperParams hp;
            hp.epochs = 2;
            hp.batch = 8;
            hp.seed = 42;
            hp.d = d;
            const auto report = train(model, split, hp);
            CHECK(report.epochs.size() == 2);
            CHECK_FALSE(report.collapsed);
            for (const auto& e : report.epochs) CHECK(std::isfinite(e.loss));
        }
    }
}

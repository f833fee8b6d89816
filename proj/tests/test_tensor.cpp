// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recbench/optim.hpp"
#include "testing_util.hpp"

using namespace recbench;
using tensor::Tape;
using tensor::Tensor;
using testutil::fill_uniform;
using testutil::max_grad_error;
using testutil::rel_err;

TEST_CASE("matmul identity and hand sums") {
    Tensor i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from({2, 2}, {3, 4, 5, 6});
    Tensor c = tensor::matmul(nullptr, i2, m);
    CHECK(c.val() == std::vector<real_t>{3, 4, 5, 6});

    Tensor a = Tensor::from({1, 2}, {1, 2});
    Tensor b = Tensor::from({2, 1}, {3, 4});
    CHECK(tensor::matmul(nullptr, a, b).item() == real_t(11));
}

TEST_CASE("matmul matches naive triple loop on random inputs") {
    Rng rng(42);
    Tensor a = Tensor::zeros({3, 4});
    Tensor b = Tensor::zeros({4, 2});
    fill_uniform(a, rng);
    fill_uniform(b, rng);
    Tensor c = tensor::matmul(nullptr, a, b);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            real_t acc = 0;
            for (std::size_t p = 0; p < 4; ++p) acc += a.at(i, p) * b.at(p, j);
            CHECK(c.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul dimension mismatch reports both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    try {
        tensor::matmul(nullptr, a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("backward: loss = x^2 at x=3 gives grad 6") {
    Tensor x = Tensor::param({1});
    x.val()[0] = 3;
    Tape tape;
    Tensor loss = tensor::mul(&tape, x, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6).epsilon(1e-12));
}

TEST_CASE("backward: loss = sigmoid(x) at 0 gives grad 0.25") {
    Tensor x = Tensor::param({1});
    Tape tape;
    Tensor loss = tensor::sigmoid(&tape, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss and detached ancestry") {
    Tensor x = Tensor::param({2, 2});
    Tape tape;
    Tensor y = tensor::scale(&tape, x, 2);
    CHECK_THROWS_AS(tape.backward(y), ContractError);

    Tape other;
    Tensor z = tensor::sum_all(&other, x);
    CHECK_THROWS_AS(tape.backward(z), ContractError);
}

TEST_CASE("two layer network gradients match finite differences") {
    Rng rng(7);
    Tensor w1 = Tensor::param({4, 8});
    Tensor b1 = Tensor::param({8});
    Tensor w2 = Tensor::param({8, 1});
    Tensor b2 = Tensor::param({1});
    Tensor x = Tensor::zeros({3, 4});
    fill_uniform(w1, rng, -0.5, 0.5);
    fill_uniform(b1, rng, -0.5, 0.5);
    fill_uniform(w2, rng, -0.5, 0.5);
    fill_uniform(b2, rng, -0.5, 0.5);
    fill_uniform(x, rng);

    auto forward = [&](Tape* tape) {
        Tensor h = tensor::gelu(tape, tensor::linear(tape, x, w1, b1));
        Tensor out = tensor::linear(tape, h, w2, b2);
        return tensor::mean_all(tape, out);
    };
    CHECK(max_grad_error({w1, b1, w2, b2}, forward) < 1e-4);
}

TEST_CASE("layer norm, softmax, attention gradients match finite differences") {
    Rng rng(11);
    const std::size_t L = 5, d = 6;
    Tensor q = Tensor::param({L, d});
    Tensor k = Tensor::param({L, d});
    Tensor v = Tensor::param({L, d});
    Tensor gain = Tensor::param({d});
    Tensor bias = Tensor::param({d});
    fill_uniform(q, rng);
    fill_uniform(k, rng);
    fill_uniform(v, rng);
    fill_uniform(gain, rng, 0.5, 1.5);
    fill_uniform(bias, rng, -0.2, 0.2);
    std::vector<std::uint8_t> valid = {1, 1, 0, 1, 1};

    auto forward = [&](Tape* tape) {
        Tensor h = tensor::multi_head_attention(tape, q, k, v, 2, true, valid);
        h = tensor::layer_norm(tape, h, gain, bias);
        return tensor::mean_all(tape, h);
    };
    CHECK(max_grad_error({q, k, v, gain, bias}, forward) < 1e-4);
}

TEST_CASE("softmax rows sum to one and masked entries are exactly zero") {
    Rng rng(3);
    Tensor x = Tensor::zeros({4, 6});
    fill_uniform(x, rng, -5, 5);
    std::vector<std::uint8_t> mask(24, 1);
    mask[1] = 0;
    mask[8] = 0;
    for (std::size_t j = 0; j < 6; ++j) mask[3 * 6 + j] = 0;  // fully masked row
    Tensor p = tensor::masked_softmax_rows(nullptr, x, mask);
    for (std::size_t i = 0; i < 3; ++i) {
        real_t s = 0;
        for (std::size_t j = 0; j < 6; ++j) s += p.at(i, j);
        CHECK(std::fabs(s - 1) < 1e-9);
    }
    CHECK(p.at(0, 1) == 0);
    CHECK(p.at(1, 2) == 0);
    for (std::size_t j = 0; j < 6; ++j) CHECK(p.at(3, j) == 0);
}

TEST_CASE("attention with single token puts weight 1 on self") {
    // L=1: the only valid key is the token itself, so output == v.
    Tensor q = Tensor::from({1, 4}, {0.3, -0.2, 0.8, 0.1});
    Tensor k = Tensor::from({1, 4}, {1.5, 0.2, -0.7, 0.4});
    Tensor v = Tensor::from({1, 4}, {1, 2, 3, 4});
    Tensor out = tensor::multi_head_attention(nullptr, q, k, v, 2, true, {1});
    CHECK(out.val() == v.val());
}

TEST_CASE("zero query/key projections give uniform attention rows") {
    const std::size_t L = 5, d = 4;
    Tensor q = Tensor::zeros({L, d});
    Tensor k = Tensor::zeros({L, d});
    Rng rng(5);
    Tensor v = Tensor::zeros({L, d});
    fill_uniform(v, rng);
    Tensor out = tensor::multi_head_attention(nullptr, q, k, v, 2, false,
                                              std::vector<std::uint8_t>(L, 1));
    for (std::size_t j = 0; j < d; ++j) {
        real_t mean = 0;
        for (std::size_t i = 0; i < L; ++i) mean += v.at(i, j);
        mean /= L;
        for (std::size_t i = 0; i < L; ++i) {
            CHECK(out.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("causal attention output is exactly unchanged by future perturbations") {
    Rng rng(13);
    const std::size_t L = 6, d = 4;
    Tensor q = Tensor::zeros({L, d}), k = Tensor::zeros({L, d}), v = Tensor::zeros({L, d});
    fill_uniform(q, rng);
    fill_uniform(k, rng);
    fill_uniform(v, rng);
    std::vector<std::uint8_t> valid(L, 1);
    Tensor base = tensor::multi_head_attention(nullptr, q, k, v, 2, true, valid);

    const std::size_t t = 3;
    for (std::size_t j = 0; j < d; ++j) {
        q.at(t + 1, j) += 10;
        k.at(t + 1, j) -= 7;
        v.at(t + 1, j) += 3;
    }
    Tensor pert = tensor::multi_head_attention(nullptr, q, k, v, 2, true, valid);
    for (std::size_t i = 0; i <= t; ++i) {
        for (std::size_t j = 0; j < d; ++j) CHECK(pert.at(i, j) == base.at(i, j));
    }
}

TEST_CASE("bce pair values") {
    Tensor z = Tensor::from({1}, {0});
    CHECK(tensor::bce_pair(nullptr, z, z).item() ==
          doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));

    Tensor pos = Tensor::from({1}, {1});
    Tensor neg = Tensor::from({1}, {-1});
    // 2 * (-log sigma(1)), sigma(1) = 0.731058578...
    CHECK(tensor::bce_pair(nullptr, pos, neg).item() ==
          doctest::Approx(-2 * std::log(0.7310585786300049)).epsilon(1e-12));

    Tensor big = Tensor::from({1}, {500});
    Tensor small = Tensor::from({1}, {-500});
    CHECK(tensor::bce_pair(nullptr, big, small).item() == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("bce pair gradient signs match the analytic derivative") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor pos = Tensor::param({1});
        Tensor neg = Tensor::param({1});
        pos.val()[0] = static_cast<real_t>(rng.normal(0, 3));
        neg.val()[0] = static_cast<real_t>(rng.normal(0, 3));
        Tape tape;
        Tensor loss = tensor::sum_all(&tape, tensor::bce_pair(&tape, pos, neg));
        tape.backward(loss);
        const real_t sp = 1 / (1 + std::exp(-pos.val()[0]));
        const real_t sn = 1 / (1 + std::exp(-neg.val()[0]));
        CHECK(pos.grad()[0] == doctest::Approx(sp - 1).epsilon(1e-10));
        CHECK(neg.grad()[0] == doctest::Approx(sn).epsilon(1e-10));
        CHECK(pos.grad()[0] < 0);
        CHECK(neg.grad()[0] > 0);
    }
}

TEST_CASE("dropout is identity in eval mode and unbiased in expectation") {
    Rng rng(23);
    Tensor x = Tensor::full({100, 10}, 1);
    Tensor eval_out = tensor::dropout(nullptr, x, 0, rng);
    CHECK(eval_out.val() == x.val());

    Rng drng(99);
    Tensor out = tensor::dropout(nullptr, x, 0.5, drng);
    real_t mean = 0;
    for (real_t v : out.val()) mean += v;
    mean /= static_cast<real_t>(out.numel());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("determinism: same seed gives bit-identical forward and gradients") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor w = Tensor::param({6, 6});
        nn::init_trunc_normal(w, rng, 0.02);
        Tensor x = Tensor::zeros({4, 6});
        fill_uniform(x, rng);
        Tape tape;
        Rng drop_rng(derive_seed(seed, "drop"));
        Tensor h = tensor::matmul(&tape, x, w);
        h = tensor::dropout(&tape, h, 0.2, drop_rng);
        Tensor loss = tensor::mean_all(&tape, tensor::gelu(&tape, h));
        tape.backward(loss);
        auto out = w.grad();
        out.push_back(loss.item());
        return out;
    };
    CHECK(run(1234) == run(1234));
    CHECK(run(1234) != run(1235));
}

TEST_CASE("adamw first step with zero decay") {
    Tensor p = Tensor::param({1});
    p.val()[0] = 1;
    optim::AdamW opt({{{{"p", p}}, 1e-3, 0}}, 0.9, 0.999, 1e-12);
    p.grad()[0] = 1;
    opt.step();
    // bias-corrected mhat = g, vhat = g^2 -> step = lr * sign(g)
    CHECK(p.val()[0] == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("adamw zero gradient is a fixed point without decay") {
    Tensor p = Tensor::param({3});
    p.val() = {0.5, -2, 7};
    optim::AdamW opt({{{{"p", p}}, 1e-3, 0}});
    const auto before = p.val();
    opt.step();
    opt.step();
    CHECK(p.val() == before);
}

TEST_CASE("adamw applies decoupled weight decay") {
    Tensor p = Tensor::param({1});
    p.val()[0] = 1;
    optim::AdamW opt({{{{"p", p}}, 1e-3, 0.01}}, 0.9, 0.999, 1e-12);
    p.grad()[0] = 1;
    opt.step();
    CHECK(std::fabs(p.val()[0] - ((1 - 1e-5) - 1e-3)) < 1e-9);
}

TEST_CASE("adamw names the parameter with a missing gradient") {
    Tensor p = Tensor::param({2});
    Tensor q = Tensor::param({2});
    q.node()->grad.clear();
    optim::AdamW opt({{{{"good", p}, {"bad", q}}, 1e-3, 0}});
    try {
        opt.step();
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
}

TEST_CASE("adamw rejects a parameter assigned to two groups") {
    Tensor p = Tensor::param({2});
    std::vector<optim::ParamGroup> groups;
    groups.push_back({{{"a", p}}, 1e-3, 0});
    groups.push_back({{{"b", p}}, 1e-4, 0});
    CHECK_THROWS_AS(optim::AdamW(std::move(groups)), ConfigError);
}

TEST_CASE("transformer block: causality with dropout disabled at eval") {
    Rng rng(31);
    nn::TransformerBlock block(8, 2, rng);
    Tensor x = Tensor::zeros({5, 8});
    fill_uniform(x, rng);
    nn::FwdCtx eval_ctx;  // no tape: eval mode
    std::vector<std::uint8_t> valid(5, 1);
    Tensor base = block.forward(eval_ctx, x, true, valid);
    CHECK(base.rows() == 5);
    CHECK(base.cols() == 8);

    Tensor x2 = Tensor::from(x.shape(), x.val());
    x2.at(4, 3) += 100;
    Tensor pert = block.forward(eval_ctx, x2, true, valid);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 8; ++j) CHECK(pert.at(i, j) == base.at(i, j));
    }
}

TEST_CASE("transformer block gradients match finite differences") {
    Rng rng(37);
    nn::TransformerBlock block(4, 2, rng);
    Tensor x = Tensor::param({3, 4});
    fill_uniform(x, rng);
    std::vector<std::uint8_t> valid(3, 1);

    nn::ParamList params;
    block.params(params, "blk");
    std::vector<Tensor> leaves = {x};
    for (auto& p : params) leaves.push_back(p.value);

    auto forward = [&](Tape* tape) {
        nn::FwdCtx ctx{tape, nullptr, 0};
        Tensor h = block.forward(ctx, x, true, valid);
        return tensor::mean_all(tape, h);
    };
    CHECK(max_grad_error(leaves, forward) < 1e-4);
}

// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "recbench/training.hpp"
#include "testing_util.hpp"

using namespace recbench;
using namespace recbench::training;
using tensor::Tape;
using tensor::Tensor;

namespace {

catalog::DatasetSplit random_split(int users, int items, int min_len, int max_len,
                                   std::uint64_t seed) {
    Rng rng(seed);
    catalog::DatasetSplit split;
    split.num_items = items;
    for (int u = 0; u < users; ++u) {
        const int len = min_len + static_cast<int>(rng.bounded(max_len - min_len + 1));
        std::vector<int> seq(len);
        for (auto& s : seq) s = static_cast<int>(rng.bounded(items));
        split.test.push_back(seq.back());
        split.valid.push_back(seq[len - 2]);
        seq.resize(len - 2);
        split.train.push_back(std::move(seq));
    }
    return split;
}

std::unique_ptr<RecModel> make_id_model(BackboneKind kind, int users, int items, int d,
                                        std::uint64_t seed) {
    Rng rng(seed);
    auto enc = std::make_unique<encoders::IdEmbeddingEncoder>(items, d, rng);
    return std::make_unique<RecModel>(kind, std::move(enc), users, 12, 1, 2, 0, rng);
}

std::unique_ptr<RecModel> make_text_model(int users, int items, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> tokens(items);
    Rng trng(seed + 1);
    for (auto& t : tokens) {
        t.push_back(catalog::kClsId);
        for (int i = 0; i < 5; ++i) {
            t.push_back(catalog::kReservedTokens + static_cast<int>(trng.bounded(40)));
        }
    }
    encoders::TextEncoderConfig tcfg;
    tcfg.vocab_size = 44 + catalog::kReservedTokens;
    tcfg.width = 8;
    tcfg.blocks = 1;
    tcfg.heads = 2;
    tcfg.max_positions = 8;
    tcfg.out_dim = d;
    auto enc = std::make_unique<encoders::TextEncoder>(tcfg, std::move(tokens), rng);
    return std::make_unique<RecModel>(BackboneKind::kSasrec, std::move(enc), users, 12, 1, 2, 0,
                                      rng);
}

}  // namespace

TEST_CASE("sample_negative: forced outcome and exclusion contract") {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) CHECK(sample_negative({0}, 2, rng) == 1);

    std::vector<int> positives = {2, 3, 5, 8, 13, 21, 34, 55, 89};
    std::set<int> pos_set(positives.begin(), positives.end());
    Rng rng2(2);
    for (int t = 0; t < 100000; ++t) {
        const int j = sample_negative(positives, 100, rng2);
        CHECK(pos_set.count(j) == 0);
        CHECK(j >= 0);
        CHECK(j < 100);
    }

    std::vector<int> all = {0, 1, 2};
    Rng rng3(3);
    CHECK_THROWS_AS(sample_negative(all, 3, rng3), SamplingError);
}

TEST_CASE("sample_negative is uniform over candidates (chi-square, alpha=0.01)") {
    std::vector<int> positives;
    for (int i = 0; i < 10; ++i) positives.push_back(i * 7);  // 10 positives in [0,100)
    Rng rng(12345);
    const int draws = 100000;
    std::vector<long> counts(100, 0);
    for (int t = 0; t < draws; ++t) ++counts[sample_negative(positives, 100, rng)];
    const double expected = static_cast<double>(draws) / 90.0;
    double chi2 = 0;
    for (int i = 0; i < 100; ++i) {
        if (std::binary_search(positives.begin(), positives.end(), i)) {
            CHECK(counts[i] == 0);
            continue;
        }
        const double dev = counts[i] - expected;
        chi2 += dev * dev / expected;
    }
    // chi-square critical value for df=89 at alpha=0.01 (Wilson-Hilferty) = 122.96
    CHECK(chi2 < 122.96);
}

TEST_CASE("negative draws are fresh across epoch streams") {
    std::vector<int> positives = {1, 2, 3};
    Rng e1(derive_seed(7, "batch", 1, 0));
    Rng e2(derive_seed(7, "batch", 2, 0));
    std::vector<int> draws1, draws2;
    for (int t = 0; t < 50; ++t) {
        draws1.push_back(sample_negative(positives, 500, e1));
        draws2.push_back(sample_negative(positives, 500, e2));
    }
    CHECK(draws1 != draws2);
}

TEST_CASE("bce_pair_loss reference values") {
    CHECK(bce_pair_loss(0, 0) == doctest::Approx(1.3862943611198906).epsilon(1e-12));
    CHECK(bce_pair_loss(1, -1) == doctest::Approx(0.6265233750364456).epsilon(1e-12));
    CHECK(bce_pair_loss(500, -500) == doctest::Approx(0).epsilon(1e-12));
    // loss positivity
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        CHECK(bce_pair_loss(static_cast<real_t>(rng.normal(0, 4)),
                            static_cast<real_t>(rng.normal(0, 4))) >= 0);
    }
}

TEST_CASE("seq2seq_loss: exactly L-1 terms, matching the per-position loop oracle") {
    Rng rng(6);
    const std::size_t d = 6;
    for (int true_len = 2; true_len <= 13; ++true_len) {
        const std::size_t positions = static_cast<std::size_t>(true_len) - 1;
        Tensor states = Tensor::zeros({positions, d});
        Tensor pos_vecs = Tensor::zeros({positions, d});
        Tensor neg_vecs = Tensor::zeros({positions, d});
        testutil::fill_uniform(states, rng);
        testutil::fill_uniform(pos_vecs, rng);
        testutil::fill_uniform(neg_vecs, rng);
        std::vector<std::uint8_t> valid(positions, 1);

        auto [sum, count] = seq2seq_loss(nullptr, states, pos_vecs, neg_vecs, valid);
        CHECK(count == true_len - 1);

        real_t oracle = 0;
        for (std::size_t t = 0; t < positions; ++t) {
            real_t ps = 0, ns = 0;
            for (std::size_t j = 0; j < d; ++j) {
                ps += states.at(t, j) * pos_vecs.at(t, j);
                ns += states.at(t, j) * neg_vecs.at(t, j);
            }
            oracle += bce_pair_loss(ps, ns);
        }
        CHECK(std::fabs(sum.item() - oracle) < 1e-12);
    }
}

TEST_CASE("seq2seq_loss masking: single live transition equals one bce term") {
    Rng rng(7);
    const std::size_t L = 5, d = 4;
    Tensor states = Tensor::zeros({L, d});
    Tensor pos_vecs = Tensor::zeros({L, d});
    Tensor neg_vecs = Tensor::zeros({L, d});
    testutil::fill_uniform(states, rng);
    testutil::fill_uniform(pos_vecs, rng);
    testutil::fill_uniform(neg_vecs, rng);
    std::vector<std::uint8_t> valid(L, 0);
    valid[L - 1] = 1;

    auto [sum, count] = seq2seq_loss(nullptr, states, pos_vecs, neg_vecs, valid);
    CHECK(count == 1);
    real_t ps = 0, ns = 0;
    for (std::size_t j = 0; j < d; ++j) {
        ps += states.at(L - 1, j) * pos_vecs.at(L - 1, j);
        ns += states.at(L - 1, j) * neg_vecs.at(L - 1, j);
    }
    CHECK(sum.item() == doctest::Approx(bce_pair_loss(ps, ns)).epsilon(1e-12));

    auto [zero_sum, zero_count] = seq2seq_loss(nullptr, states, pos_vecs, neg_vecs,
                                               std::vector<std::uint8_t>(L, 0));
    CHECK(zero_count == 0);  // batch-skip signal
    CHECK(zero_sum.item() == 0);
}

TEST_CASE("optimizer groups: id model is a single full-coverage group") {
    auto model = make_id_model(BackboneKind::kSasrec, 10, 20, 8, 11);
    HyperParams hp;
    const auto groups = build_optimizer_groups(*model, hp);
    REQUIRE(groups.size() == 1);
    CHECK(nn::total_params(groups[0].params) == nn::total_params(model->all_params()));
    CHECK(groups[0].lr == hp.lr);
}

TEST_CASE("optimizer groups: text model splits ME core from the rest") {
    auto model = make_text_model(10, 20, 8, 12);
    HyperParams hp;
    hp.lr_encoder = 5e-5;
    const auto groups = build_optimizer_groups(*model, hp);
    REQUIRE(groups.size() == 2);
    // group sizes partition the total
    CHECK(nn::total_params(groups[0].params) + nn::total_params(groups[1].params) ==
          nn::total_params(model->all_params()));
    // name audit: ME group is exactly the .me. prefix; DT-layer stays in rest
    for (const auto& p : groups[1].params) CHECK(p.name.find(".me.") != std::string::npos);
    bool dt_in_rest = false;
    for (const auto& p : groups[0].params) {
        CHECK(p.name.find(".me.") == std::string::npos);
        dt_in_rest = dt_in_rest || p.name.find("item_encoder.dt.") != std::string::npos;
    }
    CHECK(dt_in_rest);
    CHECK(groups[1].lr == doctest::Approx(5e-5));
}

TEST_CASE("collapse monitor flags the drop-to-zero curve and spares healthy ones") {
    // random baseline 2%: curve reaches 16% then falls to 0
    CollapseMonitor m1(0.02);
    CHECK_FALSE(m1.observe(0.16, false));
    CHECK(m1.observe(0.0, false));
    CHECK(m1.flagged());

    CollapseMonitor m2(0.02);
    for (double hr : {0.01, 0.03, 0.05, 0.08, 0.09, 0.10}) CHECK_FALSE(m2.observe(hr, false));
    CHECK_FALSE(m2.flagged());

    CollapseMonitor m3(0.02);
    CHECK(m3.observe(0.5, true));  // non-finite loss flags immediately

    // never exceeded 2x baseline: low values alone do not flag
    CollapseMonitor m4(0.02);
    CHECK_FALSE(m4.observe(0.01, false));
    CHECK_FALSE(m4.observe(0.005, false));
}

TEST_CASE("train: identical seeds give identical loss curves, different seeds differ") {
    const auto split = random_split(40, 30, 5, 9, 21);
    HyperParams hp;
    hp.epochs = 3;
    hp.batch = 16;
    hp.seed = 777;
    hp.d = 8;

    auto m1 = make_id_model(BackboneKind::kSasrec, 40, 30, 8, 1);
    auto m2 = make_id_model(BackboneKind::kSasrec, 40, 30, 8, 1);
    const auto r1 = train(*m1, split, hp);
    const auto r2 = train(*m2, split, hp);
    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
        CHECK(r1.epochs[e].loss == r2.epochs[e].loss);
        CHECK(r1.epochs[e].val_hr == r2.epochs[e].val_hr);
    }

    auto m3 = make_id_model(BackboneKind::kSasrec, 40, 30, 8, 1);
    HyperParams hp2 = hp;
    hp2.seed = 778;
    const auto r3 = train(*m3, split, hp2);
    bool any_diff = false;
    for (std::size_t e = 0; e < std::min(r1.epochs.size(), r3.epochs.size()); ++e) {
        any_diff = any_diff || r1.epochs[e].loss != r3.epochs[e].loss;
    }
    CHECK(any_diff);
}

TEST_CASE("train restores best-validation parameters and reports contiguous epochs") {
    const auto split = random_split(30, 25, 5, 8, 31);
    HyperParams hp;
    hp.epochs = 4;
    hp.batch = 8;
    hp.seed = 9;
    hp.d = 8;
    auto model = make_id_model(BackboneKind::kDssm, 30, 25, 8, 2);
    const auto report = train(*model, split, hp);
    CHECK(report.best_epoch >= 1);
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        CHECK(report.epochs[i].epoch == static_cast<int>(i) + 1);
    }
    CHECK(report.param_count > 0);
    CHECK(report.encoder_param_count == 0);
}

TEST_CASE("zero encoder learning rate freezes the ME bit-exactly while the rest trains") {
    const auto split = random_split(30, 25, 5, 8, 41);
    auto model = make_text_model(30, 25, 8, 3);
    const auto me_before = [&] {
        std::vector<std::vector<real_t>> vals;
        for (const auto& p : model->encoder_me_params()) vals.push_back(p.value.val());
        return vals;
    }();
    const auto rest_before = [&] {
        std::vector<std::vector<real_t>> vals;
        for (const auto& p : model->rest_params()) vals.push_back(p.value.val());
        return vals;
    }();

    HyperParams hp;
    hp.epochs = 2;
    hp.batch = 16;
    hp.seed = 5;
    hp.d = 8;
    hp.lr_encoder = 0;
    hp.patience = 100;
    train(*model, split, hp);

    const auto me_params = model->encoder_me_params();
    for (std::size_t i = 0; i < me_params.size(); ++i) {
        CHECK(me_params[i].value.val() == me_before[i]);
    }
    bool rest_changed = false;
    const auto rest_params = model->rest_params();
    for (std::size_t i = 0; i < rest_params.size(); ++i) {
        rest_changed = rest_changed || rest_params[i].value.val() != rest_before[i];
    }
    CHECK(rest_changed);
}

TEST_CASE("train report TSV round trip carries the footer") {
    TrainReport r;
    r.epochs.push_back({1, 0.5, 0.1, 0.05, 1.25});
    r.epochs.push_back({2, 0.4, 0.12, 0.06, 1.5});
    r.best_epoch = 2;
    r.collapsed = true;
    r.param_count = 1234;
    r.encoder_param_count = 56;
    r.total_seconds = 2.75;
    const auto parsed = TrainReport::from_tsv(r.to_tsv());
    CHECK(parsed.epochs.size() == 2);
    CHECK(parsed.best_epoch == 2);
    CHECK(parsed.collapsed);
    CHECK(parsed.param_count == 1234);
    CHECK(parsed.encoder_param_count == 56);
    CHECK(parsed.epochs[1].loss == doctest::Approx(0.4));
}

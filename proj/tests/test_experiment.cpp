// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "recbench/checkpoint.hpp"
#include "recbench/experiment.hpp"

using namespace recbench;
using namespace recbench::experiment;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
[data]
source = synth
synth_users = 120
synth_items = 60
synth_vocab = 80
synth_topics = 8
synth_min_inter = 8
synth_max_inter = 12
synth_seed = 5
max_seq_len = 8
min_interactions = 5

[model]
backbone = sasrec
encoder = id
d = 16
blocks = 1
enc_width = 16
enc_blocks = 1

[train]
seed = 31
epochs = 2
batch = 32

[eval]
warm_k = 20

[output]
dir = /tmp/rb_exp_a
)";

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

eval::RankingReport fake_report(const std::string& encoder, double hr, double ndcg,
                                std::uint64_t dataset_hash = 99) {
    eval::RankingReport r;
    r.n = 10;
    r.dataset_hash = dataset_hash;
    r.encoder = encoder;
    r.backbone = "sasrec";
    r.groups.push_back({"regular", 1000, hr, ndcg});
    return r;
}

}  // namespace

TEST_CASE("config parsing: resolved snapshot round-trips exactly") {
    const auto cfg = ExperimentConfig::from_string(kTinyConfig);
    const auto resolved = cfg.resolved_text();
    const auto cfg2 = ExperimentConfig::from_string(resolved);
    CHECK(cfg2.resolved_text() == resolved);
    CHECK(cfg2.hp.seed == 31);
    CHECK(cfg2.synth.num_users == 120);
    CHECK(cfg2.warm_ks == std::vector<int>{20});
}

TEST_CASE("config parsing rejects unknown keys and bad values with line info") {
    CHECK_THROWS_AS(ExperimentConfig::from_string("[data]\nsource = synth\nbogus_key = 1\n"),
                    ConfigError);
    try {
        ExperimentConfig::from_string("[train]\nepochs = banana\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(ExperimentConfig::from_string("[model]\nencoder = magic\n").validate(),
                    ConfigError);
}

TEST_CASE("id and text_e2e configs differ only in the encoder line") {
    auto a = ExperimentConfig::from_string(kTinyConfig);
    auto b = a;
    b.encoder = "text_e2e";
    std::istringstream sa(a.resolved_text()), sb(b.resolved_text());
    std::string la, lb;
    int diff_lines = 0;
    std::string diff;
    while (std::getline(sa, la) && std::getline(sb, lb)) {
        if (la != lb) {
            ++diff_lines;
            diff = lb;
        }
    }
    CHECK(diff_lines == 1);
    CHECK(diff == "encoder = text_e2e");
}

TEST_CASE("compare reproduces published relative improvements exactly") {
    // (18.68, 17.71) -> +5.48%ドル and (3.98, 4.01) -> -0.75%
    std::vector<eval::RankingReport> reports;
    reports.push_back(fake_report("id", 0.1771, 0.0401));
    reports.push_back(fake_report("text_e2e", 0.1868, 0.0398));
    const auto rows = compare(reports);
    REQUIRE(rows.size() == 2);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f%%", rows[0].improvement_pct);
    CHECK(std::string(buf) == "+5.48%");
    std::snprintf(buf, sizeof(buf), "%+.2f%%", rows[1].improvement_pct);
    CHECK(std::string(buf) == "-0.75%");

    const auto table = format_compare_table(rows);
    CHECK(table.find("+5.48%") != std::string::npos);
    CHECK(table.find("-0.75%") != std::string::npos);
}

TEST_CASE("compare of identical reports is 0.00% everywhere") {
    std::vector<eval::RankingReport> reports;
    reports.push_back(fake_report("id", 0.077, 0.031));
    reports.push_back(fake_report("text_e2e", 0.077, 0.031));
    for (const auto& row : compare(reports)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.2f%%", row.improvement_pct);
        CHECK(std::string(buf) == "+0.00%");
    }
}

TEST_CASE("compare refuses mismatched datasets or N") {
    std::vector<eval::RankingReport> mismatch;
    mismatch.push_back(fake_report("id", 0.1, 0.05, 1));
    mismatch.push_back(fake_report("text_e2e", 0.1, 0.05, 2));
    CHECK_THROWS_AS(compare(mismatch), ContractError);

    std::vector<eval::RankingReport> bad_n;
    bad_n.push_back(fake_report("id", 0.1, 0.05));
    bad_n.push_back(fake_report("text_e2e", 0.1, 0.05));
    bad_n[1].n = 20;
    CHECK_THROWS_AS(compare(bad_n), ContractError);

    std::vector<eval::RankingReport> one_sided;
    one_sided.push_back(fake_report("id", 0.1, 0.05));
    one_sided.push_back(fake_report("id", 0.2, 0.1));
    CHECK_THROWS_AS(compare(one_sided), ContractError);
}

TEST_CASE("cost report tabulates params and epoch seconds; empty input is empty") {
    CHECK(cost_report({}).empty());
    training::TrainReport tr;
    tr.param_count = 5000;
    tr.encoder_param_count = 1200;
    tr.epochs.push_back({1, 0.5, 0.1, 0.05, 2.0});
    tr.epochs.push_back({2, 0.4, 0.1, 0.05, 4.0});
    const auto rows = cost_report({{"run_a", tr}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].params == 5000);
    CHECK(rows[0].seconds_per_epoch == doctest::Approx(3.0));
    const auto table = format_cost_table(rows);
    CHECK(table.find("run_a") != std::string::npos);
}

TEST_CASE("run_experiment writes artifacts and is byte-deterministic") {
    auto cfg = ExperimentConfig::from_string(kTinyConfig);
    const auto dir_a = fresh_dir("rb_exp_a");
    const auto dir_b = fresh_dir("rb_exp_b");

    cfg.out_dir = dir_a.string();
    const auto run_a = run_experiment(cfg);
    cfg.out_dir = dir_b.string();
    const auto run_b = run_experiment(cfg);

    for (const char* name : {"config.resolved", "train_report.tsv", "ranking_report.tsv",
                             "ranking_report.json", "checkpoint.bin"}) {
        CHECK(fs::exists(dir_a / name));
    }
    // ranking reports are byte-identical across runs of the same config
    CHECK(read_text_file((dir_a / "ranking_report.tsv").string()) ==
          read_text_file((dir_b / "ranking_report.tsv").string()));
    CHECK(read_text_file((dir_a / "ranking_report.json").string()) ==
          read_text_file((dir_b / "ranking_report.json").string()));
    // train reports agree on everything except wall-clock columns
    REQUIRE(run_a.train_report.epochs.size() == run_b.train_report.epochs.size());
    for (std::size_t e = 0; e < run_a.train_report.epochs.size(); ++e) {
        CHECK(run_a.train_report.epochs[e].loss == run_b.train_report.epochs[e].loss);
        CHECK(run_a.train_report.epochs[e].val_hr == run_b.train_report.epochs[e].val_hr);
    }

    // the resolved snapshot reproduces the run byte-for-byte
    auto from_snapshot =
        ExperimentConfig::from_file((dir_a / "config.resolved").string());
    const auto dir_c = fresh_dir("rb_exp_c");
    from_snapshot.out_dir = dir_c.string();
    run_experiment(from_snapshot);
    CHECK(read_text_file((dir_a / "ranking_report.json").string()) ==
          read_text_file((dir_c / "ranking_report.json").string()));
}

TEST_CASE("checkpoint round trip restores every block bit-exactly") {
    auto cfg = ExperimentConfig::from_string(kTinyConfig);
    const auto dir = fresh_dir("rb_exp_ckpt");
    cfg.out_dir = dir.string();
    run_experiment(cfg);

    auto data = prepare_data(cfg);
    auto model = build_model(cfg, data);
    // scramble, then restore
    for (auto& p : model->all_params()) {
        for (auto& v : p.value.val()) v = 123;
    }
    checkpoint::load_into(model->all_params(), (dir / "checkpoint.bin").string());
    const auto blocks = checkpoint::load_blocks((dir / "checkpoint.bin").string());
    CHECK(blocks.size() == model->all_params().size());
    for (const auto& p : model->all_params()) {
        const auto& blk = blocks.at(p.name);
        REQUIRE(blk.values.size() == p.value.numel());
        for (std::size_t i = 0; i < blk.values.size(); ++i) {
            CHECK(p.value.val()[i] == static_cast<real_t>(blk.values[i]));
        }
    }

    // evaluate_checkpoint matches the run's test report
    const auto report = evaluate_checkpoint(cfg, (dir / "checkpoint.bin").string());
    const auto saved = eval::RankingReport::from_json(
        read_text_file((dir / "ranking_report.json").string()));
    CHECK(report.find_group("regular")->hr == saved.find_group("regular")->hr);
    CHECK(report.find_group("regular")->ndcg == saved.find_group("regular")->ndcg);
}

TEST_CASE("grid run creates one artifact directory per config") {
    const auto dir = fresh_dir("rb_grid");
    // 8 cells: 2 backbones x 4 encoders on a tiny dataset
    const char* backbones[] = {"sasrec", "dssm"};
    const char* encoders[] = {"id", "text_e2e", "frozen", "fusion"};
    std::string grid_text;
    for (const auto* bb : backbones) {
        for (const auto* enc : encoders) {
            auto cfg = ExperimentConfig::from_string(kTinyConfig);
            cfg.backbone = bb;
            cfg.encoder = enc;
            cfg.hp.epochs = 1;
            cfg.adapter_depth = 2;
            cfg.fusion_depth = 2;
            const std::string name = std::string(bb) + "_" + enc + ".cfg";
            write_text_file((dir / name).string(), cfg.resolved_text());
            grid_text += name + "\n";
        }
    }
    write_text_file((dir / "grid.txt").string(), grid_text);
    const auto results = run_grid((dir / "grid.txt").string(), (dir / "runs").string());
    CHECK(results.size() == 8);
    int subdirs = 0;
    for (const auto& entry : fs::directory_iterator(dir / "runs")) {
        subdirs += entry.is_directory() ? 1 : 0;
        CHECK(fs::exists(entry.path() / "ranking_report.json"));
    }
    CHECK(subdirs == 8);
}

TEST_CASE("experiment configs cannot reference the ground-truth file") {
    CHECK_THROWS_AS(
        ExperimentConfig::from_string("[data]\nground_truth = /tmp/ground_truth.tsv\n"),
        ConfigError);
}

#ifdef RECBENCH_CLI_PATH
TEST_CASE("cli exit codes: success and config error") {
    const auto dir = fresh_dir("rb_cli");
    const std::string cli = RECBENCH_CLI_PATH;

    auto cfg = ExperimentConfig::from_string(kTinyConfig);
    cfg.out_dir = (dir / "run").string();
    write_text_file((dir / "ok.cfg").string(), cfg.resolved_text());
    const int ok = std::system(
        (cli + " train --config " + (dir / "ok.cfg").string() + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(ok) == 0);

    write_text_file((dir / "bad.cfg").string(), "[model]\nencoder = nonsense\n");
    const int bad = std::system(
        (cli + " train --config " + (dir / "bad.cfg").string() + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(bad) == 2);

    // gen requires a seed
    const int noseed =
        std::system((cli + " gen --users 10 --items 20 > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(noseed) == 2);

    // gen then prepare round trip through real files
    const int gen = std::system((cli + " gen --users 60 --items 40 --vocab 80 --min-inter 6" +
                                 " --max-inter 9 --seed 3 --out " + (dir / "ds").string() +
                                 " > /dev/null 2>&1")
                                    .c_str());
    CHECK(WEXITSTATUS(gen) == 0);
    CHECK(fs::exists(dir / "ds" / "interactions.tsv"));
    CHECK(fs::exists(dir / "ds" / "items.tsv"));
    CHECK(fs::exists(dir / "ds" / "ground_truth.tsv"));

    std::string file_cfg = "[data]\nsource = files\ninteractions = " +
                           (dir / "ds" / "interactions.tsv").string() +
                           "\nitems = " + (dir / "ds" / "items.tsv").string() +
                           "\nmax_seq_len = 8\n[model]\nd = 16\nblocks = 1\n" +
                           "[train]\nseed = 4\nepochs = 1\n[output]\ndir = " +
                           (dir / "run2").string() + "\n";
    write_text_file((dir / "files.cfg").string(), file_cfg);
    const int files_run = std::system(
        (cli + " train --config " + (dir / "files.cfg").string() + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(files_run) == 0);
}
#endif

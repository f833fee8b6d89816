// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recbench/catalog.hpp"
#include "recbench/eval.hpp"
#include "recbench/synthgen.hpp"
#include "recbench/training.hpp"

namespace recbench::experiment {

// Flat key=value config with [section] headers. Every field below has a
// default; the resolved snapshot written next to each run's artifacts lists
// all of them, so "what ran" is never ambiguous.
struct ExperimentConfig {
    // [data]
    std::string source = "synth";  // synth | files
    std::string interactions;      // files source
    std::string items;             // files source, optional
    synthgen::GenConfig synth;
    int min_interactions = 5;
    int max_seq_len = 23;
    int warm_filter_k = 0;  // keep only items with >= k occurrences in the raw log

    // [model]
    std::string backbone = "sasrec";  // sasrec | dssm
    std::string encoder = "id";       // id | text_e2e | frozen | fusion
    int d = 64;
    int blocks = 2;
    int heads = 2;
    int dssm_layers = 0;
    int enc_width = 64;
    int enc_blocks = 2;
    int enc_heads = 2;
    int max_title_tokens = 30;
    int adapter_depth = 0;            // frozen encoder
    std::string fusion_mode = "add";  // add | con
    int fusion_depth = 0;
    std::string fusion_modality = "text_e2e";  // text_e2e | frozen
    int mlm_epochs = 0;
    real_t mlm_mask_prob = 0.15;
    real_t mlm_lr = 1e-3;
    int mlm_batch = 64;

    // [train]
    training::HyperParams hp;
    bool seed_set = false;

    // [eval]
    int eval_n = 10;
    std::vector<int> warm_ks = {20, 50, 200};
    bool exclude_history = false;

    // [output]
    std::string out_dir;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);
    std::string resolved_text() const;
    // Identity of "what ran" excluding the output location.
    std::uint64_t config_hash() const;
    void validate() const;
};

// Everything the pipeline derives from a config before model building.
struct PreparedData {
    catalog::InteractionLog log;  // filtered + truncated
    catalog::DatasetSplit split;
    catalog::BoundItems items;
    bool has_items = false;
    std::uint64_t dataset_hash = 0;  // hash of the raw (pre-filter) dataset
    std::vector<long> original_item_counts;  // per data.log item, counted on the raw log
    synthgen::GroundTruth truth;     // synth source only
    bool has_truth = false;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

std::unique_ptr<training::RecModel> build_model(const ExperimentConfig& cfg,
                                                const PreparedData& data);

struct RunResult {
    training::TrainReport train_report;
    eval::RankingReport ranking_report;
    std::string out_dir;
    bool collapsed = false;
};

// Deterministic pipeline: load/generate -> filter -> split -> build -> train
// -> evaluate -> write artifacts (resolved config, train/ranking reports,
// best-validation checkpoint).
RunResult run_experiment(const ExperimentConfig& cfg);

// One run per config path listed in the grid file; each lands in
// base_out_dir/<config stem>/.
std::vector<RunResult> run_grid(const std::string& grid_path, const std::string& base_out_dir);

// Re-evaluates a checkpoint produced by run_experiment.
eval::RankingReport evaluate_checkpoint(const ExperimentConfig& cfg,
                                        const std::string& checkpoint_path);

// Relative improvement of the best modality-based report over the best
// ID-based report, per metric on the regular group.
struct CompareRow {
    std::string metric;
    double best_id = 0;
    double best_modality = 0;
    double improvement_pct = 0;  // signed percent, two decimals when printed
};
std::vector<CompareRow> compare(const std::vector<eval::RankingReport>& reports);
std::string format_compare_table(const std::vector<CompareRow>& rows);
double relative_improvement_pct(double best_modality, double best_id);

struct CostRow {
    std::string label;
    long params = 0;
    long encoder_params = 0;
    double seconds_per_epoch = 0;
};
std::vector<CostRow> cost_report(
    const std::vector<std::pair<std::string, training::TrainReport>>& reports);
std::string format_cost_table(const std::vector<CostRow>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace recbench::experiment

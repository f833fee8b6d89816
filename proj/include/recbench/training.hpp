// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "recbench/backbones.hpp"
#include "recbench/catalog.hpp"
#include "recbench/encoders.hpp"
#include "recbench/eval.hpp"
#include "recbench/optim.hpp"

namespace recbench::training {

using nn::ParamList;
using tensor::Tape;
using tensor::Tensor;

struct HyperParams {
    real_t lr = 1e-4;          // non-encoder modules
    real_t lr_encoder = -1;    // modality encoder; < 0 means "same as lr"
    int batch = 64;
    real_t weight_decay = 0.01;
    real_t dropout = 0.1;
    int d = 64;
    int epochs = 30;
    int patience = 5;
    int eval_n = 10;
    std::uint64_t seed = 1;
    real_t collapse_epsilon = 1.0;

    real_t resolved_lr_encoder() const { return lr_encoder < 0 ? lr : lr_encoder; }
    void validate() const;
};

struct EpochStat {
    int epoch = 0;
    real_t loss = 0;
    double val_hr = 0;
    double val_ndcg = 0;
    double seconds = 0;
};

struct TrainReport {
    std::vector<EpochStat> epochs;
    bool collapsed = false;
    int collapse_epoch = -1;
    int best_epoch = -1;
    double best_val_hr = 0;
    double best_val_ndcg = 0;
    long param_count = 0;
    long encoder_param_count = 0;
    double total_seconds = 0;
    std::string label;

    std::string to_tsv() const;
    static TrainReport from_tsv(const std::string& text);
};

// Uniform draw from the complement of the user's observed items.
// sorted_positives must be sorted ascending and deduplicated.
int sample_negative(const std::vector<int>& sorted_positives, int num_items, Rng& rng);

// Same, restricted to an explicit candidate pool (the training loop samples
// from items that actually occur in training data; an item nobody trained on
// cannot be drawn as a negative).
int sample_negative_from(const std::vector<int>& sorted_positives,
                         const std::vector<int>& candidates, Rng& rng);

// Stable pairwise binary cross entropy for one (positive, negative) pair.
real_t bce_pair_loss(real_t pos_score, real_t neg_score);

// Sum of pairwise BCE terms over the valid prediction positions of one
// sequence. Returns the (taped) sum and the number of contributing terms;
// zero terms signals a skippable batch entry.
std::pair<Tensor, long> seq2seq_loss(Tape* tape, const Tensor& user_states, const Tensor& pos_vecs,
                                     const Tensor& neg_vecs,
                                     const std::vector<std::uint8_t>& valid);

// Latches when validation HR@10 falls back below epsilon * random baseline
// after having exceeded twice the baseline, or on a non-finite loss.
class CollapseMonitor {
public:
    CollapseMonitor(double random_baseline_hr, double epsilon = 1.0)
        : baseline_(random_baseline_hr), eps_(epsilon) {}

    bool observe(double val_hr, bool loss_non_finite);
    bool flagged() const { return flagged_; }

private:
    double baseline_, eps_;
    bool exceeded_ = false;
    bool flagged_ = false;
};

enum class BackboneKind { kSasrec, kDssm };

// A backbone plus a pluggable item encoder; everything `train` and the
// evaluation scorers need.
class RecModel {
public:
    RecModel(BackboneKind kind, std::unique_ptr<encoders::ItemEncoder> encoder,
             std::size_t num_users, std::size_t max_len, std::size_t blocks, std::size_t heads,
             std::size_t dssm_tower_layers, Rng& rng);

    BackboneKind backbone_kind() const { return kind_; }
    std::string backbone_name() const { return kind_ == BackboneKind::kSasrec ? "sasrec" : "dssm"; }
    encoders::ItemEncoder& encoder() { return *encoder_; }
    const encoders::ItemEncoder& encoder() const { return *encoder_; }
    backbones::SasrecBackbone& sasrec() { return *sasrec_; }
    backbones::DssmBackbone& dssm() { return *dssm_; }
    std::size_t dim() const { return encoder_->dim(); }

    ParamList encoder_me_params() const;  // modality-encoder core
    ParamList rest_params() const;        // everything else
    ParamList all_params() const;

    // Full-catalog scorer bound to a split; encodes the item bank eagerly.
    std::unique_ptr<eval::Scorer> make_scorer(const catalog::DatasetSplit& split,
                                              eval::TargetKind target) const;

    std::vector<std::vector<real_t>> snapshot_params() const;
    void restore_params(const std::vector<std::vector<real_t>>& snapshot);

private:
    BackboneKind kind_;
    std::unique_ptr<encoders::ItemEncoder> encoder_;
    std::unique_ptr<backbones::SasrecBackbone> sasrec_;
    std::unique_ptr<backbones::DssmBackbone> dssm_;
};

// Two optimizer groups: the modality-encoder core at its own learning rate,
// everything else at the base rate. Models without an encoder core get one.
std::vector<optim::ParamGroup> build_optimizer_groups(const RecModel& model,
                                                      const HyperParams& hp);

// Epoch loop: seeded shuffles, fresh negatives each epoch, AdamW steps,
// per-epoch validation, early stopping, collapse monitoring. The model is
// left holding its best-validation parameters.
TrainReport train(RecModel& model, const catalog::DatasetSplit& split, const HyperParams& hp);

}  // namespace recbench::training

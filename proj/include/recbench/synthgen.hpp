// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "recbench/catalog.hpp"
#include "recbench/eval.hpp"

namespace recbench::synthgen {

// Synthetic catalog generator. Interactions are driven by latent topic
// vectors; titles and feature vectors are emitted from the same latents, so
// content is informative about preference by construction.
struct GenConfig {
    int num_users = 2000;
    int num_items = 500;
    int topics = 8;
    int tokens_per_title = 8;
    int vocab_size = 800;
    int min_interactions = 20;
    int max_interactions = 40;
    double cold_fraction = 0.1;   // reserved items with 1..9 training occurrences
    double zipf_exponent = 1.0;   // popularity skew, multiplicative
    double tau = 1.0;             // preference noise temperature
    std::uint64_t seed = 1;

    void validate() const;
};

struct GroundTruth {
    int topics = 0;
    double tau = 1.0;
    std::vector<std::vector<real_t>> item_latents;  // per item, length topics
    std::vector<std::vector<real_t>> user_latents;  // per user, length topics
    std::vector<double> popularity_weight;          // zipf weight; 0 for reserved items
    std::vector<int> cold_items;                    // generator item indices
    std::vector<int> new_items;

    double affinity(int user, int item) const;
    // Probability that the first draw for `user` lands on `item`.
    double first_draw_prob(int user, int item) const;
};

struct GenResult {
    catalog::InteractionLog log;          // user keys "u<i>", item keys "i<j>"
    std::vector<catalog::RawItem> items;  // one row per item, generator order
    GroundTruth truth;
};

GenResult generate(const GenConfig& cfg);

// Ranks held-out targets by the true affinity w_u . z_i; the ceiling any
// trained model is compared against. Keys map split indices back to
// generator indices, so the oracle survives downstream re-indexing.
eval::RankingReport oracle_metrics(const GroundTruth& truth, const catalog::DatasetSplit& split,
                                   const std::vector<std::string>& user_keys,
                                   const std::vector<std::string>& item_keys,
                                   const eval::EvalOptions& opts);

// `item_index<TAB>z-vector` rows in generator order; oracle-only output that
// must never enter a model's input path.
void save_ground_truth(const GroundTruth& truth, const std::string& path);

}  // namespace recbench::synthgen

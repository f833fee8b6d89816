// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recbench/catalog.hpp"
#include "recbench/common.hpp"

namespace recbench::eval {

// Scores every catalog item for one user; the only thing `evaluate` needs
// from a model. Scores are raw (no sigmoid): ranking is monotone-invariant.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual int num_items() const = 0;
    // Target kind selects the user context: validation targets see the
    // training history, test targets see training + validation.
    virtual std::vector<real_t> score_user(int user) const = 0;
};

// 1-based rank of the target among all m scores. Ties break by item index:
// rank = 1 + |{j != t : s_j > s_t}| + |{j != t : s_j == s_t and j < t}|.
int full_rank(const std::vector<real_t>& scores, int target);

// Same, with a set of item indices excluded from the competition.
int full_rank_excluding(const std::vector<real_t>& scores, int target,
                        const std::vector<int>& excluded);

inline int hr_at_n(int rank, int n = 10) { return rank <= n ? 1 : 0; }
double ndcg_at_n(int rank, int n = 10);

struct GroupMetrics {
    std::string name;
    long users = 0;
    double hr = 0;
    double ndcg = 0;
};

struct RankingReport {
    int n = 10;
    std::uint64_t seed = 0;
    std::uint64_t dataset_hash = 0;
    std::uint64_t config_hash = 0;
    std::string backbone;
    std::string encoder;
    std::vector<GroupMetrics> groups;

    const GroupMetrics* find_group(const std::string& name) const;
    std::string to_tsv() const;
    std::string to_json() const;
    static RankingReport from_json(const std::string& text);
};

struct EvalGroup {
    std::string name;
    std::vector<int> users;
};

enum class TargetKind { kValidation, kTest };

struct EvalOptions {
    int n = 10;
    TargetKind target = TargetKind::kTest;
    bool exclude_history = false;  // drop the user's own history from the pool
};

// Ranks every user's held-out target with the scorer and averages HR/NDCG
// per group (plus the implicit "regular" group of all users). Empty groups
// are omitted from the report.
RankingReport evaluate(const Scorer& scorer, const catalog::DatasetSplit& split,
                       const std::vector<EvalGroup>& groups, const EvalOptions& opts);

// Convenience: overall HR/NDCG only (validation loop usage).
std::pair<double, double> overall_metrics(const Scorer& scorer,
                                          const catalog::DatasetSplit& split,
                                          const EvalOptions& opts);

// Standard grouping: cold/new/other partition plus warm-K subsets. Warm
// membership counts against warm_counts when given (the originating log's
// occurrence counts, per the Warm-K convention), else the split's train part.
std::vector<EvalGroup> standard_groups(const catalog::DatasetSplit& split,
                                       const std::vector<int>& warm_ks,
                                       const std::vector<long>* warm_counts = nullptr);

}  // namespace recbench::eval

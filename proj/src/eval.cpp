// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace recbench::eval {

int full_rank(const std::vector<real_t>& scores, int target) {
    return full_rank_excluding(scores, target, {});
}

int full_rank_excluding(const std::vector<real_t>& scores, int target,
                        const std::vector<int>& excluded) {
    if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
        throw BoundsError("full_rank: target " + std::to_string(target) + " outside catalog of " +
                          std::to_string(scores.size()));
    }
    std::vector<char> skip(scores.size(), 0);
    for (int e : excluded) {
        if (e >= 0 && static_cast<std::size_t>(e) < scores.size()) skip[e] = 1;
    }
    const real_t st = scores[target];
    int rank = 1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (static_cast<int>(j) == target || skip[j]) continue;
        if (scores[j] > st || (scores[j] == st && static_cast<int>(j) < target)) ++rank;
    }
    return rank;
}

double ndcg_at_n(int rank, int n) {
    if (rank < 1) throw ContractError("ndcg_at_n: rank must be >= 1");
    if (rank > n) return 0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

const GroupMetrics* RankingReport::find_group(const std::string& name) const {
    for (const auto& g : groups) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

std::string RankingReport::to_tsv() const {
    std::ostringstream os;
    os << "group\tusers\thr@" << n << "\tndcg@" << n << "\n";
    char buf[64];
    for (const auto& g : groups) {
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", g.hr, g.ndcg);
        os << g.name << '\t' << g.users << '\t' << buf << '\n';
    }
    return os.str();
}

std::string RankingReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["seed"] = seed;
    j["dataset_hash"] = dataset_hash;
    j["config_hash"] = config_hash;
    j["backbone"] = backbone;
    j["encoder"] = encoder;
    j["groups"] = nlohmann::json::array();
    for (const auto& g : groups) {
        j["groups"].push_back({{"name", g.name}, {"users", g.users}, {"hr", g.hr}, {"ndcg", g.ndcg}});
    }
    return j.dump(2) + "\n";
}

RankingReport RankingReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RankingReport r;
    r.n = j.at("n").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.dataset_hash = j.at("dataset_hash").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::uint64_t>();
    r.backbone = j.at("backbone").get<std::string>();
    r.encoder = j.at("encoder").get<std::string>();
    for (const auto& g : j.at("groups")) {
        r.groups.push_back({g.at("name").get<std::string>(), g.at("users").get<long>(),
                            g.at("hr").get<double>(), g.at("ndcg").get<double>()});
    }
    return r;
}

namespace {

struct UserOutcome {
    int rank = 0;
};

GroupMetrics reduce_group(const std::string& name, const std::vector<int>& users,
                          const std::vector<UserOutcome>& outcomes, int n) {
    GroupMetrics g;
    g.name = name;
    g.users = static_cast<long>(users.size());
    double hr = 0, ndcg = 0;
    for (int u : users) {
        hr += hr_at_n(outcomes[u].rank, n);
        ndcg += ndcg_at_n(outcomes[u].rank, n);
    }
    if (!users.empty()) {
        g.hr = hr / static_cast<double>(users.size());
        g.ndcg = ndcg / static_cast<double>(users.size());
    }
    return g;
}

}  // namespace

RankingReport evaluate(const Scorer& scorer, const catalog::DatasetSplit& split,
                       const std::vector<EvalGroup>& groups, const EvalOptions& opts) {
    const int num_users = split.num_users();
    std::vector<UserOutcome> outcomes(num_users);
    for (int u = 0; u < num_users; ++u) {
        const int target =
            opts.target == TargetKind::kTest ? split.test[u] : split.valid[u];
        const auto scores = scorer.score_user(u);
        if (static_cast<int>(scores.size()) != split.num_items) {
            throw ShapeError("evaluate: scorer returned " + std::to_string(scores.size()) +
                             " scores for a catalog of " + std::to_string(split.num_items));
        }
        if (opts.exclude_history) {
            std::vector<int> excluded = split.train[u];
            if (opts.target == TargetKind::kTest) excluded.push_back(split.valid[u]);
            outcomes[u].rank = full_rank_excluding(scores, target, excluded);
        } else {
            outcomes[u].rank = full_rank(scores, target);
        }
    }

    RankingReport report;
    report.n = opts.n;
    std::vector<int> all(num_users);
    for (int u = 0; u < num_users; ++u) all[u] = u;
    report.groups.push_back(reduce_group("regular", all, outcomes, opts.n));
    for (const auto& g : groups) {
        if (g.users.empty()) continue;  // omitted with a note in the run log
        report.groups.push_back(reduce_group(g.name, g.users, outcomes, opts.n));
    }
    return report;
}

std::pair<double, double> overall_metrics(const Scorer& scorer, const catalog::DatasetSplit& split,
                                          const EvalOptions& opts) {
    const auto report = evaluate(scorer, split, {}, opts);
    return {report.groups.front().hr, report.groups.front().ndcg};
}

std::vector<EvalGroup> standard_groups(const catalog::DatasetSplit& split,
                                       const std::vector<int>& warm_ks,
                                       const std::vector<long>* warm_counts) {
    const auto part = catalog::cold_new_partition(split);
    std::vector<EvalGroup> groups;
    groups.push_back({"cold", part.cold_users});
    groups.push_back({"new", part.new_users});
    groups.push_back({"other", part.other_users});
    for (int k : warm_ks) {
        auto users = warm_counts == nullptr
                         ? catalog::warm_target_users(split, k)
                         : catalog::warm_target_users(split, *warm_counts, k);
        groups.push_back({"warm-" + std::to_string(k), std::move(users)});
    }
    return groups;
}

}  // namespace recbench::eval

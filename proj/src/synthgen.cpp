// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "recbench/rng.hpp"

namespace recbench::synthgen {

namespace {

// Sharpness of the topic mixture used for title emission: a one-hot latent
// concentrates ~89% of tokens in its own topic block at 8 topics.
constexpr double kTopicSharpness = 4.0;
// Feature vectors are a fixed random mixing of the latent squashed through
// tanh, plus Gaussian noise. The squash models pre-extracted features that
// carry the latent but are not affine in it, so adapter depth has signal to
// recover; pure z + noise would make the affine DT-layer already optimal.
constexpr double kFeatureNoiseStd = 0.5;
// Size of the reserved never-in-training sliver relative to the cold set.
constexpr double kNewFractionOfCold = 0.5;
// Held-out-target multiplicity for reserved items.
constexpr int kNewTargetUsers = 3;
constexpr int kColdTargetUsers = 2;
// Cold occurrences are spliced within this window before the held-out tail,
// so truncation to any max_len >= 13 cannot remove them.
constexpr int kColdInsertWindow = 6;

}  // namespace

void GenConfig::validate() const {
    if (num_users < 1 || num_items < 2) throw ConfigError("synthgen: need users and items");
    if (topics < 1) throw ConfigError("synthgen: topics must be positive");
    if (vocab_size < topics || vocab_size % topics != 0) {
        throw ConfigError("synthgen: vocab_size must be a positive multiple of topics");
    }
    if (tokens_per_title < 1) throw ConfigError("synthgen: tokens_per_title must be positive");
    if (min_interactions < 3 || max_interactions < min_interactions) {
        throw ConfigError("synthgen: interaction range must satisfy 3 <= min <= max");
    }
    if (cold_fraction < 0 || cold_fraction >= 1) {
        throw ConfigError("synthgen: cold_fraction must be in [0,1)");
    }
    if (tau <= 0) throw ConfigError("synthgen: tau must be positive");
    const int cold = static_cast<int>(std::lround(cold_fraction * num_items));
    const int fresh = static_cast<int>(std::lround(kNewFractionOfCold * cold));
    const int bulk = num_items - cold - fresh;
    if (bulk < max_interactions) {
        throw ConfigError("synthgen: infeasible config, interactions per user (" +
                          std::to_string(max_interactions) + ") exceed the drawable item pool (" +
                          std::to_string(bulk) + ")");
    }
    const int append_users = cold * kColdTargetUsers + fresh * kNewTargetUsers;
    if (append_users >= num_users) {
        throw ConfigError("synthgen: infeasible config, reserved cold/new targets need " +
                          std::to_string(append_users) + " users but only " +
                          std::to_string(num_users) + " exist");
    }
}

double GroundTruth::affinity(int user, int item) const {
    const auto& w = user_latents[user];
    const auto& z = item_latents[item];
    double acc = 0;
    for (int t = 0; t < topics; ++t) acc += static_cast<double>(w[t]) * static_cast<double>(z[t]);
    return acc;
}

double GroundTruth::first_draw_prob(int user, int item) const {
    double total = 0;
    double target = 0;
    for (std::size_t i = 0; i < item_latents.size(); ++i) {
        const double w =
            popularity_weight[i] * std::exp(affinity(user, static_cast<int>(i)) / tau);
        total += w;
        if (static_cast<int>(i) == item) target = w;
    }
    return total > 0 ? target / total : 0;
}

GenResult generate(const GenConfig& cfg) {
    cfg.validate();
    GenResult out;
    auto& truth = out.truth;
    truth.topics = cfg.topics;
    truth.tau = cfg.tau;

    const int cold_count = static_cast<int>(std::lround(cfg.cold_fraction * cfg.num_items));
    const int new_count = static_cast<int>(std::lround(kNewFractionOfCold * cold_count));
    const int bulk_count = cfg.num_items - cold_count - new_count;
    for (int i = 0; i < cold_count; ++i) truth.cold_items.push_back(bulk_count + i);
    for (int i = 0; i < new_count; ++i) truth.new_items.push_back(bulk_count + cold_count + i);

    // latents
    Rng lat_rng(derive_seed(cfg.seed, "latents"));
    truth.item_latents.resize(cfg.num_items);
    for (auto& z : truth.item_latents) {
        z.resize(cfg.topics);
        for (auto& v : z) v = static_cast<real_t>(lat_rng.normal());
    }
    truth.user_latents.resize(cfg.num_users);
    for (auto& w : truth.user_latents) {
        w.resize(cfg.topics);
        for (auto& v : w) v = static_cast<real_t>(lat_rng.normal());
    }

    // popularity skew over drawable items only
    truth.popularity_weight.assign(cfg.num_items, 0.0);
    for (int i = 0; i < bulk_count; ++i) {
        truth.popularity_weight[i] = 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
    }

    // items: titles from topic-block mixtures, features from the squashed
    // latent mixing
    Rng item_rng(derive_seed(cfg.seed, "items"));
    Rng mix_rng(derive_seed(cfg.seed, "featmap"));
    std::vector<double> feat_mix(static_cast<std::size_t>(cfg.topics) * cfg.topics);
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(cfg.topics));
    for (auto& v : feat_mix) v = mix_rng.normal() * mix_scale;
    const int block = cfg.vocab_size / cfg.topics;
    out.items.resize(cfg.num_items);
    for (int i = 0; i < cfg.num_items; ++i) {
        auto& item = out.items[i];
        item.key = "i" + std::to_string(i);
        // topic mixture softmax(sharpness * z_i)
        std::vector<double> probs(cfg.topics);
        double mx = -1e300;
        for (int t = 0; t < cfg.topics; ++t) {
            probs[t] = kTopicSharpness * truth.item_latents[i][t];
            mx = std::max(mx, probs[t]);
        }
        double denom = 0;
        for (auto& p : probs) {
            p = std::exp(p - mx);
            denom += p;
        }
        for (auto& p : probs) p /= denom;
        std::string title;
        for (int tok = 0; tok < cfg.tokens_per_title; ++tok) {
            double r = item_rng.uniform();
            int topic = cfg.topics - 1;
            for (int t = 0; t < cfg.topics; ++t) {
                if (r < probs[t]) {
                    topic = t;
                    break;
                }
                r -= probs[t];
            }
            const int word = topic * block + static_cast<int>(item_rng.bounded(block));
            if (tok) title += ' ';
            title += "t" + std::to_string(topic) + "w" + std::to_string(word);
        }
        item.title = std::move(title);
        item.has_title = true;
        item.features.resize(cfg.topics);
        for (int t = 0; t < cfg.topics; ++t) {
            double mixed = 0;
            for (int s = 0; s < cfg.topics; ++s) {
                mixed += feat_mix[static_cast<std::size_t>(t) * cfg.topics + s] *
                         truth.item_latents[i][s];
            }
            item.features[t] =
                static_cast<real_t>(std::tanh(mixed) + kFeatureNoiseStd * item_rng.normal());
        }
        item.has_features = true;
    }

    // interactions: weighted draws without replacement from the bulk pool;
    // log-space weights renormalized per draw keep extreme tau finite
    Rng draw_rng(derive_seed(cfg.seed, "draws"));
    std::vector<std::vector<int>> sequences(cfg.num_users);
    std::vector<double> log_w(bulk_count), weights(bulk_count);
    std::vector<char> taken(bulk_count);
    for (int u = 0; u < cfg.num_users; ++u) {
        for (int i = 0; i < bulk_count; ++i) {
            log_w[i] = std::log(truth.popularity_weight[i]) + truth.affinity(u, i) / cfg.tau;
        }
        std::fill(taken.begin(), taken.end(), 0);
        const int count = static_cast<int>(
            draw_rng.range(cfg.min_interactions, cfg.max_interactions));
        auto& seq = sequences[u];
        seq.reserve(count);
        for (int k = 0; k < count; ++k) {
            double max_lw = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < bulk_count; ++i) {
                if (!taken[i] && log_w[i] > max_lw) max_lw = log_w[i];
            }
            double total = 0;
            for (int i = 0; i < bulk_count; ++i) {
                weights[i] = taken[i] ? 0.0 : std::exp(log_w[i] - max_lw);
                total += weights[i];
            }
            double r = draw_rng.uniform() * total;
            int chosen = -1;
            for (int i = 0; i < bulk_count; ++i) {
                if (weights[i] <= 0) continue;
                if (r < weights[i]) {
                    chosen = i;
                    break;
                }
                r -= weights[i];
            }
            if (chosen < 0) {  // numeric fringe: take the last drawable item
                for (int i = bulk_count - 1; i >= 0; --i) {
                    if (!taken[i]) {
                        chosen = i;
                        break;
                    }
                }
            }
            seq.push_back(chosen);
            taken[chosen] = 1;
        }
    }

    // Reserved-item placement. Hosts are the item's strongest-affinity users
    // (interactions with an item come from users who like it), so the true
    // affinity ranks reserved targets highly for exactly the users holding
    // them as held-out targets.
    Rng place_rng(derive_seed(cfg.seed, "placement"));
    std::vector<char> append_used(cfg.num_users, 0);
    std::vector<int> splice_load(cfg.num_users, 0);
    auto take_top_fan = [&](int item) {
        int best = -1;
        double best_aff = 0;
        for (int u = 0; u < cfg.num_users; ++u) {
            if (append_used[u]) continue;
            const double a = truth.affinity(u, item);
            if (best < 0 || a > best_aff) {
                best = u;
                best_aff = a;
            }
        }
        if (best < 0) throw ConfigError("synthgen: ran out of users for reserved targets");
        append_used[best] = 1;
        return best;
    };

    for (int item : truth.new_items) {
        for (int r = 0; r < kNewTargetUsers; ++r) sequences[take_top_fan(item)].push_back(item);
    }
    for (int item : truth.cold_items) {
        for (int r = 0; r < kColdTargetUsers; ++r) sequences[take_top_fan(item)].push_back(item);
        // 1..9 training occurrences spliced into fans that are not append
        // hosts; at most two splices per user keep every insertion inside
        // the truncation-safe tail window.
        const int occurrences = 1 + static_cast<int>(place_rng.bounded(9));
        std::vector<char> used(cfg.num_users, 0);
        for (int k = 0; k < occurrences; ++k) {
            int host = -1;
            double best_aff = 0;
            for (int u = 0; u < cfg.num_users; ++u) {
                if (used[u] || append_used[u] || splice_load[u] >= 2) continue;
                const double a = truth.affinity(u, item);
                if (host < 0 || a > best_aff) {
                    host = u;
                    best_aff = a;
                }
            }
            if (host < 0) throw ConfigError("synthgen: could not place cold occurrences");
            used[host] = 1;
            ++splice_load[host];
            auto& seq = sequences[host];
            const int len = static_cast<int>(seq.size());
            const int window = std::min(kColdInsertWindow, len - 3);
            const int offset = window > 0 ? static_cast<int>(place_rng.bounded(window + 1)) : 0;
            const int pos = len - 2 - offset;
            seq.insert(seq.begin() + pos, item);
        }
    }

    // pack into an InteractionLog: timestamps are per-user positions
    out.log.users.resize(cfg.num_users);
    for (int u = 0; u < cfg.num_users; ++u) {
        out.log.user_keys.push_back("u" + std::to_string(u));
        auto& dst = out.log.users[u];
        dst.reserve(sequences[u].size());
        for (std::size_t p = 0; p < sequences[u].size(); ++p) {
            dst.push_back({sequences[u][p], static_cast<std::int64_t>(p)});
        }
    }
    for (int i = 0; i < cfg.num_items; ++i) out.log.item_keys.push_back(out.items[i].key);
    return out;
}

namespace {

class OracleScorer final : public eval::Scorer {
public:
    OracleScorer(const GroundTruth& truth, const catalog::DatasetSplit& split,
                 const std::vector<std::string>& user_keys,
                 const std::vector<std::string>& item_keys)
        : truth_(truth), split_(split) {
        auto parse = [](const std::string& key, char prefix) {
            if (key.empty() || key[0] != prefix) {
                throw ContractError("oracle_metrics: key '" + key + "' is not generator-made");
            }
            return std::stoi(key.substr(1));
        };
        user_map_.reserve(user_keys.size());
        for (const auto& k : user_keys) user_map_.push_back(parse(k, 'u'));
        item_map_.reserve(item_keys.size());
        for (const auto& k : item_keys) item_map_.push_back(parse(k, 'i'));
    }

    int num_items() const override { return split_.num_items; }

    std::vector<real_t> score_user(int user) const override {
        std::vector<real_t> scores(item_map_.size());
        for (std::size_t j = 0; j < item_map_.size(); ++j) {
            scores[j] = static_cast<real_t>(truth_.affinity(user_map_[user], item_map_[j]));
        }
        return scores;
    }

private:
    const GroundTruth& truth_;
    const catalog::DatasetSplit& split_;
    std::vector<int> user_map_, item_map_;
};

}  // namespace

eval::RankingReport oracle_metrics(const GroundTruth& truth, const catalog::DatasetSplit& split,
                                   const std::vector<std::string>& user_keys,
                                   const std::vector<std::string>& item_keys,
                                   const eval::EvalOptions& opts) {
    OracleScorer scorer(truth, split, user_keys, item_keys);
    return eval::evaluate(scorer, split, eval::standard_groups(split, {}), opts);
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_ground_truth: cannot write '" + path + "'");
    out.precision(9);
    for (std::size_t i = 0; i < truth.item_latents.size(); ++i) {
        out << i << '\t';
        for (int t = 0; t < truth.topics; ++t) {
            if (t) out << ',';
            out << truth.item_latents[i][t];
        }
        out << '\n';
    }
}

}  // namespace recbench::synthgen

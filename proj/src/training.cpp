// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace recbench::training {

void HyperParams::validate() const {
    if (lr <= 0) throw ConfigError("HyperParams: lr must be positive");
    // lr_encoder == 0 is allowed: it freezes the modality encoder bit-exactly
    if (batch <= 0) throw ConfigError("HyperParams: batch must be positive");
    if (weight_decay < 0) throw ConfigError("HyperParams: weight_decay must be >= 0");
    if (dropout < 0 || dropout >= 1) throw ConfigError("HyperParams: dropout must be in [0,1)");
    if (d <= 0) throw ConfigError("HyperParams: d must be positive");
    if (epochs <= 0) throw ConfigError("HyperParams: epochs must be positive");
    if (eval_n <= 0) throw ConfigError("HyperParams: eval_n must be positive");
}

std::string TrainReport::to_tsv() const {
    std::ostringstream os;
    char buf[160];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\t%.3f", e.epoch,
                      static_cast<double>(e.loss), e.val_hr, e.val_ndcg, e.seconds);
        os << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "final\t%d\t%d\t%ld\t%ld\t%.3f", best_epoch,
                  collapsed ? 1 : 0, param_count, encoder_param_count, total_seconds);
    os << buf << '\n';
    return os.str();
}

TrainReport TrainReport::from_tsv(const std::string& text) {
    TrainReport r;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string first;
        std::getline(ls, first, '\t');
        if (first == "final") {
            std::string tok;
            std::getline(ls, tok, '\t');
            r.best_epoch = std::stoi(tok);
            std::getline(ls, tok, '\t');
            r.collapsed = tok == "1";
            std::getline(ls, tok, '\t');
            r.param_count = std::stol(tok);
            std::getline(ls, tok, '\t');
            r.encoder_param_count = std::stol(tok);
            std::getline(ls, tok, '\t');
            r.total_seconds = std::stod(tok);
        } else {
            EpochStat e;
            e.epoch = std::stoi(first);
            std::string tok;
            std::getline(ls, tok, '\t');
            e.loss = static_cast<real_t>(std::stod(tok));
            std::getline(ls, tok, '\t');
            e.val_hr = std::stod(tok);
            std::getline(ls, tok, '\t');
            e.val_ndcg = std::stod(tok);
            std::getline(ls, tok, '\t');
            e.seconds = std::stod(tok);
            r.epochs.push_back(e);
        }
    }
    for (const auto& e : r.epochs) {
        if (e.val_hr > r.best_val_hr) {
            r.best_val_hr = e.val_hr;
            r.best_val_ndcg = e.val_ndcg;
        }
    }
    return r;
}

int sample_negative(const std::vector<int>& sorted_positives, int num_items, Rng& rng) {
    if (static_cast<int>(sorted_positives.size()) >= num_items) {
        throw SamplingError("sample_negative: user interacted with every item in the catalog");
    }
    for (;;) {
        const int j = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(num_items)));
        if (!std::binary_search(sorted_positives.begin(), sorted_positives.end(), j)) return j;
    }
}

int sample_negative_from(const std::vector<int>& sorted_positives,
                         const std::vector<int>& candidates, Rng& rng) {
    if (candidates.empty()) throw SamplingError("sample_negative: empty candidate pool");
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const int j = candidates[rng.bounded(candidates.size())];
        if (!std::binary_search(sorted_positives.begin(), sorted_positives.end(), j)) return j;
    }
    throw SamplingError("sample_negative: user interacted with the whole candidate pool");
}

real_t bce_pair_loss(real_t pos_score, real_t neg_score) {
    Tensor p = Tensor::scalar(pos_score);
    Tensor n = Tensor::scalar(neg_score);
    return tensor::bce_pair(nullptr, p, n).item();
}

std::pair<Tensor, long> seq2seq_loss(Tape* tape, const Tensor& user_states, const Tensor& pos_vecs,
                                     const Tensor& neg_vecs,
                                     const std::vector<std::uint8_t>& valid) {
    if (user_states.rows() != pos_vecs.rows() || user_states.rows() != neg_vecs.rows()) {
        throw ShapeError("seq2seq_loss: row mismatch between states and item vectors");
    }
    if (valid.size() != user_states.rows()) {
        throw ShapeError("seq2seq_loss: valid mask length != positions");
    }
    long count = 0;
    std::vector<real_t> mask_vals(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        mask_vals[i] = valid[i] ? 1 : 0;
        count += valid[i] ? 1 : 0;
    }
    if (count == 0) return {Tensor::scalar(0), 0};
    Tensor pos_scores = tensor::rowwise_dot(tape, user_states, pos_vecs);
    Tensor neg_scores = tensor::rowwise_dot(tape, user_states, neg_vecs);
    Tensor losses = tensor::bce_pair(tape, pos_scores, neg_scores);
    const std::size_t positions = mask_vals.size();
    Tensor mask = Tensor::from({positions}, std::move(mask_vals));
    return {tensor::sum_all(tape, tensor::mul(tape, losses, mask)), count};
}

bool CollapseMonitor::observe(double val_hr, bool loss_non_finite) {
    if (flagged_) return true;
    if (loss_non_finite) {
        flagged_ = true;
        return true;
    }
    if (exceeded_ && val_hr < eps_ * baseline_) {
        flagged_ = true;
        return true;
    }
    if (val_hr >= 2 * baseline_) exceeded_ = true;
    return false;
}

// --- model ------------------------------------------------------------------

RecModel::RecModel(BackboneKind kind, std::unique_ptr<encoders::ItemEncoder> encoder,
                   std::size_t num_users, std::size_t max_len, std::size_t blocks,
                   std::size_t heads, std::size_t dssm_tower_layers, Rng& rng)
    : kind_(kind), encoder_(std::move(encoder)) {
    if (kind_ == BackboneKind::kSasrec) {
        sasrec_ = std::make_unique<backbones::SasrecBackbone>(encoder_->dim(), max_len, blocks,
                                                              heads, rng);
    } else {
        dssm_ = std::make_unique<backbones::DssmBackbone>(num_users, encoder_->dim(),
                                                          dssm_tower_layers, rng);
    }
}

ParamList RecModel::encoder_me_params() const {
    ParamList out;
    encoder_->me_params(out, "item_encoder");
    return out;
}

ParamList RecModel::rest_params() const {
    ParamList out;
    encoder_->other_params(out, "item_encoder");
    if (sasrec_) sasrec_->params(out, "backbone");
    if (dssm_) dssm_->params(out, "backbone");
    return out;
}

ParamList RecModel::all_params() const {
    ParamList out = encoder_me_params();
    for (auto& p : rest_params()) out.push_back(std::move(p));
    return out;
}

std::vector<std::vector<real_t>> RecModel::snapshot_params() const {
    std::vector<std::vector<real_t>> snap;
    for (const auto& p : all_params()) snap.push_back(p.value.val());
    return snap;
}

void RecModel::restore_params(const std::vector<std::vector<real_t>>& snapshot) {
    auto params = all_params();
    if (params.size() != snapshot.size()) {
        throw ContractError("restore_params: snapshot layout mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value.val() = snapshot[i];
}

namespace {

// Shared eval-mode scorer: a frozen item bank plus a per-user context rule.
class ModelScorer final : public eval::Scorer {
public:
    ModelScorer(const RecModel& model, const catalog::DatasetSplit& split,
                eval::TargetKind target)
        : model_(model), split_(split), target_(target) {
        std::vector<int> all_items(split.num_items);
        for (int i = 0; i < split.num_items; ++i) all_items[i] = i;
        nn::FwdCtx eval_ctx;
        item_bank_ =
            const_cast<RecModel&>(model_).encoder().encode(eval_ctx, all_items);
    }

    int num_items() const override { return split_.num_items; }

    std::vector<real_t> score_user(int user) const override {
        nn::FwdCtx eval_ctx;
        Tensor user_vec;
        if (model_.backbone_kind() == BackboneKind::kSasrec) {
            std::vector<int> context = split_.train[user];
            if (target_ == eval::TargetKind::kTest) context.push_back(split_.valid[user]);
            const auto& backbone = const_cast<RecModel&>(model_).sasrec();
            if (context.size() > backbone.max_len()) {
                context.erase(context.begin(),
                              context.end() - static_cast<long>(backbone.max_len()));
            }
            Tensor seq_vecs = tensor::take_rows(nullptr, item_bank_, context);
            std::vector<std::uint8_t> valid(context.size(), 1);
            Tensor states = backbone.user_states(eval_ctx, seq_vecs, valid);
            user_vec = tensor::take_rows(nullptr, states,
                                         {static_cast<int>(context.size()) - 1});
        } else {
            user_vec = const_cast<RecModel&>(model_).dssm().user_vectors(eval_ctx, {user});
        }
        Tensor scores = backbones::score_against(nullptr, user_vec, item_bank_);
        return scores.val();
    }

private:
    const RecModel& model_;
    const catalog::DatasetSplit& split_;
    eval::TargetKind target_;
    Tensor item_bank_;
};

}  // namespace

std::unique_ptr<eval::Scorer> RecModel::make_scorer(const catalog::DatasetSplit& split,
                                                    eval::TargetKind target) const {
    return std::make_unique<ModelScorer>(*this, split, target);
}

std::vector<optim::ParamGroup> build_optimizer_groups(const RecModel& model,
                                                      const HyperParams& hp) {
    std::vector<optim::ParamGroup> groups;
    optim::ParamGroup rest{model.rest_params(), hp.lr, hp.weight_decay};
    groups.push_back(std::move(rest));
    ParamList me = model.encoder_me_params();
    if (!me.empty()) {
        groups.push_back({std::move(me), hp.resolved_lr_encoder(), hp.weight_decay});
    }
    return groups;
}

namespace {

struct UserData {
    std::vector<int> observed_sorted;  // full truncated sequence, deduplicated
};

std::vector<UserData> collect_user_data(const catalog::DatasetSplit& split) {
    std::vector<UserData> data(split.num_users());
    for (int u = 0; u < split.num_users(); ++u) {
        auto& obs = data[u].observed_sorted;
        obs = split.train[u];
        obs.push_back(split.valid[u]);
        obs.push_back(split.test[u]);
        std::sort(obs.begin(), obs.end());
        obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
    }
    return data;
}

// Negatives are drawn from items that occur in training data; held-out-only
// items are not part of the trainable pool.
std::vector<int> negative_candidates(const catalog::DatasetSplit& split) {
    const auto counts = split.train_item_counts();
    std::vector<int> pool;
    for (int i = 0; i < split.num_items; ++i) {
        if (counts[i] > 0) pool.push_back(i);
    }
    return pool;
}

// One SASRec batch step; returns (mean loss, contributing terms).
std::pair<real_t, long> sasrec_batch_step(RecModel& model, const catalog::DatasetSplit& split,
                                          const std::vector<UserData>& user_data,
                                          const std::vector<int>& neg_pool,
                                          const std::vector<int>& batch_users,
                                          const HyperParams& hp, Rng& rng, optim::AdamW& opt) {
    Tape tape;
    nn::FwdCtx ctx{&tape, &rng, hp.dropout};

    // Assemble per-user transitions and the deduplicated encode list.
    struct Entry {
        std::vector<int> inputs, positives, negatives;
    };
    std::vector<Entry> entries;
    std::vector<int> encode_list;
    std::unordered_map<int, int> encode_pos;
    auto intern = [&](int item) {
        auto [it, inserted] = encode_pos.emplace(item, static_cast<int>(encode_list.size()));
        if (inserted) encode_list.push_back(item);
        return it->second;
    };
    for (int u : batch_users) {
        const auto& seq = split.train[u];
        if (seq.size() < 2) continue;  // no transition to learn from
        Entry e;
        for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            e.inputs.push_back(intern(seq[t]));
            e.positives.push_back(intern(seq[t + 1]));
            e.negatives.push_back(
                intern(sample_negative_from(user_data[u].observed_sorted, neg_pool, rng)));
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) return {0, 0};

    Tensor encoded = model.encoder().encode(ctx, encode_list);

    std::vector<Tensor> user_sums;
    long total_terms = 0;
    for (const auto& e : entries) {
        Tensor in_vecs = tensor::take_rows(&tape, encoded, e.inputs);
        std::vector<std::uint8_t> valid(e.inputs.size(), 1);
        Tensor states = model.sasrec().user_states(ctx, in_vecs, valid);
        Tensor pos_vecs = tensor::take_rows(&tape, encoded, e.positives);
        Tensor neg_vecs = tensor::take_rows(&tape, encoded, e.negatives);
        auto [sum, count] = seq2seq_loss(&tape, states, pos_vecs, neg_vecs, valid);
        user_sums.push_back(sum);
        total_terms += count;
    }
    Tensor total = user_sums.size() == 1 ? user_sums[0]
                                         : tensor::sum_all(&tape, tensor::concat_rows(&tape, user_sums));
    Tensor loss = tensor::scale(&tape, total, real_t(1) / static_cast<real_t>(total_terms));
    const real_t loss_val = loss.item();
    if (!std::isfinite(loss_val)) return {loss_val, total_terms};
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
    return {loss_val, total_terms};
}

// One DSSM batch step over (user, positive) pairs.
std::pair<real_t, long> dssm_batch_step(RecModel& model, const catalog::DatasetSplit& split,
                                        const std::vector<UserData>& user_data,
                                        const std::vector<int>& neg_pool,
                                        const std::vector<std::pair<int, int>>& pairs,
                                        const HyperParams& hp, Rng& rng, optim::AdamW& opt) {
    Tape tape;
    nn::FwdCtx ctx{&tape, &rng, hp.dropout};

    std::vector<int> users(pairs.size());
    std::vector<int> encode_list;
    std::unordered_map<int, int> encode_pos;
    auto intern = [&](int item) {
        auto [it, inserted] = encode_pos.emplace(item, static_cast<int>(encode_list.size()));
        if (inserted) encode_list.push_back(item);
        return it->second;
    };
    std::vector<int> pos_idx(pairs.size()), neg_idx(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        users[i] = pairs[i].first;
        pos_idx[i] = intern(pairs[i].second);
        neg_idx[i] = intern(
            sample_negative_from(user_data[pairs[i].first].observed_sorted, neg_pool, rng));
    }
    Tensor encoded = model.encoder().encode(ctx, encode_list);
    Tensor user_vecs = model.dssm().user_vectors(ctx, users);
    if (hp.dropout > 0) user_vecs = tensor::dropout(&tape, user_vecs, hp.dropout, rng);
    Tensor pos_vecs = tensor::take_rows(&tape, encoded, pos_idx);
    Tensor neg_vecs = tensor::take_rows(&tape, encoded, neg_idx);
    Tensor pos_scores = tensor::rowwise_dot(&tape, user_vecs, pos_vecs);
    Tensor neg_scores = tensor::rowwise_dot(&tape, user_vecs, neg_vecs);
    Tensor losses = tensor::bce_pair(&tape, pos_scores, neg_scores);
    Tensor loss = tensor::mean_all(&tape, losses);
    const real_t loss_val = loss.item();
    if (!std::isfinite(loss_val)) return {loss_val, static_cast<long>(pairs.size())};
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
    return {loss_val, static_cast<long>(pairs.size())};
}

}  // namespace

TrainReport train(RecModel& model, const catalog::DatasetSplit& split, const HyperParams& hp) {
    hp.validate();
    const auto user_data = collect_user_data(split);
    const auto neg_pool = negative_candidates(split);
    optim::AdamW opt(build_optimizer_groups(model, hp));

    TrainReport report;
    report.param_count = static_cast<long>(nn::total_params(model.all_params()));
    report.encoder_param_count = static_cast<long>(nn::total_params(model.encoder_me_params()));

    const double random_baseline =
        static_cast<double>(hp.eval_n) / static_cast<double>(split.num_items);
    CollapseMonitor monitor(random_baseline, hp.collapse_epsilon);

    std::vector<std::vector<real_t>> best_snapshot;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(derive_seed(hp.seed, "shuffle", static_cast<std::uint64_t>(epoch)));

        real_t loss_sum = 0;
        long term_count = 0;
        bool non_finite = false;

        if (model.backbone_kind() == BackboneKind::kSasrec) {
            std::vector<int> order(split.num_users());
            for (int u = 0; u < split.num_users(); ++u) order[u] = u;
            shuffle_rng.shuffle(order);
            long batch_index = 0;
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(hp.batch), ++batch_index) {
                const std::size_t end =
                    std::min(order.size(), start + static_cast<std::size_t>(hp.batch));
                std::vector<int> batch(order.begin() + start, order.begin() + end);
                Rng brng(derive_seed(hp.seed, "batch", static_cast<std::uint64_t>(epoch),
                                     static_cast<std::uint64_t>(batch_index)));
                auto [loss, terms] =
                    sasrec_batch_step(model, split, user_data, neg_pool, batch, hp, brng, opt);
                if (terms > 0 && !std::isfinite(loss)) {
                    non_finite = true;
                    break;
                }
                loss_sum += loss * static_cast<real_t>(terms);
                term_count += terms;
            }
        } else {
            std::vector<std::pair<int, int>> pairs;
            for (int u = 0; u < split.num_users(); ++u) {
                for (int item : split.train[u]) pairs.emplace_back(u, item);
            }
            shuffle_rng.shuffle(pairs);
            long batch_index = 0;
            for (std::size_t start = 0; start < pairs.size();
                 start += static_cast<std::size_t>(hp.batch), ++batch_index) {
                const std::size_t end =
                    std::min(pairs.size(), start + static_cast<std::size_t>(hp.batch));
                std::vector<std::pair<int, int>> batch(pairs.begin() + start, pairs.begin() + end);
                Rng brng(derive_seed(hp.seed, "batch", static_cast<std::uint64_t>(epoch),
                                     static_cast<std::uint64_t>(batch_index)));
                auto [loss, terms] =
                    dssm_batch_step(model, split, user_data, neg_pool, batch, hp, brng, opt);
                if (terms > 0 && !std::isfinite(loss)) {
                    non_finite = true;
                    break;
                }
                loss_sum += loss * static_cast<real_t>(terms);
                term_count += terms;
            }
        }

        EpochStat stat;
        stat.epoch = epoch;
        stat.loss = term_count > 0 ? loss_sum / static_cast<real_t>(term_count) : real_t(0);

        if (!non_finite) {
            auto scorer = model.make_scorer(split, eval::TargetKind::kValidation);
            eval::EvalOptions opts;
            opts.n = hp.eval_n;
            opts.target = eval::TargetKind::kValidation;
            const auto [hr, ndcg] = eval::overall_metrics(*scorer, split, opts);
            stat.val_hr = hr;
            stat.val_ndcg = ndcg;
        }
        stat.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(stat);
        report.total_seconds += stat.seconds;

        if (monitor.observe(stat.val_hr, non_finite)) {
            report.collapsed = true;
            report.collapse_epoch = epoch;
            break;
        }

        if (stat.val_hr > report.best_val_hr || report.best_epoch < 0) {
            report.best_epoch = epoch;
            report.best_val_hr = stat.val_hr;
            report.best_val_ndcg = stat.val_ndcg;
            best_snapshot = model.snapshot_params();
            epochs_since_best = 0;
        } else if (++epochs_since_best >= hp.patience) {
            break;
        }
    }

    if (!best_snapshot.empty()) model.restore_params(best_snapshot);
    return report;
}

}  // namespace recbench::training

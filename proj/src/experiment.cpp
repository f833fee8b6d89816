// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <functional>
#include <map>
#include <sstream>

#include "recbench/checkpoint.hpp"

namespace recbench::experiment {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << content;
}

// --- config -------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_string(read_text_file(path));
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;
        try {
            if (qualified == "data.source") cfg.source = value;
            else if (qualified == "data.interactions") cfg.interactions = value;
            else if (qualified == "data.items") cfg.items = value;
            else if (qualified == "data.synth_users") cfg.synth.num_users = std::stoi(value);
            else if (qualified == "data.synth_items") cfg.synth.num_items = std::stoi(value);
            else if (qualified == "data.synth_topics") cfg.synth.topics = std::stoi(value);
            else if (qualified == "data.synth_title_tokens") cfg.synth.tokens_per_title = std::stoi(value);
            else if (qualified == "data.synth_vocab") cfg.synth.vocab_size = std::stoi(value);
            else if (qualified == "data.synth_min_inter") cfg.synth.min_interactions = std::stoi(value);
            else if (qualified == "data.synth_max_inter") cfg.synth.max_interactions = std::stoi(value);
            else if (qualified == "data.synth_cold_fraction") cfg.synth.cold_fraction = std::stod(value);
            else if (qualified == "data.synth_zipf") cfg.synth.zipf_exponent = std::stod(value);
            else if (qualified == "data.synth_tau") cfg.synth.tau = std::stod(value);
            else if (qualified == "data.synth_seed") cfg.synth.seed = std::stoull(value);
            else if (qualified == "data.min_interactions") cfg.min_interactions = std::stoi(value);
            else if (qualified == "data.warm_filter_k") cfg.warm_filter_k = std::stoi(value);
            else if (qualified == "data.max_seq_len") cfg.max_seq_len = std::stoi(value);
            else if (qualified == "model.backbone") cfg.backbone = value;
            else if (qualified == "model.encoder") cfg.encoder = value;
            else if (qualified == "model.d") cfg.d = std::stoi(value);
            else if (qualified == "model.blocks") cfg.blocks = std::stoi(value);
            else if (qualified == "model.heads") cfg.heads = std::stoi(value);
            else if (qualified == "model.dssm_layers") cfg.dssm_layers = std::stoi(value);
            else if (qualified == "model.enc_width") cfg.enc_width = std::stoi(value);
            else if (qualified == "model.enc_blocks") cfg.enc_blocks = std::stoi(value);
            else if (qualified == "model.enc_heads") cfg.enc_heads = std::stoi(value);
            else if (qualified == "model.max_title_tokens") cfg.max_title_tokens = std::stoi(value);
            else if (qualified == "model.adapter_depth") cfg.adapter_depth = std::stoi(value);
            else if (qualified == "model.fusion_mode") cfg.fusion_mode = value;
            else if (qualified == "model.fusion_depth") cfg.fusion_depth = std::stoi(value);
            else if (qualified == "model.fusion_modality") cfg.fusion_modality = value;
            else if (qualified == "model.mlm_epochs") cfg.mlm_epochs = std::stoi(value);
            else if (qualified == "model.mlm_mask_prob") cfg.mlm_mask_prob = static_cast<real_t>(std::stod(value));
            else if (qualified == "model.mlm_lr") cfg.mlm_lr = static_cast<real_t>(std::stod(value));
            else if (qualified == "model.mlm_batch") cfg.mlm_batch = std::stoi(value);
            else if (qualified == "train.lr") cfg.hp.lr = static_cast<real_t>(std::stod(value));
            else if (qualified == "train.lr_encoder") cfg.hp.lr_encoder = static_cast<real_t>(std::stod(value));
            else if (qualified == "train.batch") cfg.hp.batch = std::stoi(value);
            else if (qualified == "train.weight_decay") cfg.hp.weight_decay = static_cast<real_t>(std::stod(value));
            else if (qualified == "train.dropout") cfg.hp.dropout = static_cast<real_t>(std::stod(value));
            else if (qualified == "train.epochs") cfg.hp.epochs = std::stoi(value);
            else if (qualified == "train.patience") cfg.hp.patience = std::stoi(value);
            else if (qualified == "train.seed") { cfg.hp.seed = std::stoull(value); cfg.seed_set = true; }
            else if (qualified == "eval.n") cfg.eval_n = std::stoi(value);
            else if (qualified == "eval.warm_k") cfg.warm_ks = parse_int_list(value);
            else if (qualified == "eval.exclude_history") cfg.exclude_history = parse_bool(value, qualified);
            else if (qualified == "output.dir") cfg.out_dir = value;
            else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + qualified + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": bad value for '" +
                              qualified + "': " + e.what());
        }
    }
    return cfg;
}

std::string ExperimentConfig::resolved_text() const {
    std::ostringstream os;
    os.precision(12);
    os << "[data]\n";
    os << "source = " << source << "\n";
    os << "interactions = " << interactions << "\n";
    os << "items = " << items << "\n";
    os << "synth_users = " << synth.num_users << "\n";
    os << "synth_items = " << synth.num_items << "\n";
    os << "synth_topics = " << synth.topics << "\n";
    os << "synth_title_tokens = " << synth.tokens_per_title << "\n";
    os << "synth_vocab = " << synth.vocab_size << "\n";
    os << "synth_min_inter = " << synth.min_interactions << "\n";
    os << "synth_max_inter = " << synth.max_interactions << "\n";
    os << "synth_cold_fraction = " << synth.cold_fraction << "\n";
    os << "synth_zipf = " << synth.zipf_exponent << "\n";
    os << "synth_tau = " << synth.tau << "\n";
    os << "synth_seed = " << synth.seed << "\n";
    os << "min_interactions = " << min_interactions << "\n";
    os << "max_seq_len = " << max_seq_len << "\n";
    os << "warm_filter_k = " << warm_filter_k << "\n";
    os << "\n[model]\n";
    os << "backbone = " << backbone << "\n";
    os << "encoder = " << encoder << "\n";
    os << "d = " << d << "\n";
    os << "blocks = " << blocks << "\n";
    os << "heads = " << heads << "\n";
    os << "dssm_layers = " << dssm_layers << "\n";
    os << "enc_width = " << enc_width << "\n";
    os << "enc_blocks = " << enc_blocks << "\n";
    os << "enc_heads = " << enc_heads << "\n";
    os << "max_title_tokens = " << max_title_tokens << "\n";
    os << "adapter_depth = " << adapter_depth << "\n";
    os << "fusion_mode = " << fusion_mode << "\n";
    os << "fusion_depth = " << fusion_depth << "\n";
    os << "fusion_modality = " << fusion_modality << "\n";
    os << "mlm_epochs = " << mlm_epochs << "\n";
    os << "mlm_mask_prob = " << mlm_mask_prob << "\n";
    os << "mlm_lr = " << mlm_lr << "\n";
    os << "mlm_batch = " << mlm_batch << "\n";
    os << "\n[train]\n";
    os << "lr = " << hp.lr << "\n";
    os << "lr_encoder = " << hp.lr_encoder << "\n";
    os << "batch = " << hp.batch << "\n";
    os << "weight_decay = " << hp.weight_decay << "\n";
    os << "dropout = " << hp.dropout << "\n";
    os << "epochs = " << hp.epochs << "\n";
    os << "patience = " << hp.patience << "\n";
    os << "seed = " << hp.seed << "\n";
    os << "\n[eval]\n";
    os << "n = " << eval_n << "\n";
    os << "warm_k = ";
    for (std::size_t i = 0; i < warm_ks.size(); ++i) os << (i ? "," : "") << warm_ks[i];
    os << "\n";
    os << "exclude_history = " << (exclude_history ? "true" : "false") << "\n";
    os << "\n[output]\n";
    os << "dir = " << out_dir << "\n";
    return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
    // identity of what ran, independent of where the artifacts land
    const std::string text = resolved_text();
    const std::size_t cut = text.find("\n[output]");
    return fnv1a(cut == std::string::npos ? text : text.substr(0, cut));
}

void ExperimentConfig::validate() const {
    if (source != "synth" && source != "files") {
        throw ConfigError("config: data.source must be synth or files");
    }
    if (source == "files" && interactions.empty()) {
        throw ConfigError("config: data.interactions is required for files source");
    }
    if (source == "synth") synth.validate();
    if (backbone != "sasrec" && backbone != "dssm") {
        throw ConfigError("config: model.backbone must be sasrec or dssm");
    }
    if (encoder != "id" && encoder != "text_e2e" && encoder != "frozen" && encoder != "fusion") {
        throw ConfigError("config: model.encoder must be id|text_e2e|frozen|fusion");
    }
    if (encoder == "fusion" && fusion_modality != "text_e2e" && fusion_modality != "frozen") {
        throw ConfigError("config: model.fusion_modality must be text_e2e or frozen");
    }
    if (fusion_mode != "add" && fusion_mode != "con") {
        throw ConfigError("config: model.fusion_mode must be add or con");
    }
    if (mlm_epochs > 0 && encoder != "text_e2e") {
        throw ConfigError("config: mlm_epochs needs the text_e2e encoder");
    }
    if (min_interactions < 3) {
        throw ConfigError("config: data.min_interactions must be >= 3 for leave-one-out");
    }
    if (max_seq_len < 3) throw ConfigError("config: data.max_seq_len must be >= 3");
    if (warm_filter_k < 0) throw ConfigError("config: data.warm_filter_k must be >= 0");
    if (d <= 0 || blocks <= 0 || heads <= 0 || enc_width <= 0 || enc_blocks <= 0 ||
        enc_heads <= 0) {
        throw ConfigError("config: model sizes must be positive");
    }
    if (adapter_depth < 0) throw ConfigError("config: adapter_depth must be >= 0");
    hp.validate();
}

// --- data + model building -------------------------------------------------

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData data;
    catalog::InteractionLog raw;
    std::vector<catalog::RawItem> raw_items;
    bool have_raw_items = false;
    if (cfg.source == "synth") {
        auto gen = synthgen::generate(cfg.synth);
        raw = std::move(gen.log);
        raw_items = std::move(gen.items);
        have_raw_items = true;
        data.truth = std::move(gen.truth);
        data.has_truth = true;
    } else {
        raw = catalog::load_interactions(cfg.interactions);
        if (!cfg.items.empty()) {
            raw_items = catalog::load_items(cfg.items);
            have_raw_items = true;
        }
    }
    data.dataset_hash = raw.content_hash();
    std::unordered_map<std::string, long> raw_counts;
    {
        const auto rc = raw.item_counts();
        for (int i = 0; i < raw.num_items(); ++i) raw_counts[raw.item_keys[i]] = rc[i];
    }
    catalog::InteractionLog* source = &raw;
    catalog::InteractionLog warm;
    if (cfg.warm_filter_k > 0) {
        warm = catalog::warm_k_filter(raw, cfg.warm_filter_k, cfg.min_interactions);
        source = &warm;
    }
    auto filtered = catalog::filter_min_interactions(*source, cfg.min_interactions);
    data.log = catalog::truncate_user_sequences(filtered, cfg.max_seq_len);
    data.split = catalog::leave_one_out_split(data.log);
    data.original_item_counts.resize(data.log.num_items());
    for (int i = 0; i < data.log.num_items(); ++i) {
        data.original_item_counts[i] = raw_counts.at(data.log.item_keys[i]);
    }
    if (have_raw_items) {
        data.items = catalog::bind_items(data.log, raw_items, cfg.max_title_tokens);
        data.has_items = true;
    }
    return data;
}

namespace {

std::unique_ptr<encoders::ItemEncoder> build_encoder(const ExperimentConfig& cfg,
                                                     const PreparedData& data,
                                                     const std::string& which, Rng& rng) {
    const std::size_t m = static_cast<std::size_t>(data.split.num_items);
    if (which == "id") {
        return std::make_unique<encoders::IdEmbeddingEncoder>(m, cfg.d, rng);
    }
    if (which == "text_e2e") {
        if (!data.has_items) throw ConfigError("text_e2e encoder needs an item file with titles");
        std::vector<std::vector<int>> tokens(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (!data.items.records[i].has_tokens) {
                throw ConfigError("text_e2e encoder: item '" + data.log.item_keys[i] +
                                  "' has no title");
            }
            tokens[i] = data.items.records[i].tokens;
        }
        encoders::TextEncoderConfig tcfg;
        tcfg.vocab_size = static_cast<std::size_t>(data.items.vocab.size());
        tcfg.width = cfg.enc_width;
        tcfg.blocks = cfg.enc_blocks;
        tcfg.heads = cfg.enc_heads;
        tcfg.max_positions = static_cast<std::size_t>(cfg.max_title_tokens) + 1;
        tcfg.out_dim = cfg.d;
        return std::make_unique<encoders::TextEncoder>(tcfg, std::move(tokens), rng);
    }
    if (which == "frozen") {
        if (!data.has_items) throw ConfigError("frozen encoder needs an item file with features");
        std::vector<std::vector<real_t>> features(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (!data.items.records[i].has_features) {
                throw ConfigError("frozen encoder: item '" + data.log.item_keys[i] +
                                  "' has no feature vector");
            }
            features[i] = data.items.records[i].features;
        }
        return std::make_unique<encoders::FrozenFeatureEncoder>(std::move(features),
                                                                cfg.adapter_depth, cfg.d, rng);
    }
    if (which == "fusion") {
        auto id_side = std::make_unique<encoders::IdEmbeddingEncoder>(m, cfg.d, rng);
        auto mo_side = build_encoder(cfg, data, cfg.fusion_modality, rng);
        encoders::FusionSpec spec;
        spec.mode = cfg.fusion_mode == "add" ? encoders::FusionMode::kAdd
                                             : encoders::FusionMode::kCon;
        spec.post_depth = static_cast<std::size_t>(cfg.fusion_depth);
        return std::make_unique<encoders::FusionEncoder>(std::move(id_side), std::move(mo_side),
                                                         spec, rng);
    }
    throw ConfigError("unknown encoder '" + which + "'");
}

}  // namespace

std::unique_ptr<training::RecModel> build_model(const ExperimentConfig& cfg,
                                                const PreparedData& data) {
    Rng init_rng(derive_seed(cfg.hp.seed, "init"));
    auto encoder = build_encoder(cfg, data, cfg.encoder, init_rng);
    const auto kind = cfg.backbone == "sasrec" ? training::BackboneKind::kSasrec
                                               : training::BackboneKind::kDssm;
    return std::make_unique<training::RecModel>(
        kind, std::move(encoder), static_cast<std::size_t>(data.log.num_users()),
        static_cast<std::size_t>(cfg.max_seq_len), static_cast<std::size_t>(cfg.blocks),
        static_cast<std::size_t>(cfg.heads), static_cast<std::size_t>(cfg.dssm_layers), init_rng);
}

// --- run ------------------------------------------------------------------

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.seed_set) throw ConfigError("config: train.seed is required");
    if (cfg.out_dir.empty()) throw ConfigError("config: output.dir is required");

    RunResult result;
    result.out_dir = cfg.out_dir;
    fs::create_directories(cfg.out_dir);
    write_text_file((fs::path(cfg.out_dir) / "config.resolved").string(), cfg.resolved_text());

    PreparedData data = prepare_data(cfg);
    auto model = build_model(cfg, data);

    if (cfg.mlm_epochs > 0) {
        auto* text = dynamic_cast<encoders::TextEncoder*>(&model->encoder());
        if (text == nullptr) throw ConfigError("mlm pretraining needs the text_e2e encoder");
        encoders::mlm_pretrain(*text, cfg.mlm_mask_prob, cfg.mlm_epochs, cfg.mlm_batch, cfg.mlm_lr,
                               derive_seed(cfg.hp.seed, "mlm"));
    }

    training::HyperParams hp = cfg.hp;
    hp.d = cfg.d;
    hp.eval_n = cfg.eval_n;
    result.train_report = training::train(*model, data.split, hp);
    result.train_report.label = cfg.backbone + "/" + model->encoder().kind();
    result.collapsed = result.train_report.collapsed;

    auto scorer = model->make_scorer(data.split, eval::TargetKind::kTest);
    eval::EvalOptions opts;
    opts.n = cfg.eval_n;
    opts.target = eval::TargetKind::kTest;
    opts.exclude_history = cfg.exclude_history;
    result.ranking_report = eval::evaluate(
        *scorer, data.split,
        eval::standard_groups(data.split, cfg.warm_ks, &data.original_item_counts), opts);
    result.ranking_report.seed = cfg.hp.seed;
    result.ranking_report.dataset_hash = data.dataset_hash;
    result.ranking_report.config_hash = cfg.config_hash();
    result.ranking_report.backbone = cfg.backbone;
    result.ranking_report.encoder = model->encoder().kind();

    write_text_file((fs::path(cfg.out_dir) / "train_report.tsv").string(),
                    result.train_report.to_tsv());
    write_text_file((fs::path(cfg.out_dir) / "ranking_report.tsv").string(),
                    result.ranking_report.to_tsv());
    write_text_file((fs::path(cfg.out_dir) / "ranking_report.json").string(),
                    result.ranking_report.to_json());
    checkpoint::save(model->all_params(), (fs::path(cfg.out_dir) / "checkpoint.bin").string());
    return result;
}

std::vector<RunResult> run_grid(const std::string& grid_path, const std::string& base_out_dir) {
    std::istringstream in(read_text_file(grid_path));
    std::vector<RunResult> results;
    std::string line;
    const fs::path grid_dir = fs::path(grid_path).parent_path();
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        fs::path config_path(line);
        if (config_path.is_relative() && !grid_dir.empty()) config_path = grid_dir / config_path;
        ExperimentConfig cfg = ExperimentConfig::from_file(config_path.string());
        cfg.out_dir = (fs::path(base_out_dir) / config_path.stem().string()).string();
        results.push_back(run_experiment(cfg));
    }
    return results;
}

eval::RankingReport evaluate_checkpoint(const ExperimentConfig& cfg,
                                        const std::string& checkpoint_path) {
    cfg.validate();
    PreparedData data = prepare_data(cfg);
    auto model = build_model(cfg, data);
    checkpoint::load_into(model->all_params(), checkpoint_path);

    auto scorer = model->make_scorer(data.split, eval::TargetKind::kTest);
    eval::EvalOptions opts;
    opts.n = cfg.eval_n;
    opts.target = eval::TargetKind::kTest;
    opts.exclude_history = cfg.exclude_history;
    auto report = eval::evaluate(
        *scorer, data.split,
        eval::standard_groups(data.split, cfg.warm_ks, &data.original_item_counts), opts);
    report.seed = cfg.hp.seed;
    report.dataset_hash = data.dataset_hash;
    report.config_hash = cfg.config_hash();
    report.backbone = cfg.backbone;
    report.encoder = model->encoder().kind();
    return report;
}

// --- compare / cost -----------------------------------------------------

double relative_improvement_pct(double best_modality, double best_id) {
    if (best_id == 0) throw ContractError("compare: zero ID-side metric");
    return (best_modality - best_id) / best_id * 100.0;
}

std::vector<CompareRow> compare(const std::vector<eval::RankingReport>& reports) {
    if (reports.size() < 2) throw ContractError("compare: need at least two reports");
    for (const auto& r : reports) {
        if (r.n != reports.front().n) {
            throw ContractError("compare: reports disagree on N (" + std::to_string(r.n) + " vs " +
                                std::to_string(reports.front().n) + ")");
        }
        if (r.dataset_hash != reports.front().dataset_hash) {
            throw ContractError("compare: reports come from different datasets (hash mismatch)");
        }
    }
    bool any_id = false, any_mo = false;
    double id_hr = 0, id_ndcg = 0, mo_hr = 0, mo_ndcg = 0;
    for (const auto& r : reports) {
        const auto* g = r.find_group("regular");
        if (g == nullptr) throw ContractError("compare: report lacks the regular group");
        if (r.encoder == "id") {
            id_hr = any_id ? std::max(id_hr, g->hr) : g->hr;
            id_ndcg = any_id ? std::max(id_ndcg, g->ndcg) : g->ndcg;
            any_id = true;
        } else {
            mo_hr = any_mo ? std::max(mo_hr, g->hr) : g->hr;
            mo_ndcg = any_mo ? std::max(mo_ndcg, g->ndcg) : g->ndcg;
            any_mo = true;
        }
    }
    if (!any_id || !any_mo) {
        throw ContractError("compare: need at least one ID-based and one modality-based report");
    }
    std::vector<CompareRow> rows;
    rows.push_back({"hr@" + std::to_string(reports.front().n), id_hr, mo_hr,
                    relative_improvement_pct(mo_hr, id_hr)});
    rows.push_back({"ndcg@" + std::to_string(reports.front().n), id_ndcg, mo_ndcg,
                    relative_improvement_pct(mo_ndcg, id_ndcg)});
    return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os << "metric\tbest_idrec\tbest_morec\timprov\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%+.2f%%", r.metric.c_str(), r.best_id,
                      r.best_modality, r.improvement_pct);
        os << buf << '\n';
    }
    return os.str();
}

std::vector<CostRow> cost_report(
    const std::vector<std::pair<std::string, training::TrainReport>>& reports) {
    std::vector<CostRow> rows;
    for (const auto& [label, report] : reports) {
        CostRow row;
        row.label = label;
        row.params = report.param_count;
        row.encoder_params = report.encoder_param_count;
        if (!report.epochs.empty()) {
            double total = 0;
            for (const auto& e : report.epochs) total += e.seconds;
            row.seconds_per_epoch = total / static_cast<double>(report.epochs.size());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_cost_table(const std::vector<CostRow>& rows) {
    std::ostringstream os;
    os << "config\tparams\tencoder_params\tseconds_per_epoch\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%ld\t%ld\t%.3f", r.label.c_str(), r.params,
                      r.encoder_params, r.seconds_per_epoch);
        os << buf << '\n';
    }
    return os.str();
}

}  // namespace recbench::experiment

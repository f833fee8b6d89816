// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: gen | prepare | train | eval | compare | cost.
// Exit codes: 0 success, 2 configuration error, 3 collapse-aborted run.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "recbench/checkpoint.hpp"
#include "recbench/experiment.hpp"

using namespace recbench;
namespace fs = std::filesystem;

namespace {

// Appends `--set section.key=value` overrides as config lines, so overrides
// go through the same parser as the file itself.
std::string apply_overrides(std::string text, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const auto dot = kv.find('.');
        const auto eq = kv.find('=');
        if (dot == std::string::npos || eq == std::string::npos || eq < dot) {
            throw ConfigError("--set expects section.key=value, got '" + kv + "'");
        }
        text += "\n[" + kv.substr(0, dot) + "]\n";
        text += kv.substr(dot + 1) + "\n";
    }
    return text;
}

int cmd_gen(const synthgen::GenConfig& cfg, const std::string& out_dir) {
    auto result = synthgen::generate(cfg);
    fs::create_directories(out_dir);
    catalog::save_interactions(result.log, (fs::path(out_dir) / "interactions.tsv").string());
    catalog::save_items(result.items, (fs::path(out_dir) / "items.tsv").string());
    synthgen::save_ground_truth(result.truth, (fs::path(out_dir) / "ground_truth.tsv").string());
    std::cout << "generated " << result.log.num_users() << " users, " << result.log.num_items()
              << " items, " << result.log.total_interactions() << " interactions -> " << out_dir
              << "\n";
    return 0;
}

int cmd_prepare(const experiment::ExperimentConfig& cfg, const std::string& out_dir) {
    auto data = experiment::prepare_data(cfg);
    fs::create_directories(out_dir);
    catalog::save_interactions(data.log, (fs::path(out_dir) / "filtered_interactions.tsv").string());
    catalog::save_histogram(catalog::popularity_histogram(data.split.train),
                            (fs::path(out_dir) / "histogram.tsv").string());
    const auto part = catalog::cold_new_partition(data.split);
    std::ostringstream stats;
    stats << "users\t" << data.log.num_users() << "\n";
    stats << "items\t" << data.log.num_items() << "\n";
    stats << "interactions\t" << data.log.total_interactions() << "\n";
    stats << "valid_targets\t" << data.split.valid.size() << "\n";
    stats << "test_targets\t" << data.split.test.size() << "\n";
    stats << "test_new\t" << part.new_users.size() << "\n";
    stats << "test_cold\t" << part.cold_users.size() << "\n";
    stats << "test_other\t" << part.other_users.size() << "\n";
    stats << "dataset_hash\t" << data.dataset_hash << "\n";
    experiment::write_text_file((fs::path(out_dir) / "stats.tsv").string(), stats.str());
    std::cout << stats.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"recbench: train and benchmark sequential recommenders with pluggable item encoders"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    synthgen::GenConfig gen_cfg;
    std::string gen_out = "dataset";
    bool gen_seed_set = false;
    gen->add_option("--users", gen_cfg.num_users, "number of users");
    gen->add_option("--items", gen_cfg.num_items, "number of items");
    gen->add_option("--topics", gen_cfg.topics, "latent topics");
    gen->add_option("--title-tokens", gen_cfg.tokens_per_title, "tokens per title");
    gen->add_option("--vocab", gen_cfg.vocab_size, "vocabulary size");
    gen->add_option("--min-inter", gen_cfg.min_interactions, "min interactions per user");
    gen->add_option("--max-inter", gen_cfg.max_interactions, "max interactions per user");
    gen->add_option("--cold-fraction", gen_cfg.cold_fraction, "reserved cold item fraction");
    gen->add_option("--zipf", gen_cfg.zipf_exponent, "popularity skew exponent");
    gen->add_option("--tau", gen_cfg.tau, "preference noise temperature");
    gen->add_option("--seed", [&](const CLI::results_t& r) {
        gen_cfg.seed = std::stoull(r[0]);
        gen_seed_set = true;
        return true;
    }, "generator seed (required)");
    gen->add_option("--out", gen_out, "output directory");

    // --- config-driven commands ---
    std::string config_path, out_override, checkpoint_path, grid_path;
    std::vector<std::string> overrides;
    std::uint64_t seed_override = 0;
    bool train_seed_set = false;

    auto* prepare = app.add_subcommand("prepare", "filter, split, and report dataset statistics");
    prepare->add_option("--config", config_path, "experiment config file")->required();
    prepare->add_option("--set", overrides, "override: section.key=value");
    prepare->add_option("--out", out_override, "output directory");

    auto* train = app.add_subcommand("train", "run one experiment or a grid");
    train->add_option("--config", config_path, "experiment config file");
    train->add_option("--grid", grid_path, "file listing config paths, one per line");
    train->add_option("--set", overrides, "override: section.key=value");
    train->add_option("--seed", [&](const CLI::results_t& r) {
        seed_override = std::stoull(r[0]);
        train_seed_set = true;
        return true;
    }, "training seed (required unless the config sets one)");
    train->add_option("--out", out_override, "output directory override");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved checkpoint");
    eval_cmd->add_option("--config", config_path, "experiment config file")->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--set", overrides, "override: section.key=value");
    eval_cmd->add_option("--out", out_override, "output directory");

    auto* compare_cmd = app.add_subcommand("compare", "compare ranking reports (json)");
    std::vector<std::string> report_paths;
    compare_cmd->add_option("reports", report_paths, "ranking_report.json paths")->required();

    auto* cost_cmd = app.add_subcommand("cost", "tabulate parameter counts and epoch times");
    std::vector<std::string> train_report_paths;
    cost_cmd->add_option("reports", train_report_paths, "train_report.tsv paths")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (!gen_seed_set) throw ConfigError("gen: --seed is required");
            return cmd_gen(gen_cfg, gen_out);
        }
        if (prepare->parsed()) {
            auto cfg = experiment::ExperimentConfig::from_string(
                apply_overrides(experiment::read_text_file(config_path), overrides));
            cfg.validate();
            return cmd_prepare(cfg, out_override.empty() ? "prepared" : out_override);
        }
        if (train->parsed()) {
            if (!grid_path.empty()) {
                const std::string base = out_override.empty() ? "runs" : out_override;
                auto results = experiment::run_grid(grid_path, base);
                bool any_collapse = false;
                for (const auto& r : results) {
                    std::cout << r.out_dir << (r.collapsed ? "\tCOLLAPSED" : "\tok") << "\n";
                    any_collapse = any_collapse || r.collapsed;
                }
                return any_collapse ? 3 : 0;
            }
            if (config_path.empty()) throw ConfigError("train: --config or --grid is required");
            auto cfg = experiment::ExperimentConfig::from_string(
                apply_overrides(experiment::read_text_file(config_path), overrides));
            if (train_seed_set) {
                cfg.hp.seed = seed_override;
                cfg.seed_set = true;
            }
            if (!cfg.seed_set) throw ConfigError("train: --seed is required");
            if (!out_override.empty()) cfg.out_dir = out_override;
            auto result = experiment::run_experiment(cfg);
            std::cout << result.ranking_report.to_tsv();
            if (result.collapsed) {
                std::cout << "collapse flagged at epoch " << result.train_report.collapse_epoch
                          << "\n";
                return 3;
            }
            return 0;
        }
        if (eval_cmd->parsed()) {
            auto cfg = experiment::ExperimentConfig::from_string(
                apply_overrides(experiment::read_text_file(config_path), overrides));
            auto report = experiment::evaluate_checkpoint(cfg, checkpoint_path);
            std::cout << report.to_tsv();
            if (!out_override.empty()) {
                fs::create_directories(out_override);
                experiment::write_text_file(
                    (fs::path(out_override) / "ranking_report.tsv").string(), report.to_tsv());
                experiment::write_text_file(
                    (fs::path(out_override) / "ranking_report.json").string(), report.to_json());
            }
            return 0;
        }
        if (compare_cmd->parsed()) {
            std::vector<eval::RankingReport> reports;
            for (const auto& p : report_paths) {
                reports.push_back(eval::RankingReport::from_json(experiment::read_text_file(p)));
            }
            std::cout << experiment::format_compare_table(experiment::compare(reports));
            return 0;
        }
        if (cost_cmd->parsed()) {
            std::vector<std::pair<std::string, training::TrainReport>> labeled;
            for (const auto& p : train_report_paths) {
                const auto label = fs::path(p).parent_path().filename().string();
                labeled.emplace_back(label.empty() ? p : label,
                                     training::TrainReport::from_tsv(experiment::read_text_file(p)));
            }
            std::cout << experiment::format_cost_table(experiment::cost_report(labeled));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

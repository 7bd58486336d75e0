// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// rftdesk command line.
//
//   rftdesk generate-data  [--data.* ...] --data-dir DIR
//   rftdesk train-sft      [--config FILE] [--preset desk|paper] [--manifest RUN] [--<key> VALUE ...]
//   rftdesk train-rft      (same options)
//   rftdesk evaluate       (same options; --eval.checkpoint is required)
//   rftdesk table          [MANIFEST|DIR ...] [--run-grid DIR] [--table-out FILE]
//   rftdesk ablate-length  [config options] --ablation-dir DIR [--control]
//
// Every config key is also a flag (--trainer.kl_coefficient 0.04). Values are
// merged default < preset < manifest < config file < flags.
//
#include "rft/checkpoint.hpp"
#include "rft/config.hpp"
#include "rft/harness.hpp"
#include "rft/tasks.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace rft;

namespace {

// Short spellings for the most used keys.
const std::map<std::string, std::string> kAliases = {
    {"run.seed", "--seed"},
    {"run.think_mode", "--think-mode"},
    {"run.output_dir", "--out"},
    {"data.family", "--family"},
    {"trainer.total_steps", "--steps"},
    {"reward.length_enabled", "--length-reward"},
    {"eval.checkpoint", "--checkpoint"},
};

struct ConfigOptions {
    std::map<std::string, std::string> flags;   // key -> value, filled by CLI11
    std::string config_file;
    std::string preset = "desk";
    std::string manifest;
    bool print_config = false;

    void attach(CLI::App* app, bool with_sources = true) {
        for (const auto& k : config_keys()) {
            std::string names = std::string("--") + k.key;
            if (auto it = kAliases.find(k.key); it != kAliases.end()) names += "," + it->second;
            app->add_option_function<std::string>(
                names, [this, key = std::string(k.key)](const std::string& v) { flags[key] = v; }, k.doc);
        }
        if (!with_sources) return;
        app->add_option("--config", config_file, "flat key = value config file");
        app->add_option("--preset", preset, "desk (default) or paper")->check(CLI::IsMember({"desk", "paper"}));
        app->add_option("--manifest", manifest, "rerun: start from the config recorded in this run manifest");
        app->add_flag("--print-config", print_config, "print the resolved config and exit");
    }

    ExperimentConfig resolve(RunMode mode) const {
        ConfigMap file;
        if (!config_file.empty()) file = load_config_file(config_file);
        ConfigMap from_manifest;
        if (!manifest.empty()) {
            const Manifest m = load_manifest(manifest);
            from_manifest = m.config;
            from_manifest["run.id"] = m.run_id;
            from_manifest.erase("run.output_dir");
        }
        const ConfigMap mode_layer{{"run.mode", to_string(mode)}};
        // The family picks full-scale sizes, so it is resolved first.
        const ConfigMap upto = merge_layers({&from_manifest, &file, &flags});
        TaskFamily family = TaskFamily::banner;
        if (auto it = upto.find("data.family"); it != upto.end()) family = parse_task_family(it->second);
        const ConfigMap preset_layer = preset_overrides(preset, family);
        const ConfigMap merged = merge_layers({&preset_layer, &from_manifest, &file, &flags, &mode_layer});
        ExperimentConfig c = ExperimentConfig::from_map(merged);
        c.validate();
        return c;
    }
};

int run_mode(const ConfigOptions& opts, RunMode mode) {
    const ExperimentConfig c = opts.resolve(mode);
    if (opts.print_config) {
        std::cout << format_config(c.to_map());
        return 0;
    }
    const RunOutcome out = run(c, &std::cout);
    std::cout << "run " << out.manifest.run_id << " " << out.manifest.status << " -> " << out.directory << "\n";
    if (out.manifest.eval) std::cout << "eval accuracy " << out.manifest.eval->accuracy << "\n";
    if (out.manifest.window) {
        std::cout << "final-window accuracy " << out.manifest.window->accuracy << " mean length "
                  << out.manifest.window->mean_response_length << "\n";
    }
    return out.status;
}

std::vector<Manifest> collect_manifests(const std::vector<std::string>& paths) {
    std::vector<std::string> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file() && e.path().filename() == "manifest.json") files.push_back(e.path().string());
            }
        } else {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Manifest> out;
    for (const auto& f : files) out.push_back(load_manifest(f));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rftdesk: desk-scale reinforcement fine-tuning with verifiable rewards"};
    app.require_subcommand(1);

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "write train/eval datasets and the zero-initialized checkpoint");
    ConfigOptions gen_opts;
    gen_opts.attach(gen, false);
    gen->add_option("--config", gen_opts.config_file, "flat key = value config file");
    std::string gen_out;
    gen->add_option("--data-dir", gen_out, "output directory")->required();

    ConfigOptions sft_opts, rft_opts, eval_opts, abl_opts, table_opts;
    auto* sft = app.add_subcommand("train-sft", "supervised fine-tuning baseline");
    sft_opts.attach(sft);
    auto* rft = app.add_subcommand("train-rft", "GRPO reinforcement fine-tuning");
    rft_opts.attach(rft);
    auto* ev = app.add_subcommand("evaluate", "greedy evaluation of a checkpoint");
    eval_opts.attach(ev);

    auto* table = app.add_subcommand("table", "SFT vs RFT comparison table from run manifests");
    std::vector<std::string> table_inputs;
    std::string grid_dir, table_out;
    table->add_option("inputs", table_inputs, "manifest files or directories (searched recursively)");
    table->add_option("--run-grid", grid_dir, "first run the six cells for --family into this directory");
    table->add_option("--table-out", table_out, "also write the table to this file");
    table_opts.attach(table);

    auto* abl = app.add_subcommand("ablate-length", "paired RFT runs with and without the length reward");
    abl_opts.attach(abl);
    std::string abl_dir;
    bool abl_control = false;
    abl->add_option("--ablation-dir", abl_dir, "output directory")->required();
    abl->add_flag("--control", abl_control, "also rerun the disabled arm (null ablation)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const ExperimentConfig c = gen_opts.resolve(RunMode::train_rft);
            fs::create_directories(gen_out);
            const Dataset train = generate_dataset(c.task, c.train_seed, c.train_size);
            const Dataset eval = generate_dataset(c.task, c.eval_seed, c.eval_size);
            save_dataset((fs::path(gen_out) / "train.tsv").string(), train);
            save_dataset((fs::path(gen_out) / "eval.tsv").string(), eval);
            write_initial_checkpoint(c, (fs::path(gen_out) / "initial_checkpoint.txt").string());
            std::cout << "train.tsv header " << hex64(dataset_header_hash(train)) << " (" << train.instances.size()
                      << " instances)\neval.tsv header " << hex64(dataset_header_hash(eval)) << " ("
                      << eval.instances.size() << " instances)\n";
            return 0;
        }
        if (sft->parsed()) return run_mode(sft_opts, RunMode::train_sft);
        if (rft->parsed()) return run_mode(rft_opts, RunMode::train_rft);
        if (ev->parsed()) return run_mode(eval_opts, RunMode::evaluate);
        if (table->parsed()) {
            std::vector<Manifest> manifests;
            if (!grid_dir.empty()) {
                const ExperimentConfig base = table_opts.resolve(RunMode::train_rft);
                manifests = run_grid(base, grid_dir, &std::cout);
            }
            auto more = collect_manifests(table_inputs);
            manifests.insert(manifests.end(), more.begin(), more.end());
            const std::string text = format_table(comparison_table(manifests));
            std::cout << text;
            if (!table_out.empty()) {
                std::ofstream(table_out, std::ios::binary) << text;
            }
            return 0;
        }
        if (abl->parsed()) {
            const ExperimentConfig base = abl_opts.resolve(RunMode::train_rft);
            const AblationSummary s = length_ablation(base, abl_dir, abl_control, &std::cout);
            std::cout << format_ablation(s);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

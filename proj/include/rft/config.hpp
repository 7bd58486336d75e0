// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration.
//
// Config files are flat "key = value" text, one entry per line; '#' starts a
// comment line and blank lines are ignored. Keys are namespaced by module
// (run.*, data.*, trainer.*, decode.*, reward.*, policy.*, sft.*, eval.*) and
// are exactly the CLI flag names without the leading "--". Layers are merged
// default < preset < file < flags.
//
#pragma once

#include "rft/grpo.hpp"
#include "rft/rewards.hpp"
#include "rft/tasks.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

namespace rft {

using ConfigMap = std::map<std::string, std::string>;

enum class RunMode { train_sft, train_rft, evaluate };
const char* to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

/// Column groups of the SFT vs RFT comparison.
enum class Paradigm { training_free, sft, rft };
const char* to_string(Paradigm paradigm);
Paradigm parse_paradigm(const std::string& text);

struct ConfigKey {
    const char* key;
    const char* doc;
};

/// Every recognized key, in documentation order.
std::span<const ConfigKey> config_keys();

struct ExperimentConfig {
    RunMode mode = RunMode::train_rft;
    std::string run_id;       // empty: derived from family, paradigm, think mode and seed
    std::string output_dir;   // empty: runs/<run_id>
    std::uint64_t seed = 1;
    ThinkMode think_mode = ThinkMode::without_think;
    std::size_t final_window = 50;

    TaskParams task;
    std::string train_file;   // empty: generate from data.train_seed / data.train_size
    std::string eval_file;
    std::size_t train_size = kDeskSizes.train;
    std::size_t eval_size = kDeskSizes.eval;
    std::uint64_t train_seed = 1;
    std::uint64_t eval_seed = 2;

    std::size_t context_window = 4;
    TrainerConfig trainer;
    RewardConfig reward;
    double sft_learning_rate = 0.1;
    std::size_t sft_batch_size = 4;

    std::string checkpoint;   // required for evaluate
    Paradigm eval_paradigm = Paradigm::training_free;
    bool eval_constrained = true;

    Paradigm paradigm() const;
    std::string resolved_run_id() const;
    std::string resolved_output_dir() const;

    /// Throws Fault naming the offending key.
    void validate() const;

    /// Canonical text form of every key; from_map(to_map()) round-trips.
    ConfigMap to_map() const;
    /// Unspecified keys keep their defaults; unknown keys and unparsable
    /// values throw Fault naming the key.
    static ExperimentConfig from_map(const ConfigMap& values);
};

/// Parses config-file text. Duplicate keys and malformed lines throw Fault with
/// the line number.
ConfigMap parse_config_text(const std::string& text, const std::string& origin = "config");
ConfigMap load_config_file(const std::string& path);
std::string format_config(const ConfigMap& values);

/// Overrides for a named preset: "desk" (empty) or "paper" (7B hyperparameters
/// and full-scale dataset sizes for `family`).
ConfigMap preset_overrides(const std::string& name, TaskFamily family);

/// Later layers win.
ConfigMap merge_layers(std::initializer_list<const ConfigMap*> layers);

}  // namespace rft

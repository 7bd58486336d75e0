// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: one run = one directory holding
//
//   manifest.json   resolved config, seeds, dataset header hashes, results,
//                   artifact checksums (FNV-1a 64 of the file bytes), status
//   metrics.csv     RFT: one row per optimizer step
//   loss.csv        SFT: "step,loss"
//   checkpoint.txt  final policy
//   eval_log.tsv    one row per evaluation instance
//   train.tsv       the training set actually used (train modes)
//   eval.tsv        the evaluation set actually used
//
// A run that faults midway still writes what it has and marks the manifest
// "partial" with the error text.
//
#pragma once

#include "rft/config.hpp"
#include "rft/evaluation.hpp"
#include "rft/grpo.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rft {

inline constexpr const char* kMetricsHeader = "step,mean_reward,accuracy,mean_response_length,mean_kl,grad_norm";

void write_metrics_csv(std::ostream& out, const TrainingMetrics& metrics);
/// Parses a metrics CSV (header must match exactly). Only the CSV columns are
/// filled in; mean_format stays 0.
TrainingMetrics read_metrics_csv(std::istream& in);
TrainingMetrics load_metrics_csv(const std::string& path);

struct WindowSummary {
    std::size_t steps = 0;   // rows averaged
    double mean_reward = 0.0;
    double accuracy = 0.0;
    double mean_response_length = 0.0;
    double mean_kl = 0.0;
};

/// Means over the last `window` rows (all rows if fewer).
WindowSummary final_window(const TrainingMetrics& metrics, std::size_t window);

struct EvalSummary {
    double accuracy = 0.0;
    double format_rate = 0.0;
    double mean_response_length = 0.0;
    std::size_t instances = 0;
};

struct Manifest {
    std::string format = "rftdesk-manifest v1";
    std::string run_id;
    std::string status;   // "complete" | "partial"
    std::string error;
    std::string mode;
    std::string paradigm;
    std::string family;
    std::string think_mode;
    std::string template_version = "v1";
    std::string vocab_hash;
    ConfigMap config;     // as given (re-runnable)
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> dataset_header_hashes;
    std::map<std::string, std::string> artifacts;   // file name -> checksum
    std::size_t steps_completed = 0;
    std::optional<EvalSummary> eval;
    std::optional<WindowSummary> window;

    std::string path;     // where it was loaded from (not serialized)
};

std::string manifest_to_json(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::string& path);

/// FNV-1a 64 of a file's bytes as "fnv1a64:<hex>".
std::string file_checksum(const std::string& path);

struct RunOutcome {
    int status = 0;        // 0 ok, 1 fault mid-run
    std::string directory;
    Manifest manifest;
};

/// Executes one experiment. Invalid configs throw Fault before anything is
/// written; faults after the run directory exists produce a partial manifest
/// and status 1. Progress lines go to `log` when non-null.
RunOutcome run(const ExperimentConfig& config, std::ostream* log = nullptr);

/// The config recorded in a manifest, with its output directory replaced.
ExperimentConfig config_from_manifest(const Manifest& manifest, const std::string& output_dir);

/// Zero-initialized policy for the config's vocabulary: the training-free
/// baseline.
void write_initial_checkpoint(const ExperimentConfig& config, const std::string& path);

// ---- comparison grid ----------------------------------------------------------

struct ComparisonCell {
    std::string run_id;
    double accuracy = 0.0;
};

struct ComparisonRow {
    std::string family;
    // Index: paradigm * 2 + (think ? 0 : 1), paradigms in order training_free,
    // sft, rft.
    std::optional<ComparisonCell> cells[6];
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;   // sorted by family name
};

/// Builds the grid from complete manifests with an evaluation result. Throws
/// Fault on two manifests for one cell (naming both run ids), on partial
/// manifests, and when SFT and RFT runs of a family differ in step budget.
ComparisonTable comparison_table(std::span<const Manifest> manifests);
std::string format_table(const ComparisonTable& table);

/// Runs the six cells for `base.task.family` under `directory`: training-free
/// (evaluation of the zero policy), SFT and RFT, each with and without think.
std::vector<Manifest> run_grid(const ExperimentConfig& base, const std::string& directory,
                               std::ostream* log = nullptr);

// ---- length ablation ------------------------------------------------------------

struct AblationArm {
    std::string name;
    std::string directory;
    bool length_enabled = false;
    WindowSummary window;
    EvalSummary eval;
};

struct AblationSummary {
    std::string family;
    std::size_t window = 0;
    AblationArm without_length;
    AblationArm with_length;
    std::optional<AblationArm> control;   // second length-off arm (null ablation)
    double accuracy_delta() const { return with_length.window.accuracy - without_length.window.accuracy; }
    double length_delta() const {
        return with_length.window.mean_response_length - without_length.window.mean_response_length;
    }
    double eval_accuracy_delta() const { return with_length.eval.accuracy - without_length.eval.accuracy; }
};

/// Two RFT runs with matched seeds differing only in reward.length_enabled
/// (plus an optional repeat of the disabled arm). Writes summary.json and
/// summary.txt into `directory`.
AblationSummary length_ablation(const ExperimentConfig& base, const std::string& directory, bool with_control,
                                std::ostream* log = nullptr);
std::string format_ablation(const AblationSummary& summary);

}  // namespace rft

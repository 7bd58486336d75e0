// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Supervised fine-tuning baseline.
//
// Sign convention: nll_loss_and_gradient returns the gradient of the LOSS
// (-log p), and sft_step DESCENDS it: W <- W - lr * grad. The GRPO trainer works
// with ascent directions instead.
//
#pragma once

#include "rft/policy.hpp"
#include "rft/tasks.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace rft {

struct SftExample {
    Tokens prompt;
    /// Gold response ending in `<eos>`.
    Tokens target;

    void validate(std::size_t max_response_length) const;
};

/// Target format for SFT data.
enum class SftTargetStyle {
    answer_only,   // <answer> gold </answer> <eos>
    with_think,    // <think> hmm </think> <answer> gold </answer> <eos>
};

Tokens sft_target(const Vocabulary& vocab, std::span<const TokenId> gold, SftTargetStyle style);

SftExample make_sft_example(const Vocabulary& vocab, const TaskInstance& task, ThinkMode mode);

struct SftConfig {
    double learning_rate = 0.1;
    std::size_t steps = 300;
    std::size_t batch_size = 4;
    std::size_t workers = 1;
    DecodeConfig decode;

    void validate() const;
};

std::pair<double, Matrix> nll_loss_and_gradient(const PolicyParams& params, const SftExample& example,
                                                const DecodeConfig& decode = {});

/// One descent step on the batch-mean NLL; returns the mean loss before the
/// update. Throws Fault and leaves `params` untouched on a non-finite gradient.
double sft_step(PolicyParams& params, std::span<const SftExample> batch, double learning_rate,
                const DecodeConfig& decode = {}, std::size_t workers = 1);

using LossCallback = std::function<void(std::size_t step, double loss)>;

/// Runs exactly config.steps sft_steps with deterministic dataset cycling.
/// Returns the per-step loss series.
std::vector<double> train_sft(PolicyParams& params, std::span<const SftExample> dataset, const SftConfig& config,
                              std::uint64_t seed, const LossCallback& on_step = {});

}  // namespace rft

// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rft/policy.hpp"
#include "rft/types.hpp"

#include <optional>
#include <span>

namespace rft {

struct LengthRewardConfig {
    double lambda = 1.0;
    double l0 = 100.0;
    bool enabled = false;

    void validate() const;
};

struct RewardConfig {
    double accuracy_weight = 1.0;
    double format_weight = 1.0;
    double length_weight = 1.0;
    LengthRewardConfig length;

    void validate() const;
};

struct RewardBreakdown {
    int accuracy = 0;
    int format = 0;
    std::optional<double> length;
    double total = 0.0;
};

std::optional<Tokens> extract_answer(const Rollout& rollout);

int accuracy_reward(const Rollout& rollout, std::span<const TokenId> gold);

/// Full-match format check on the response with any trailing `<eos>` removed:
///   think required:  <think> x* </think> <answer> y* </answer>
///   otherwise:       <answer> y* </answer>
/// where x and y contain no delimiter tokens.
int format_reward(const Rollout& rollout, bool think_required);

/// 1 / (1 + lambda * exp(-(L - L0))), evaluated without overflow. Rounded
/// toward the true value from below when it is within half an ulp of 1, so the
/// result always lies in (0, 1).
double normalized_length_reward(std::size_t length, const LengthRewardConfig& config);

RewardBreakdown composite_reward(const Rollout& rollout, std::span<const TokenId> gold, const RewardConfig& config,
                                 bool think_required);

}  // namespace rft

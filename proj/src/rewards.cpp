// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace rft {

namespace {

bool is_delimiter(TokenId t) {
    return t == kThinkOpen || t == kThinkClose || t == kAnswerOpen || t == kAnswerClose || t == kEos;
}

// Consumes `open x* close` starting at `pos`; returns the index after `close`.
std::optional<std::size_t> match_block(std::span<const TokenId> seq, std::size_t pos, TokenId open, TokenId close) {
    if (pos >= seq.size() || seq[pos] != open) return std::nullopt;
    ++pos;
    while (pos < seq.size() && !is_delimiter(seq[pos])) ++pos;
    if (pos >= seq.size() || seq[pos] != close) return std::nullopt;
    return pos + 1;
}

}  // namespace

void LengthRewardConfig::validate() const {
    if (!(lambda > 0.0)) throw Fault("reward.length.lambda must be > 0");
    if (!(l0 >= 0.0)) throw Fault("reward.length.l0 must be >= 0");
}

void RewardConfig::validate() const {
    if (!(accuracy_weight > 0.0)) throw Fault("reward.accuracy_weight must be > 0");
    if (!(format_weight >= 0.0)) throw Fault("reward.format_weight must be >= 0");
    if (!(length_weight >= 0.0)) throw Fault("reward.length_weight must be >= 0");
    length.validate();
}

std::optional<Tokens> extract_answer(const Rollout& rollout) {
    auto span = find_answer_span(rollout.response);
    if (!span) return std::nullopt;
    return Tokens(rollout.response.begin() + static_cast<std::ptrdiff_t>(span->first),
                  rollout.response.begin() + static_cast<std::ptrdiff_t>(span->second));
}

int accuracy_reward(const Rollout& rollout, std::span<const TokenId> gold) {
    if (gold.empty()) throw Fault("accuracy_reward needs a non-empty gold answer");
    auto answer = extract_answer(rollout);
    return answer && std::ranges::equal(*answer, gold) ? 1 : 0;
}

int format_reward(const Rollout& rollout, bool think_required) {
    std::span<const TokenId> seq = rollout.response;
    if (!seq.empty() && seq.back() == kEos) seq = seq.first(seq.size() - 1);
    std::size_t pos = 0;
    if (think_required) {
        auto after = match_block(seq, pos, kThinkOpen, kThinkClose);
        if (!after) return 0;
        pos = *after;
    }
    auto after = match_block(seq, pos, kAnswerOpen, kAnswerClose);
    return after && *after == seq.size() ? 1 : 0;
}

double normalized_length_reward(std::size_t length, const LengthRewardConfig& config) {
    config.validate();
    const double x = static_cast<double>(length) - config.l0;
    double r;
    if (x >= 0.0) {
        r = 1.0 / (1.0 + config.lambda * std::exp(-x));
    } else {
        // exp(x) / (exp(x) + lambda): no overflow for large |x|.
        const double e = std::exp(x);
        r = e / (e + config.lambda);
    }
    if (r >= 1.0) r = std::nextafter(1.0, 0.0);
    return r;
}

RewardBreakdown composite_reward(const Rollout& rollout, std::span<const TokenId> gold, const RewardConfig& config,
                                 bool think_required) {
    config.validate();
    RewardBreakdown b;
    b.accuracy = accuracy_reward(rollout, gold);
    b.format = format_reward(rollout, think_required);
    b.total = config.accuracy_weight * b.accuracy + config.format_weight * b.format;
    if (config.length.enabled) {
        b.length = normalized_length_reward(rollout.length, config.length);
        b.total += config.length_weight * *b.length;
    }
    return b;
}

}  // namespace rft

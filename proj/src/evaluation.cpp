// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/evaluation.hpp"

#include "rft/parallel.hpp"
#include "rft/rewards.hpp"
#include "rft/rng.hpp"

#include <algorithm>

namespace rft {

DecodeConfig response_decode(const Vocabulary& vocab, ThinkMode mode, DecodeConfig base) {
    auto& forbidden = base.forbidden_tokens;
    for (TokenId t = 0; t < vocab.size(); ++t) {
        const auto role = vocab.role(t);
        if (role == TokenRole::prompt || role == TokenRole::prompt_template) forbidden.push_back(t);
    }
    if (mode == ThinkMode::without_think) {
        forbidden.push_back(kThinkOpen);
        forbidden.push_back(kThinkClose);
    }
    std::sort(forbidden.begin(), forbidden.end());
    forbidden.erase(std::unique(forbidden.begin(), forbidden.end()), forbidden.end());
    return base;
}

StepConstraint format_constraint(const Vocabulary& vocab, ThinkMode mode, std::size_t max_response_length) {
    std::vector<char> is_body(vocab.size(), 0), is_label(vocab.size(), 0);
    for (TokenId t = 0; t < vocab.size(); ++t) {
        is_label[t] = vocab.role(t) == TokenRole::answer;
        is_body[t] = is_label[t] || vocab.role(t) == TokenRole::filler;
    }
    const bool think = mode == ThinkMode::with_think;
    return [=](std::span<const TokenId> prefix, std::span<char> forbid) {
        auto only = [&](TokenId keep) {
            std::fill(forbid.begin(), forbid.end(), 1);
            forbid[keep] = 0;
        };
        if (prefix.empty()) return only(think ? kThinkOpen : kAnswerOpen);
        const TokenId last = prefix.back();
        const bool after_open = prefix.size() >= 2 && prefix[prefix.size() - 2] == kAnswerOpen;
        if (last == kAnswerOpen) {
            for (std::size_t t = 0; t < forbid.size(); ++t) forbid[t] = is_label[t] ? 0 : 1;
        } else if (last == kAnswerClose) {
            only(kEos);
        } else if (last == kThinkClose) {
            only(kAnswerOpen);
        } else if (is_label[last] && after_open) {
            only(kAnswerClose);
        } else {
            // Inside the think block. Closing needs five tokens:
            // </think> <answer> label </answer> <eos>.
            if (prefix.size() + 5 >= max_response_length) return only(kThinkClose);
            for (std::size_t t = 0; t < forbid.size(); ++t) forbid[t] = (is_body[t] || t == kThinkClose) ? 0 : 1;
        }
    };
}

EvalResult evaluate(const PolicyParams& params, std::span<const TaskInstance> instances, ThinkMode mode,
                    const DecodeConfig& decode, const EvalOptions& options) {
    if (instances.empty()) throw Fault("evaluate needs a non-empty dataset");
    const auto& vocab = params.vocab();
    const DecodeConfig effective = response_decode(vocab, mode, decode);
    StepConstraint constraint;
    if (options.constrained) constraint = format_constraint(vocab, mode, effective.max_response_length);

    EvalResult result;
    result.records.resize(instances.size());
    parallel_for(instances.size(), options.workers, [&](std::size_t i) {
        const auto& task = instances[i];
        auto& rec = result.records[i];
        rec.rollout = decode_response(params, templated_prompt(vocab, task, mode), effective,
                                      derive_seed(options.seed, i), DecodeMode::greedy, constraint);
        rec.correct = accuracy_reward(rec.rollout, task.gold);
        rec.format = format_reward(rec.rollout, mode == ThinkMode::with_think);
    });
    for (const auto& rec : result.records) {
        result.accuracy += rec.correct;
        result.format_rate += rec.format;
        result.mean_response_length += static_cast<double>(rec.rollout.length);
    }
    const double n = static_cast<double>(instances.size());
    result.accuracy /= n;
    result.format_rate /= n;
    result.mean_response_length /= n;
    return result;
}

}  // namespace rft

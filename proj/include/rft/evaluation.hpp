// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rft/policy.hpp"
#include "rft/tasks.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace rft {

/// Decode settings for responses in a given think mode: prompt-only and
/// template tokens are never emitted, and without_think also forbids both
/// think delimiters.
DecodeConfig response_decode(const Vocabulary& vocab, ThinkMode mode, DecodeConfig base = {});

/// Grammar mask that only admits well-formed responses:
///   with_think:     <think> body* </think> <answer> label </answer> <eos>
///   without_think:  <answer> label </answer> <eos>
/// `body` is any filler or answer token; `label` is any answer token. The
/// think block is closed early enough to fit within max_response_length.
StepConstraint format_constraint(const Vocabulary& vocab, ThinkMode mode, std::size_t max_response_length);

struct EvalOptions {
    /// Apply format_constraint while decoding.
    bool constrained = true;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct EvalRecord {
    Rollout rollout;
    int correct = 0;
    int format = 0;
};

struct EvalResult {
    double accuracy = 0.0;
    double format_rate = 0.0;
    double mean_response_length = 0.0;
    std::vector<EvalRecord> records;
};

/// Greedy decoding of every instance (exact ties broken by a per-instance
/// seed) and exact-match scoring. Instances are raw tasks; the think-mode
/// template is added here.
EvalResult evaluate(const PolicyParams& params, std::span<const TaskInstance> instances, ThinkMode mode,
                    const DecodeConfig& decode, const EvalOptions& options = {});

}  // namespace rft

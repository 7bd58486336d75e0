// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Linear-softmax autoregressive policy.
//
// The next-token distribution is softmax(W * phi(prompt, prefix) / T), where
// phi concatenates
//   - K context slots, each a one-hot over |V| + 1 symbols (the extra symbol
//     pads slots before the response has K tokens), most recent token first;
//   - an exact bag-of-tokens count of the prompt over |V|.
// So d = K * (|V| + 1) + |V|. The same class serves as the trainable policy and
// as the frozen reference.
//
#pragma once

#include "rft/matrix.hpp"
#include "rft/types.hpp"
#include "rft/vocabulary.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace rft {

class FeatureExtractor {
public:
    static constexpr std::size_t kDefaultContextWindow = 4;

    FeatureExtractor(std::size_t vocab_size, std::size_t context_window = kDefaultContextWindow);

    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t context_window() const { return context_window_; }
    std::size_t prompt_feature_dim() const { return vocab_size_; }
    std::size_t dim() const { return context_window_ * (vocab_size_ + 1) + vocab_size_; }

    /// Column of context slot `slot` (0 = most recent) holding `token`, or the
    /// pad symbol when `token` is absent.
    std::size_t context_column(std::size_t slot, std::optional<TokenId> token) const;
    std::size_t prompt_column(TokenId token) const { return context_window_ * (vocab_size_ + 1) + token; }

    /// The K active context columns for a prefix; every slot contributes one.
    std::vector<std::size_t> context_columns(std::span<const TokenId> prefix) const;
    /// Non-zero prompt features as (column, count), ascending by column.
    std::vector<std::pair<std::size_t, double>> prompt_features(std::span<const TokenId> prompt) const;

    std::vector<double> dense(std::span<const TokenId> prompt, std::span<const TokenId> prefix) const;

    friend bool operator==(const FeatureExtractor&, const FeatureExtractor&) = default;

private:
    std::size_t vocab_size_;
    std::size_t context_window_;
};

struct DecodeConfig {
    double temperature = 1.0;
    std::size_t max_response_length = 1024;
    /// Tokens assigned probability zero at every step.
    std::vector<TokenId> forbidden_tokens;

    void validate() const;
};

class PolicyParams {
public:
    /// Zero weights: the uniform policy.
    PolicyParams(std::shared_ptr<const Vocabulary> vocab,
                 std::size_t context_window = FeatureExtractor::kDefaultContextWindow);
    PolicyParams(std::shared_ptr<const Vocabulary> vocab, FeatureExtractor features, Matrix weights);

    const Vocabulary& vocab() const { return *vocab_; }
    const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
    const FeatureExtractor& features() const { return features_; }
    const Matrix& weights() const { return weights_; }
    Matrix& weights() { return weights_; }

    /// Same vocabulary and feature layout; weights may differ.
    bool compatible_with(const PolicyParams& other) const;

private:
    std::shared_ptr<const Vocabulary> vocab_;
    FeatureExtractor features_;
    Matrix weights_;
};

struct Rollout {
    Tokens prompt;
    Tokens response;
    std::vector<double> per_token_log_probs;
    /// Response tokens excluding a trailing `<eos>`.
    std::size_t length = 0;
    std::optional<std::pair<std::size_t, std::size_t>> answer_span;

    friend bool operator==(const Rollout&, const Rollout&) = default;
};

/// Per-prompt evaluator: caches the prompt contribution to the logits so each
/// decoding step only adds K context columns.
class Scorer {
public:
    Scorer(const PolicyParams& params, std::span<const TokenId> prompt, const DecodeConfig& decode);

    /// Log-probabilities for the next token after `prefix`; forbidden tokens
    /// get -inf. `extra_forbidden`, when non-empty, is a per-token mask that is
    /// applied on top of the static one.
    void log_probs(std::span<const TokenId> prefix, std::span<double> out,
                   std::span<const char> extra_forbidden = {}) const;

    const std::vector<std::size_t>& last_context_columns() const { return context_columns_; }
    const std::vector<std::pair<std::size_t, double>>& prompt_features() const { return prompt_features_; }
    double temperature() const { return temperature_; }
    std::size_t vocab_size() const { return vocab_size_; }

private:
    const PolicyParams* params_;
    std::size_t vocab_size_;
    double temperature_;
    std::vector<std::pair<std::size_t, double>> prompt_features_;
    std::vector<double> prompt_logits_;
    std::vector<char> forbidden_;
    mutable std::vector<std::size_t> context_columns_;
    mutable std::vector<double> logits_;
};

/// Accumulates sum_t coef_t (x) phi_t into a |V| x d matrix, deferring the
/// prompt block (constant across steps) to finish().
class GradientAccumulator {
public:
    GradientAccumulator(Matrix& target, const Scorer& scorer);
    void add_step(std::span<const double> coef, std::span<const std::size_t> context_columns);
    void finish();

private:
    Matrix* target_;
    const Scorer* scorer_;
    std::vector<double> prompt_coef_;
};

std::vector<double> next_token_distribution(const PolicyParams& params, std::span<const TokenId> prompt,
                                            std::span<const TokenId> prefix, const DecodeConfig& decode);

/// Optional per-step mask hook for constrained decoding: set forbid[v] = 1 to
/// exclude v after `prefix`.
using StepConstraint = std::function<void(std::span<const TokenId> prefix, std::span<char> forbid)>;

enum class DecodeMode { sample, greedy };

/// Autoregressive decoding until `<eos>` or max_response_length. Greedy mode
/// takes the argmax and breaks exact ties uniformly using `seed`.
Rollout decode_response(const PolicyParams& params, std::span<const TokenId> prompt, const DecodeConfig& decode,
                        std::uint64_t seed, DecodeMode mode, const StepConstraint& constraint = {});

inline Rollout sample_response(const PolicyParams& params, std::span<const TokenId> prompt,
                               const DecodeConfig& decode, std::uint64_t seed) {
    return decode_response(params, prompt, decode, seed, DecodeMode::sample);
}

/// sum_t log P(o_t | q, o_<t). Faults on an empty response, an out-of-vocabulary
/// token, or a token with zero probability under the decode mask.
double sequence_log_prob(const PolicyParams& params, std::span<const TokenId> prompt,
                         std::span<const TokenId> response, const DecodeConfig& decode = {});

/// d/dW sequence_log_prob = sum_t (e_{o_t} - p_t) (x) phi_t / T.
Matrix log_prob_gradient(const PolicyParams& params, std::span<const TokenId> prompt,
                         std::span<const TokenId> response, const DecodeConfig& decode = {});

/// Deep copy used as the frozen reference policy.
inline PolicyParams snapshot_reference(const PolicyParams& params) { return params; }

}  // namespace rft

// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/policy.hpp"

#include "rft/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rft {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_tokens(const PolicyParams& params, std::span<const TokenId> tokens, const char* what) {
    for (TokenId t : tokens) {
        if (!params.vocab().contains(t)) {
            throw Fault(std::string(what) + " token id " + std::to_string(t) + " is outside the vocabulary of size " +
                        std::to_string(params.vocab().size()));
        }
    }
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::size_t vocab_size, std::size_t context_window)
    : vocab_size_(vocab_size), context_window_(context_window) {
    if (vocab_size_ == 0) throw Fault("feature extractor needs a non-empty vocabulary");
}

std::size_t FeatureExtractor::context_column(std::size_t slot, std::optional<TokenId> token) const {
    return slot * (vocab_size_ + 1) + (token ? *token : vocab_size_);
}

std::vector<std::size_t> FeatureExtractor::context_columns(std::span<const TokenId> prefix) const {
    std::vector<std::size_t> cols(context_window_);
    for (std::size_t k = 0; k < context_window_; ++k) {
        std::optional<TokenId> tok;
        if (k < prefix.size()) tok = prefix[prefix.size() - 1 - k];
        cols[k] = context_column(k, tok);
    }
    return cols;
}

std::vector<std::pair<std::size_t, double>> FeatureExtractor::prompt_features(std::span<const TokenId> prompt) const {
    std::vector<double> counts(vocab_size_, 0.0);
    for (TokenId t : prompt) {
        if (t >= vocab_size_) throw Fault("prompt token id " + std::to_string(t) + " is outside the vocabulary");
        counts[t] += 1.0;
    }
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t t = 0; t < vocab_size_; ++t) {
        if (counts[t] != 0.0) out.emplace_back(prompt_column(static_cast<TokenId>(t)), counts[t]);
    }
    return out;
}

std::vector<double> FeatureExtractor::dense(std::span<const TokenId> prompt, std::span<const TokenId> prefix) const {
    std::vector<double> phi(dim(), 0.0);
    for (std::size_t c : context_columns(prefix)) phi[c] = 1.0;
    for (auto [c, v] : prompt_features(prompt)) phi[c] = v;
    return phi;
}

void DecodeConfig::validate() const {
    if (!(temperature > 0.0)) throw Fault("decode.temperature must be > 0");
    if (max_response_length < 1) throw Fault("decode.max_response_length must be >= 1");
}

PolicyParams::PolicyParams(std::shared_ptr<const Vocabulary> vocab, std::size_t context_window)
    : vocab_(std::move(vocab)),
      features_(vocab_->size(), context_window),
      weights_(vocab_->size(), features_.dim(), 0.0) {}

PolicyParams::PolicyParams(std::shared_ptr<const Vocabulary> vocab, FeatureExtractor features, Matrix weights)
    : vocab_(std::move(vocab)), features_(features), weights_(std::move(weights)) {
    if (features_.vocab_size() != vocab_->size()) throw Fault("feature extractor does not match vocabulary size");
    if (weights_.rows() != vocab_->size() || weights_.cols() != features_.dim()) {
        throw Fault("weight matrix shape does not match |V| x d");
    }
    if (!weights_.all_finite()) throw Fault("policy weights contain non-finite values");
}

bool PolicyParams::compatible_with(const PolicyParams& other) const {
    return vocab_->hash() == other.vocab_->hash() && features_ == other.features_;
}

Scorer::Scorer(const PolicyParams& params, std::span<const TokenId> prompt, const DecodeConfig& decode)
    : params_(&params),
      vocab_size_(params.vocab().size()),
      temperature_(decode.temperature),
      prompt_features_(params.features().prompt_features(prompt)),
      prompt_logits_(vocab_size_, 0.0),
      forbidden_(vocab_size_, 0),
      logits_(vocab_size_, 0.0) {
    decode.validate();
    const Matrix& w = params.weights();
    for (auto [col, count] : prompt_features_) {
        auto column = w.column(col);
        for (std::size_t v = 0; v < vocab_size_; ++v) prompt_logits_[v] += column[v] * count;
    }
    for (TokenId t : decode.forbidden_tokens) {
        if (t >= vocab_size_) throw Fault("forbidden token id " + std::to_string(t) + " is outside the vocabulary");
        forbidden_[t] = 1;
    }
}

void Scorer::log_probs(std::span<const TokenId> prefix, std::span<double> out,
                       std::span<const char> extra_forbidden) const {
    const Matrix& w = params_->weights();
    context_columns_ = params_->features().context_columns(prefix);
    std::copy(prompt_logits_.begin(), prompt_logits_.end(), logits_.begin());
    for (std::size_t col : context_columns_) {
        auto column = w.column(col);
        for (std::size_t v = 0; v < vocab_size_; ++v) logits_[v] += column[v];
    }
    double max_logit = kNegInf;
    for (std::size_t v = 0; v < vocab_size_; ++v) {
        if (!std::isfinite(logits_[v])) throw Fault("non-finite logit: policy parameters are corrupted");
        const bool masked = forbidden_[v] || (!extra_forbidden.empty() && extra_forbidden[v]);
        out[v] = masked ? kNegInf : logits_[v] / temperature_;
        max_logit = std::max(max_logit, out[v]);
    }
    if (max_logit == kNegInf) throw Fault("every token is masked: no valid next token");
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab_size_; ++v) {
        if (out[v] != kNegInf) sum += std::exp(out[v] - max_logit);
    }
    const double log_z = max_logit + std::log(sum);
    for (std::size_t v = 0; v < vocab_size_; ++v) {
        if (out[v] != kNegInf) out[v] -= log_z;
    }
}

GradientAccumulator::GradientAccumulator(Matrix& target, const Scorer& scorer)
    : target_(&target), scorer_(&scorer), prompt_coef_(scorer.vocab_size(), 0.0) {}

void GradientAccumulator::add_step(std::span<const double> coef, std::span<const std::size_t> context_columns) {
    for (std::size_t col : context_columns) {
        auto column = target_->column(col);
        for (std::size_t v = 0; v < column.size(); ++v) column[v] += coef[v];
    }
    for (std::size_t v = 0; v < prompt_coef_.size(); ++v) prompt_coef_[v] += coef[v];
}

void GradientAccumulator::finish() {
    for (auto [col, count] : scorer_->prompt_features()) {
        auto column = target_->column(col);
        for (std::size_t v = 0; v < column.size(); ++v) column[v] += prompt_coef_[v] * count;
    }
    std::fill(prompt_coef_.begin(), prompt_coef_.end(), 0.0);
}

std::vector<double> next_token_distribution(const PolicyParams& params, std::span<const TokenId> prompt,
                                            std::span<const TokenId> prefix, const DecodeConfig& decode) {
    if (prefix.size() >= decode.max_response_length) throw Fault("prefix already at max_response_length");
    check_tokens(params, prefix, "prefix");
    Scorer scorer(params, prompt, decode);
    std::vector<double> p(params.vocab().size());
    scorer.log_probs(prefix, p);
    for (double& x : p) x = std::exp(x);
    return p;
}

Rollout decode_response(const PolicyParams& params, std::span<const TokenId> prompt, const DecodeConfig& decode,
                        std::uint64_t seed, DecodeMode mode, const StepConstraint& constraint) {
    Scorer scorer(params, prompt, decode);
    Rng rng(seed);
    const std::size_t n = params.vocab().size();
    std::vector<double> logp(n);
    std::vector<char> forbid;
    std::vector<TokenId> ties;

    Rollout r;
    r.prompt.assign(prompt.begin(), prompt.end());
    while (r.response.size() < decode.max_response_length) {
        if (constraint) {
            forbid.assign(n, 0);
            constraint(r.response, forbid);
        }
        scorer.log_probs(r.response, logp, forbid);

        TokenId chosen = 0;
        if (mode == DecodeMode::sample) {
            // Inverse CDF; fall back to the last admissible token if rounding
            // leaves u above the accumulated mass.
            const double u = rng.uniform01();
            double acc = 0.0;
            std::optional<TokenId> last;
            bool found = false;
            for (std::size_t v = 0; v < n; ++v) {
                if (logp[v] == kNegInf) continue;
                last = static_cast<TokenId>(v);
                acc += std::exp(logp[v]);
                if (u < acc) {
                    chosen = static_cast<TokenId>(v);
                    found = true;
                    break;
                }
            }
            if (!found) chosen = *last;
        } else {
            double best = kNegInf;
            ties.clear();
            for (std::size_t v = 0; v < n; ++v) {
                if (logp[v] == kNegInf) continue;
                if (logp[v] > best) {
                    best = logp[v];
                    ties.assign(1, static_cast<TokenId>(v));
                } else if (logp[v] == best) {
                    ties.push_back(static_cast<TokenId>(v));
                }
            }
            chosen = ties.size() == 1 ? ties.front() : ties[rng.uniform_index(ties.size())];
        }
        r.response.push_back(chosen);
        r.per_token_log_probs.push_back(logp[chosen]);
        if (chosen == kEos) break;
    }
    r.length = r.response.size() - ((!r.response.empty() && r.response.back() == kEos) ? 1 : 0);
    r.answer_span = find_answer_span(r.response);
    return r;
}

double sequence_log_prob(const PolicyParams& params, std::span<const TokenId> prompt,
                         std::span<const TokenId> response, const DecodeConfig& decode) {
    if (response.empty()) throw Fault("sequence_log_prob needs a non-empty response");
    check_tokens(params, response, "response");
    Scorer scorer(params, prompt, decode);
    std::vector<double> logp(params.vocab().size());
    double total = 0.0;
    for (std::size_t t = 0; t < response.size(); ++t) {
        scorer.log_probs(response.first(t), logp);
        if (logp[response[t]] == kNegInf) {
            throw Fault("response token '" + params.vocab().text(response[t]) + "' has zero probability");
        }
        total += logp[response[t]];
    }
    return total;
}

Matrix log_prob_gradient(const PolicyParams& params, std::span<const TokenId> prompt,
                         std::span<const TokenId> response, const DecodeConfig& decode) {
    if (response.empty()) throw Fault("log_prob_gradient needs a non-empty response");
    check_tokens(params, response, "response");
    Scorer scorer(params, prompt, decode);
    const std::size_t n = params.vocab().size();
    Matrix grad(n, params.features().dim(), 0.0);
    GradientAccumulator acc(grad, scorer);
    std::vector<double> coef(n);
    const double inv_t = 1.0 / scorer.temperature();
    for (std::size_t t = 0; t < response.size(); ++t) {
        scorer.log_probs(response.first(t), coef);
        if (coef[response[t]] == kNegInf) {
            throw Fault("response token '" + params.vocab().text(response[t]) + "' has zero probability");
        }
        for (std::size_t v = 0; v < n; ++v) coef[v] = -std::exp(coef[v]) * inv_t;
        coef[response[t]] += inv_t;
        acc.add_step(coef, scorer.last_context_columns());
    }
    acc.finish();
    return grad;
}

}  // namespace rft

// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/sft.hpp"

#include "rft/parallel.hpp"
#include "rft/schedule.hpp"

#include <string>

namespace rft {

void SftExample::validate(std::size_t max_response_length) const {
    if (target.empty()) throw Fault("SFT target is empty");
    if (target.back() != kEos) throw Fault("SFT target must end with <eos>");
    if (target.size() > max_response_length) throw Fault("SFT target longer than max_response_length");
}

void SftConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw Fault("sft.learning_rate must be >= 0");
    if (batch_size < 1) throw Fault("sft.batch_size must be >= 1");
    decode.validate();
}

Tokens sft_target(const Vocabulary& vocab, std::span<const TokenId> gold, SftTargetStyle style) {
    Tokens t;
    if (style == SftTargetStyle::with_think) {
        t = {kThinkOpen, vocab.id("hmm"), kThinkClose};
    }
    t.push_back(kAnswerOpen);
    t.insert(t.end(), gold.begin(), gold.end());
    t.push_back(kAnswerClose);
    t.push_back(kEos);
    return t;
}

SftExample make_sft_example(const Vocabulary& vocab, const TaskInstance& task, ThinkMode mode) {
    return {templated_prompt(vocab, task, mode),
            sft_target(vocab, task.gold,
                       mode == ThinkMode::with_think ? SftTargetStyle::with_think : SftTargetStyle::answer_only)};
}

std::pair<double, Matrix> nll_loss_and_gradient(const PolicyParams& params, const SftExample& example,
                                                const DecodeConfig& decode) {
    example.validate(decode.max_response_length);
    const double loss = -sequence_log_prob(params, example.prompt, example.target, decode);
    Matrix grad = log_prob_gradient(params, example.prompt, example.target, decode);
    for (double& x : grad.flat()) x = -x;
    return {loss, std::move(grad)};
}

double sft_step(PolicyParams& params, std::span<const SftExample> batch, double learning_rate,
                const DecodeConfig& decode, std::size_t workers) {
    if (batch.empty()) throw Fault("sft_step needs a non-empty batch");
    std::vector<std::pair<double, Matrix>> parts(batch.size());
    parallel_for(batch.size(), workers,
                 [&](std::size_t i) { parts[i] = nll_loss_and_gradient(params, batch[i], decode); });

    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    Matrix grad(params.vocab().size(), params.features().dim(), 0.0);
    for (const auto& [l, g] : parts) {
        loss += l;
        grad.add_scaled(g, 1.0);
    }
    for (double& x : grad.flat()) x *= inv;
    if (!grad.all_finite()) throw Fault("non-finite SFT gradient; step aborted, parameters unchanged");
    if (learning_rate != 0.0) {
        Matrix updated = params.weights();
        updated.add_scaled(grad, -learning_rate);
        if (!updated.all_finite()) throw Fault("SFT update produced non-finite weights; step aborted");
        params.weights() = std::move(updated);
    }
    return loss * inv;
}

std::vector<double> train_sft(PolicyParams& params, std::span<const SftExample> dataset, const SftConfig& config,
                              std::uint64_t seed, const LossCallback& on_step) {
    if (dataset.empty()) throw Fault("train_sft needs a non-empty dataset");
    config.validate();
    DatasetCycler cycler(dataset.size(), derive_seed(seed, 0));
    std::vector<double> losses;
    std::vector<SftExample> batch(config.batch_size);
    for (std::size_t s = 0; s < config.steps; ++s) {
        for (auto& ex : batch) ex = dataset[cycler.next()];
        const double loss = sft_step(params, batch, config.learning_rate, config.decode, config.workers);
        losses.push_back(loss);
        if (on_step) on_step(s + 1, loss);
    }
    return losses;
}

}  // namespace rft

// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/grpo.hpp"

#include "rft/parallel.hpp"
#include "rft/rng.hpp"
#include "rft/schedule.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rft {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_compatible(const PolicyParams& params, const PolicyParams& ref) {
    if (!params.compatible_with(ref)) {
        throw Fault("policy and reference disagree on vocabulary or feature layout (" + params.vocab().hash_hex() +
                    " vs " + ref.vocab().hash_hex() + ")");
    }
}

// KL(p || q) for one position given log-probabilities; masked entries are -inf
// in both.
double position_kl(std::span<const double> logp, std::span<const double> logq) {
    double kl = 0.0;
    for (std::size_t v = 0; v < logp.size(); ++v) {
        if (logp[v] == kNegInf) continue;
        if (logq[v] == kNegInf) throw Fault("reference assigns zero probability where the policy does not");
        kl += std::exp(logp[v]) * (logp[v] - logq[v]);
    }
    return kl;
}

// Per-position mean KL, not clamped at zero.
double mean_kl_raw(const PolicyParams& params, const PolicyParams& ref, std::span<const TokenId> prompt,
                   std::span<const TokenId> response, const DecodeConfig& decode) {
    if (response.empty()) throw Fault("exact_kl needs a non-empty response");
    require_compatible(params, ref);
    Scorer sp(params, prompt, decode), sq(ref, prompt, decode);
    std::vector<double> logp(params.vocab().size()), logq(params.vocab().size());
    double total = 0.0;
    for (std::size_t t = 0; t < response.size(); ++t) {
        auto prefix = response.first(t);
        sp.log_probs(prefix, logp);
        sq.log_probs(prefix, logq);
        total += position_kl(logp, logq);
    }
    return total / static_cast<double>(response.size());
}

// Adds scale * [A dlogpi(o)/dW - beta dKL/dW] for one rollout.
void accumulate_rollout_gradient(const PolicyParams& params, const PolicyParams& ref, std::span<const TokenId> prompt,
                                 std::span<const TokenId> response, double advantage, double beta, double scale,
                                 const DecodeConfig& decode, Matrix& grad) {
    Scorer sp(params, prompt, decode), sq(ref, prompt, decode);
    const std::size_t n = params.vocab().size();
    std::vector<double> logp(n), logq(n), coef(n);
    GradientAccumulator acc(grad, sp);
    const double inv_t = 1.0 / sp.temperature();
    const double kl_weight = beta / static_cast<double>(response.size());
    for (std::size_t t = 0; t < response.size(); ++t) {
        auto prefix = response.first(t);
        sp.log_probs(prefix, logp);
        if (logp[response[t]] == kNegInf) throw Fault("rollout token has zero probability under the policy");
        const bool need_kl = beta != 0.0;
        double kl = 0.0;
        if (need_kl) {
            sq.log_probs(prefix, logq);
            kl = position_kl(logp, logq);
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (logp[v] == kNegInf) {
                coef[v] = 0.0;
                continue;
            }
            const double p = std::exp(logp[v]);
            // d/dz_v of log p(o_t) is (delta - p_v)/T; of KL_t is p_v (log p_v/q_v - KL_t)/T.
            double c = -advantage * p;
            if (need_kl) c -= kl_weight * p * (logp[v] - logq[v] - kl);
            coef[v] = c * inv_t * scale;
        }
        coef[response[t]] += advantage * inv_t * scale;
        acc.add_step(coef, sp.last_context_columns());
    }
    acc.finish();
}

}  // namespace

void TrainerConfig::validate() const {
    if (group_size < 2) throw Fault("trainer.group_size must be >= 2");
    if (!(kl_coefficient >= 0.0)) throw Fault("trainer.kl_coefficient must be >= 0");
    if (!(learning_rate >= 0.0)) throw Fault("trainer.learning_rate must be >= 0");
    if (gradient_accumulation < 1) throw Fault("trainer.gradient_accumulation must be >= 1");
    if (prompts_per_device_step < 1) throw Fault("trainer.prompts_per_device_step must be >= 1");
    if (!(max_grad_norm >= 0.0)) throw Fault("trainer.max_grad_norm must be >= 0");
    decode.validate();
}

TrainerConfig TrainerConfig::paper_preset() {
    TrainerConfig c;
    c.learning_rate = 1e-6;
    c.kl_coefficient = 0.04;
    c.max_grad_norm = 0.0;
    return c;
}

std::vector<Rollout> generate_group(const PolicyParams& params, std::span<const TokenId> prompt,
                                    const TrainerConfig& config, std::uint64_t seed) {
    if (config.group_size < 2) throw Fault("trainer.group_size must be >= 2");
    std::vector<Rollout> rollouts(config.group_size);
    parallel_for(config.group_size, config.workers, [&](std::size_t i) {
        rollouts[i] = sample_response(params, prompt, config.decode, derive_seed(seed, i));
    });
    return rollouts;
}

std::vector<double> normalize_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) throw Fault("advantage normalization needs a group of at least 2");
    double sum = 0.0;
    for (double r : rewards) {
        if (!std::isfinite(r)) throw Fault("non-finite reward in group");
        sum += r;
    }
    const double n = static_cast<double>(rewards.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double r : rewards) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

double exact_kl(const PolicyParams& params, const PolicyParams& ref, std::span<const TokenId> prompt,
                std::span<const TokenId> response, const DecodeConfig& decode) {
    // Gibbs' inequality holds exactly; clamp round-off below zero.
    return std::max(0.0, mean_kl_raw(params, ref, prompt, response, decode));
}

GroupResult score_group(const PolicyParams& params, const PolicyParams& ref, const TaskInstance& task,
                        std::vector<Rollout> rollouts, const RewardConfig& reward, const TrainerConfig& config) {
    GroupResult g;
    const std::size_t n = rollouts.size();
    g.rollouts = std::move(rollouts);
    g.breakdowns.resize(n);
    g.rewards.resize(n);
    g.kls.resize(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
        g.breakdowns[i] = composite_reward(g.rollouts[i], task.gold, reward, config.think_required);
        g.rewards[i] = g.breakdowns[i].total;
        g.kls[i] = exact_kl(params, ref, g.rollouts[i].prompt, g.rollouts[i].response, config.decode);
    });
    g.advantages = normalize_advantages(g.rewards);
    double total = 0.0;
    for (double k : g.kls) total += k;
    g.mean_kl = total / static_cast<double>(n);
    return g;
}

double grpo_objective(const PolicyParams& params, const PolicyParams& ref, const GroupResult& group,
                      const TrainerConfig& config) {
    const double inv_g = 1.0 / static_cast<double>(group.rollouts.size());
    double j = 0.0;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const auto& r = group.rollouts[i];
        j += inv_g * group.advantages[i] * sequence_log_prob(params, r.prompt, r.response, config.decode);
        if (config.kl_coefficient != 0.0) {
            j -= inv_g * config.kl_coefficient * mean_kl_raw(params, ref, r.prompt, r.response, config.decode);
        }
    }
    return j;
}

Matrix grpo_objective_gradient(const PolicyParams& params, const PolicyParams& ref, const GroupResult& group,
                               const TrainerConfig& config) {
    require_compatible(params, ref);
    const std::size_t g = group.rollouts.size();
    if (group.advantages.size() != g) throw Fault("group advantages not computed");
    const double inv_g = 1.0 / static_cast<double>(g);
    const std::size_t rows = params.vocab().size(), cols = params.features().dim();

    // One buffer per rollout, reduced in index order: the result does not
    // depend on the worker count.
    std::vector<Matrix> parts(g);
    parallel_for(g, config.workers, [&](std::size_t i) {
        parts[i] = Matrix(rows, cols, 0.0);
        const auto& r = group.rollouts[i];
        if (group.advantages[i] == 0.0 && config.kl_coefficient == 0.0) return;
        accumulate_rollout_gradient(params, ref, r.prompt, r.response, group.advantages[i], config.kl_coefficient,
                                    inv_g, config.decode, parts[i]);
    });
    Matrix grad(rows, cols, 0.0);
    for (const auto& part : parts) grad.add_scaled(part, 1.0);
    return grad;
}

StepMetrics grpo_step(PolicyParams& params, const PolicyParams& ref, std::span<const TaskInstance> batch,
                      const RewardConfig& reward, const TrainerConfig& config, std::uint64_t seed) {
    config.validate();
    reward.validate();
    if (batch.size() != config.prompts_per_step()) {
        throw Fault("grpo_step expects " + std::to_string(config.prompts_per_step()) + " prompts, got " +
                    std::to_string(batch.size()));
    }
    Matrix grad(params.vocab().size(), params.features().dim(), 0.0);
    StepMetrics m;
    double rollouts = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& task = batch[j];
        const std::uint64_t group_seed = derive_seed(seed, j);
        auto group = score_group(params, ref, task, generate_group(params, task.prompt, config, group_seed), reward,
                                 config);
        grad.add_scaled(grpo_objective_gradient(params, ref, group, config), 1.0);
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            m.mean_reward += group.rewards[i];
            m.accuracy += group.breakdowns[i].accuracy;
            m.mean_format += group.breakdowns[i].format;
            m.mean_response_length += static_cast<double>(group.rollouts[i].length);
            m.mean_kl += group.kls[i];
            rollouts += 1.0;
        }
    }
    m.mean_reward /= rollouts;
    m.accuracy /= rollouts;
    m.mean_format /= rollouts;
    m.mean_response_length /= rollouts;
    m.mean_kl /= rollouts;

    // Mean over micro-batches (one group per prompt).
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (double& x : grad.flat()) x *= inv_batch;
    if (!grad.all_finite()) throw Fault("non-finite GRPO gradient; step aborted, parameters unchanged");
    m.grad_norm = grad.frobenius_norm();

    double step = config.learning_rate;
    if (config.max_grad_norm > 0.0 && m.grad_norm > config.max_grad_norm) step *= config.max_grad_norm / m.grad_norm;
    if (step != 0.0) {
        Matrix updated = params.weights();
        updated.add_scaled(grad, step);
        if (!updated.all_finite()) throw Fault("update produced non-finite weights; step aborted");
        params.weights() = std::move(updated);
    }
    return m;
}

TrainingMetrics train_rft(PolicyParams& params, std::span<const TaskInstance> dataset, const RewardConfig& reward,
                          const TrainerConfig& config, std::uint64_t seed, const StepCallback& on_step) {
    if (dataset.empty()) throw Fault("train_rft needs a non-empty dataset");
    config.validate();
    reward.validate();
    const PolicyParams ref = snapshot_reference(params);
    DatasetCycler cycler(dataset.size(), derive_seed(seed, 0));
    const std::uint64_t step_base = derive_seed(seed, 1);

    TrainingMetrics metrics;
    std::vector<TaskInstance> batch(config.prompts_per_step());
    for (std::size_t s = 0; s < config.total_steps; ++s) {
        for (auto& task : batch) task = dataset[cycler.next()];
        StepMetrics m = grpo_step(params, ref, batch, reward, config, derive_seed(step_base, s));
        m.step = s + 1;
        metrics.push_back(m);
        if (on_step) on_step(m);
    }
    return metrics;
}

}  // namespace rft

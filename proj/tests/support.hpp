// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the test binaries: small vocabularies, random policies,
// and independent reference implementations used as oracles.
//
#pragma once

#include "rft/policy.hpp"
#include "rft/rng.hpp"
#include "rft/vocabulary.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rft::testing {

/// Specials plus `answers` answer tokens, `fillers` fillers and prompt-only
/// tokens up to `size` in total.
inline std::shared_ptr<const Vocabulary> small_vocab(std::size_t size, std::size_t answers = 2,
                                                     std::size_t fillers = 1) {
    std::vector<TokenSpec> t;
    for (std::size_t i = 0; i < answers; ++i) t.push_back({"ans" + std::to_string(i), TokenRole::answer});
    for (std::size_t i = 0; i < fillers; ++i) t.push_back({"fill" + std::to_string(i), TokenRole::filler});
    for (std::size_t i = 0; t.size() + kNumSpecialTokens < size; ++i) {
        t.push_back({"p" + std::to_string(i), TokenRole::prompt});
    }
    return std::make_shared<const Vocabulary>(std::move(t));
}

/// Random small policy shape: |V| in [8, 16] and the largest context window
/// in [1, 3] that keeps d = K(|V|+1) + |V| <= 64.
inline std::pair<std::size_t, std::size_t> small_shape(Rng& rng) {
    const std::size_t n = 8 + rng.uniform_index(9);
    const std::size_t kmax = std::min<std::size_t>(3, (64 - n) / (n + 1));
    return {n, 1 + rng.uniform_index(kmax)};
}

inline void randomize(PolicyParams& p, Rng& rng, double scale) {
    for (double& w : p.weights().flat()) w = scale * (2.0 * rng.uniform01() - 1.0);
}

inline Tokens random_tokens(Rng& rng, std::size_t n, std::size_t vocab_size, std::size_t lo = 0) {
    Tokens out(n);
    for (auto& t : out) t = static_cast<TokenId>(lo + rng.uniform_index(vocab_size - lo));
    return out;
}

/// Reference softmax computed from the dense feature vector, independent of
/// the Scorer's cached, sparse evaluation.
inline std::vector<double> dense_distribution(const PolicyParams& p, std::span<const TokenId> prompt,
                                              std::span<const TokenId> prefix, const DecodeConfig& decode) {
    const auto phi = p.features().dense(prompt, prefix);
    const std::size_t n = p.vocab().size();
    std::vector<double> logits(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t c = 0; c < phi.size(); ++c) logits[v] += p.weights()(v, c) * phi[c];
        logits[v] /= decode.temperature;
    }
    std::vector<char> masked(n, 0);
    for (TokenId f : decode.forbidden_tokens) masked[f] = 1;
    double mx = -INFINITY;
    for (std::size_t v = 0; v < n; ++v) {
        if (!masked[v]) mx = std::max(mx, logits[v]);
    }
    std::vector<double> out(n, 0.0);
    double z = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        if (!masked[v]) z += out[v] = std::exp(logits[v] - mx);
    }
    for (double& x : out) x /= z;
    return out;
}

/// ||analytic - numeric||_F / max(||analytic||_F, ||numeric||_F) with central
/// differences of step h on every weight.
inline double gradient_relative_error(PolicyParams& p, const Matrix& analytic, const std::function<double()>& f,
                                      double h = 1e-6) {
    auto w = p.weights().flat();
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = f();
        w[i] = keep - h;
        const double down = f();
        w[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.flat()[i];
        diff += (a - numeric) * (a - numeric);
        na += a * a;
        nn += numeric * numeric;
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    return std::sqrt(diff) / scale;
}

struct ChiSquare {
    double statistic = 0.0;
    double critical = 0.0;   // upper quantile at the requested significance
    std::size_t dof = 0;
    bool passes() const { return statistic <= critical; }
};

/// Pearson goodness of fit of `counts` against `probs`; cells with zero
/// probability must be empty and are not counted as degrees of freedom.
inline ChiSquare chi_square(std::span<const std::size_t> counts, std::span<const double> probs, double alpha) {
    double n = 0.0;
    for (auto c : counts) n += static_cast<double>(c);
    ChiSquare out;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (probs[i] == 0.0) {
            if (counts[i] != 0) out.statistic = INFINITY;
            continue;
        }
        const double e = n * probs[i];
        out.statistic += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    out.dof = cells - 1;
    out.critical = boost::math::quantile(boost::math::complement(boost::math::chi_squared(out.dof), alpha));
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("rftdesk-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace rft::testing

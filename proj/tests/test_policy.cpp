// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include "rft/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace rft;
using namespace rft::testing;

namespace {

// Leaves exactly the tokens in `keep` unmasked.
DecodeConfig only(const Vocabulary& vocab, std::initializer_list<TokenId> keep) {
    DecodeConfig d;
    for (TokenId v = 0; v < vocab.size(); ++v) {
        if (std::find(keep.begin(), keep.end(), v) == keep.end()) d.forbidden_tokens.push_back(v);
    }
    return d;
}

// Bias toward `token` at the first response position (all slots padded).
void set_start_logit(PolicyParams& p, TokenId token, double value) {
    p.weights()(token, p.features().context_column(0, std::nullopt)) = value;
}

}  // namespace

TEST_CASE("zero weights give the uniform distribution") {
    auto vocab = small_vocab(16);
    PolicyParams p(vocab);
    const Tokens prompt{7, 8, 8};
    const auto dist = next_token_distribution(p, prompt, Tokens{5}, {});
    for (double x : dist) CHECK(x == doctest::Approx(1.0 / 16).epsilon(1e-15));
}

TEST_CASE("two-token softmax with logits (ln 2, 0)") {
    auto vocab = small_vocab(8);
    PolicyParams p(vocab);
    const auto decode = only(*vocab, {5, 6});
    set_start_logit(p, 5, std::log(2.0));
    const auto dist = next_token_distribution(p, Tokens{}, Tokens{}, decode);
    CHECK(dist[5] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(dist[6] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    SUBCASE("temperature 1000 flattens it") {
        auto hot = decode;
        hot.temperature = 1000.0;
        const auto flat = next_token_distribution(p, Tokens{}, Tokens{}, hot);
        CHECK(std::abs(flat[5] - flat[6]) < 1e-3);
    }
}

TEST_CASE("softmax normalization and temperature monotonicity") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        auto vocab = small_vocab(8 + rng.uniform_index(9));
        PolicyParams p(vocab, 1 + rng.uniform_index(4));
        randomize(p, rng, 5.0);
        const Tokens prompt = random_tokens(rng, rng.uniform_index(6), vocab->size());
        const Tokens prefix = random_tokens(rng, rng.uniform_index(6), vocab->size());
        DecodeConfig d;
        d.temperature = 0.2 + 3.0 * rng.uniform01();
        const auto dist = next_token_distribution(p, prompt, prefix, d);
        double sum = 0.0, mx = 0.0;
        for (double x : dist) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            sum += x;
            mx = std::max(mx, x);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        // Matches a dense recomputation of phi and the softmax.
        const auto ref = dense_distribution(p, prompt, prefix, d);
        for (std::size_t v = 0; v < dist.size(); ++v) CHECK(std::abs(dist[v] - ref[v]) < 1e-12);

        auto hotter = d;
        hotter.temperature = d.temperature * (1.0 + rng.uniform01());
        const auto h = next_token_distribution(p, prompt, prefix, hotter);
        CHECK(*std::max_element(h.begin(), h.end()) <= mx + 1e-15);
    }
}

TEST_CASE("feature layout") {
    FeatureExtractor f(10, 3);
    CHECK(f.dim() == 3 * 11 + 10);
    const Tokens prefix{4, 7};
    const auto cols = f.context_columns(prefix);
    REQUIRE(cols.size() == 3);
    CHECK(cols[0] == f.context_column(0, 7));   // most recent first
    CHECK(cols[1] == f.context_column(1, 4));
    CHECK(cols[2] == f.context_column(2, std::nullopt));
    const auto bag = f.prompt_features(Tokens{2, 5, 2});
    REQUIRE(bag.size() == 2);
    CHECK(bag[0] == std::pair<std::size_t, double>{f.prompt_column(2), 2.0});
    CHECK(bag[1] == std::pair<std::size_t, double>{f.prompt_column(5), 1.0});
    const auto phi = f.dense(Tokens{2, 5, 2}, prefix);
    CHECK(std::accumulate(phi.begin(), phi.end(), 0.0) == 3.0 + 3.0);
}

TEST_CASE("faults") {
    auto vocab = small_vocab(8);
    PolicyParams p(vocab);
    CHECK_THROWS_AS(sequence_log_prob(p, Tokens{}, Tokens{99}), Fault);
    CHECK_THROWS_AS(sequence_log_prob(p, Tokens{}, Tokens{}), Fault);
    DecodeConfig all;
    for (TokenId v = 0; v < 8; ++v) all.forbidden_tokens.push_back(v);
    CHECK_THROWS_AS(next_token_distribution(p, Tokens{}, Tokens{}, all), Fault);
    p.weights()(3, p.features().context_column(0, std::nullopt)) = NAN;
    CHECK_THROWS_AS(next_token_distribution(p, Tokens{}, Tokens{}, {}), Fault);
}

TEST_CASE("sampling") {
    auto vocab = small_vocab(16);

    SUBCASE("a policy certain of <eos> gives the empty response") {
        PolicyParams p(vocab);
        set_start_logit(p, kEos, 1e3);
        const Rollout r = sample_response(p, Tokens{9}, {}, 3);
        CHECK(r.response == Tokens{kEos});
        CHECK(r.length == 0);
        CHECK_FALSE(r.answer_span);
    }

    SUBCASE("equal seeds give identical rollouts") {
        Rng rng(5);
        PolicyParams p(vocab);
        randomize(p, rng, 0.5);
        DecodeConfig d;
        d.max_response_length = 64;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            CHECK(sample_response(p, Tokens{8, 9}, d, seed) == sample_response(p, Tokens{8, 9}, d, seed));
        }
    }

    SUBCASE("rollout invariants") {
        Rng rng(6);
        PolicyParams p(vocab);
        randomize(p, rng, 1.0);
        DecodeConfig d;
        d.max_response_length = 12;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const Rollout r = sample_response(p, Tokens{8}, d, seed);
            REQUIRE(!r.response.empty());
            CHECK(r.response.size() <= d.max_response_length);
            CHECK(r.per_token_log_probs.size() == r.response.size());
            // <eos> only as the final token.
            for (std::size_t t = 0; t + 1 < r.response.size(); ++t) CHECK(r.response[t] != kEos);
            CHECK(r.length == r.response.size() - (r.response.back() == kEos ? 1 : 0));
            const double sum = std::accumulate(r.per_token_log_probs.begin(), r.per_token_log_probs.end(), 0.0);
            CHECK(sum == doctest::Approx(sequence_log_prob(p, r.prompt, r.response, d)).epsilon(1e-12));
        }
    }

    SUBCASE("uniform policy, 10,000 single-token draws") {
        PolicyParams p(vocab);
        DecodeConfig d;
        d.max_response_length = 1;
        std::vector<std::size_t> counts(16, 0);
        for (std::uint64_t seed = 0; seed < 10000; ++seed) ++counts[sample_response(p, Tokens{}, d, seed).response[0]];
        const std::vector<double> uniform(16, 1.0 / 16);
        const auto chi = chi_square(counts, uniform, 0.01);
        INFO("chi2 = " << chi.statistic << ", critical " << chi.critical);
        CHECK(chi.passes());
    }
}

TEST_CASE("greedy decoding follows the argmax") {
    auto vocab = small_vocab(10);
    PolicyParams p(vocab);
    set_start_logit(p, 5, 3.0);
    p.weights()(kEos, p.features().context_column(0, 5)) = 3.0;
    const Rollout r = decode_response(p, Tokens{}, {}, 0, DecodeMode::greedy);
    CHECK(r.response == Tokens{5, kEos});
}

TEST_CASE("sequence_log_prob") {
    auto vocab = small_vocab(8);
    PolicyParams p(vocab);

    SUBCASE("uniform over four tokens") {
        const auto d = only(*vocab, {0, 5, 6, 7});
        CHECK(sequence_log_prob(p, Tokens{}, Tokens{5, 6, 7}, d) == doctest::Approx(3.0 * std::log(0.25)));
    }

    SUBCASE("probability-one path") {
        set_start_logit(p, 5, 1e3);
        p.weights()(kEos, p.features().context_column(0, 5)) = 1e3;
        const Rollout r = decode_response(p, Tokens{}, {}, 0, DecodeMode::greedy);
        CHECK(r.response == Tokens{5, kEos});
        CHECK(sequence_log_prob(p, Tokens{}, r.response) == 0.0);
        const Matrix g = log_prob_gradient(p, Tokens{}, r.response);
        CHECK(g.frobenius_norm() < 1e-6);
    }

    SUBCASE("stepwise product of next-token probabilities") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            randomize(p, rng, 2.0);
            const Tokens prompt = random_tokens(rng, 4, 8);
            const Tokens response = random_tokens(rng, 1 + rng.uniform_index(8), 8);
            double expected = 0.0;
            for (std::size_t t = 0; t < response.size(); ++t) {
                const auto dist = dense_distribution(p, prompt, std::span(response).first(t), {});
                expected += std::log(dist[response[t]]);
            }
            CHECK(sequence_log_prob(p, prompt, response) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("log_prob_gradient matches central differences") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto [n, k] = small_shape(rng);
        auto vocab = small_vocab(n);
        PolicyParams p(vocab, k);
        REQUIRE(p.features().dim() <= 64);
        randomize(p, rng, 1.0);
        DecodeConfig d;
        d.temperature = 0.5 + rng.uniform01();
        const Tokens prompt = random_tokens(rng, 1 + rng.uniform_index(5), n);
        const Tokens response = random_tokens(rng, 1 + rng.uniform_index(6), n);
        const Matrix analytic = log_prob_gradient(p, prompt, response, d);
        const double err =
            gradient_relative_error(p, analytic, [&] { return sequence_log_prob(p, prompt, response, d); });
        CHECK(err < 1e-5);
    }
}

TEST_CASE("snapshot_reference is an independent copy") {
    Rng rng(9);
    auto vocab = small_vocab(12);
    PolicyParams p(vocab);
    randomize(p, rng, 1.0);
    const PolicyParams snap = snapshot_reference(p);
    CHECK(snap.weights() == p.weights());
    const auto before = next_token_distribution(snap, Tokens{7}, Tokens{5}, {});
    p.weights().fill(0.0);
    CHECK(next_token_distribution(snap, Tokens{7}, Tokens{5}, {}) == before);
}

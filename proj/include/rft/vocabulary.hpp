// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rft/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rft {

/// What a token is for. Only special, filler and answer tokens may appear in
/// a response; prompt and template tokens are input-only.
enum class TokenRole { special, prompt_template, filler, answer, prompt };

struct TokenSpec {
    std::string text;
    TokenRole role;
};

/// Ordered, immutable token alphabet. Indices 0..4 always hold
/// `<eos>`, `<think>`, `</think>`, `<answer>`, `</answer>`.
class Vocabulary {
public:
    static constexpr std::size_t kMinSize = 8;
    static constexpr std::size_t kMaxSize = 1024;

    static constexpr std::string_view kEosText = "<eos>";
    static constexpr std::string_view kThinkOpenText = "<think>";
    static constexpr std::string_view kThinkCloseText = "</think>";
    static constexpr std::string_view kAnswerOpenText = "<answer>";
    static constexpr std::string_view kAnswerCloseText = "</answer>";

    /// `tokens` lists the non-special tokens; the specials are prepended.
    /// Throws Fault on duplicates, whitespace in a token, or a size outside
    /// [kMinSize, kMaxSize].
    explicit Vocabulary(std::vector<TokenSpec> tokens);

    std::size_t size() const { return texts_.size(); }
    const std::string& text(TokenId id) const { return texts_.at(id); }
    TokenRole role(TokenId id) const { return roles_.at(id); }
    bool contains(TokenId id) const { return id < texts_.size(); }

    std::optional<TokenId> find(std::string_view text) const;
    /// Like find(), but throws Fault naming the token.
    TokenId id(std::string_view text) const;

    /// FNV-1a over the newline-joined token list.
    std::uint64_t hash() const { return hash_; }
    std::string hash_hex() const;

    std::vector<TokenId> tokens_with_role(TokenRole role) const;

    Tokens encode(std::span<const std::string> texts) const;
    std::string decode(std::span<const TokenId> ids) const;

private:
    std::vector<std::string> texts_;
    std::vector<TokenRole> roles_;
    std::unordered_map<std::string, TokenId> index_;
    std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Half-open [begin, end) span of tokens strictly between the first
/// `<answer>` and the first `</answer>` after it. Absent when either is missing.
std::optional<std::pair<std::size_t, std::size_t>> find_answer_span(std::span<const TokenId> response);

}  // namespace rft

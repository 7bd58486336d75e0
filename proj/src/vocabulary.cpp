// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/vocabulary.hpp"

#include <algorithm>
#include <cctype>

namespace rft {

ThinkMode parse_think_mode(const std::string& text) {
    if (text == "with_think") return ThinkMode::with_think;
    if (text == "without_think") return ThinkMode::without_think;
    throw Fault("unknown think mode '" + text + "' (expected with_think or without_think)");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<TokenSpec> tokens) {
    const std::string_view specials[] = {kEosText, kThinkOpenText, kThinkCloseText, kAnswerOpenText,
                                         kAnswerCloseText};
    texts_.reserve(tokens.size() + kNumSpecialTokens);
    for (auto s : specials) {
        texts_.emplace_back(s);
        roles_.push_back(TokenRole::special);
    }
    for (auto& t : tokens) {
        if (t.role == TokenRole::special) throw Fault("special tokens are fixed; got extra '" + t.text + "'");
        texts_.push_back(std::move(t.text));
        roles_.push_back(t.role);
    }
    if (texts_.size() < kMinSize || texts_.size() > kMaxSize) {
        throw Fault("vocabulary size " + std::to_string(texts_.size()) + " outside [8, 1024]");
    }
    std::string joined;
    for (std::size_t i = 0; i < texts_.size(); ++i) {
        const auto& t = texts_[i];
        if (t.empty() || std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); })) {
            throw Fault("token '" + t + "' is empty or contains whitespace");
        }
        if (!index_.emplace(t, static_cast<TokenId>(i)).second) throw Fault("duplicate token '" + t + "'");
        joined += t;
        joined += '\n';
    }
    hash_ = fnv1a64(joined);
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
    auto it = index_.find(std::string(text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::id(std::string_view text) const {
    if (auto found = find(text)) return *found;
    throw Fault("token '" + std::string(text) + "' is not in the vocabulary");
}

std::string Vocabulary::hash_hex() const { return hex64(hash_); }

std::vector<TokenId> Vocabulary::tokens_with_role(TokenRole role) const {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < roles_.size(); ++i) {
        if (roles_[i] == role) out.push_back(static_cast<TokenId>(i));
    }
    return out;
}

Tokens Vocabulary::encode(std::span<const std::string> texts) const {
    Tokens out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(id(t));
    return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += contains(ids[i]) ? texts_[ids[i]] : "<?" + std::to_string(ids[i]) + ">";
    }
    return out;
}

std::optional<std::pair<std::size_t, std::size_t>> find_answer_span(std::span<const TokenId> response) {
    auto open = std::find(response.begin(), response.end(), kAnswerOpen);
    if (open == response.end()) return std::nullopt;
    auto close = std::find(open + 1, response.end(), kAnswerClose);
    if (close == response.end()) return std::nullopt;
    return std::pair{static_cast<std::size_t>(open - response.begin()) + 1,
                     static_cast<std::size_t>(close - response.begin())};
}

}  // namespace rft

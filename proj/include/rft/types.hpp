// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rft {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;

// Special tokens occupy fixed slots at the front of every vocabulary.
inline constexpr TokenId kEos = 0;
inline constexpr TokenId kThinkOpen = 1;
inline constexpr TokenId kThinkClose = 2;
inline constexpr TokenId kAnswerOpen = 3;
inline constexpr TokenId kAnswerClose = 4;
inline constexpr TokenId kNumSpecialTokens = 5;

/// Raised for every contract violation or numerical fault in the engine.
class Fault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ThinkMode { with_think, without_think };

inline const char* to_string(ThinkMode mode) {
    return mode == ThinkMode::with_think ? "with_think" : "without_think";
}

ThinkMode parse_think_mode(const std::string& text);

}  // namespace rft

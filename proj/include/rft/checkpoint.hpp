// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint format, version 1 (text, '\n' line endings):
//
//   # rftdesk-checkpoint v1
//   vocab_hash <16 lowercase hex digits>
//   vocab_size <|V|>
//   context_window <K>
//   feature_dim <d>
//   <|V| lines: row v holds the d weights of token v, separated by one space>
//
// Weights are written in the shortest decimal form that parses back to the
// identical double, so save/load is bit-exact. d must equal K * (|V| + 1) + |V|.
//
#pragma once

#include "rft/policy.hpp"

#include <iosfwd>
#include <memory>
#include <string>

namespace rft {

void write_checkpoint(std::ostream& out, const PolicyParams& params);
std::string serialize_checkpoint(const PolicyParams& params);

/// Throws Fault naming both hashes when the file was written for a different
/// vocabulary.
PolicyParams read_checkpoint(std::istream& in, std::shared_ptr<const Vocabulary> vocab);

void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path, std::shared_ptr<const Vocabulary> vocab);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace rft

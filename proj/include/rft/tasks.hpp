// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic verifiable task families, ordered by how much inference the answer
// needs:
//   banner  binary sentiment; the label is the majority of marker tokens
//   fgvc    N-way recognition; one class token identifies the label
//   sat     spatial relations; the label follows only by chaining relations
//
#pragma once

#include "rft/types.hpp"
#include "rft/vocabulary.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rft {

enum class TaskFamily { banner, fgvc, sat };

const char* to_string(TaskFamily family);
TaskFamily parse_task_family(const std::string& text);

/// Generator parameters. Everything that shapes the vocabulary lives here so
/// a dataset header is enough to rebuild it.
struct TaskParams {
    TaskFamily family = TaskFamily::banner;
    std::size_t num_classes = 100;     // fgvc
    std::size_t max_distractors = 3;   // fgvc, banner neutral words
    std::size_t chain_length = 3;      // sat
    std::size_t entity_pool = 8;       // sat

    void validate() const;
    friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

/// Desk-scale and full-scale (7B setup) dataset sizes.
struct DatasetSizes {
    std::size_t train;
    std::size_t eval;
};
inline constexpr DatasetSizes kDeskSizes{128, 256};
DatasetSizes paper_scale_sizes(TaskFamily family);

struct TaskInstance {
    TaskFamily family = TaskFamily::banner;
    Tokens prompt;
    Tokens gold;
    std::vector<std::pair<std::string, std::string>> metadata;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

struct Dataset {
    TaskParams params;
    std::uint64_t seed = 0;
    std::vector<TaskInstance> instances;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Prompt templates prepended to every task prompt before decoding.
inline constexpr const char* kThinkTemplateToken = "<q_think>";
inline constexpr const char* kDirectTemplateToken = "<q_direct>";

std::shared_ptr<const Vocabulary> build_vocabulary(const TaskParams& params);

std::vector<TaskInstance> generate_banner_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                                 std::size_t max_neutral = 3);
std::vector<TaskInstance> generate_fgvc_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                               std::size_t num_classes = 100, std::size_t max_distractors = 3);
std::vector<TaskInstance> generate_sat_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                              std::size_t chain_length);

Dataset generate_dataset(const TaskParams& params, std::uint64_t seed, std::size_t n);

/// 1 iff `answer` equals the gold answer token for token.
int verify(const TaskInstance& task, std::span<const TokenId> answer);

/// Template token followed by the task prompt.
Tokens templated_prompt(const Vocabulary& vocab, const TaskInstance& task, ThinkMode mode);

// Dataset file I/O. Format (version 1), UTF-8, '\n' line endings:
//   line 1:  "# rftdesk-dataset v1"
//   line 2:  "# family=<f> seed=<u64> n=<count> num_classes=<u> max_distractors=<u>
//             chain_length=<u> entity_pool=<u>"   (single line, single spaces)
//   then n records, one per line, four fields separated by a single TAB:
//     family, prompt tokens, gold tokens, metadata
//   Tokens are separated by a single space and never contain whitespace, so no
//   escaping is needed. Metadata is "key=value" pairs joined by ','; keys and
//   values are [A-Za-z0-9_] only. An instance without metadata has an empty
//   fourth field.
void write_dataset(std::ostream& out, const Dataset& dataset);
std::string serialize_dataset(const Dataset& dataset);
Dataset read_dataset(std::istream& in);
Dataset parse_dataset(const std::string& text);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);
/// FNV-1a of the two header lines.
std::uint64_t dataset_header_hash(const Dataset& dataset);

}  // namespace rft

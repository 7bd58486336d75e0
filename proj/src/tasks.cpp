// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/tasks.hpp"

#include "rft/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rft {

namespace {

constexpr std::size_t kBannerMarkerTypes = 4;
constexpr std::size_t kBannerNeutralTypes = 6;
constexpr std::size_t kFgvcNoiseTypes = 10;
// One filler keeps the response alphabet small enough to explore from a
// uniform policy.
constexpr const char* kFillers[] = {"hmm"};

std::string indexed(const char* stem, std::size_t i) { return std::string(stem) + "_" + std::to_string(i); }

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& field) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Fault("dataset header field '" + field + "' is not an unsigned integer: '" + text + "'");
    }
    return value;
}

std::string header_line(const Dataset& d) {
    std::ostringstream os;
    os << "# family=" << to_string(d.params.family) << " seed=" << d.seed << " n=" << d.instances.size()
       << " num_classes=" << d.params.num_classes << " max_distractors=" << d.params.max_distractors
       << " chain_length=" << d.params.chain_length << " entity_pool=" << d.params.entity_pool;
    return os.str();
}

constexpr const char* kMagicLine = "# rftdesk-dataset v1";

}  // namespace

const char* to_string(TaskFamily family) {
    switch (family) {
        case TaskFamily::banner: return "banner";
        case TaskFamily::fgvc: return "fgvc";
        case TaskFamily::sat: return "sat";
    }
    return "?";
}

TaskFamily parse_task_family(const std::string& text) {
    if (text == "banner") return TaskFamily::banner;
    if (text == "fgvc") return TaskFamily::fgvc;
    if (text == "sat") return TaskFamily::sat;
    throw Fault("unknown task family '" + text + "' (expected banner, fgvc or sat)");
}

void TaskParams::validate() const {
    if (num_classes < 2) throw Fault("data.num_classes must be >= 2");
    if (chain_length < 2) throw Fault("data.chain_length must be >= 2");
    if (entity_pool < chain_length + 1) throw Fault("data.entity_pool must be >= chain_length + 1");
}

DatasetSizes paper_scale_sizes(TaskFamily family) {
    switch (family) {
        case TaskFamily::banner: return {331, 256};
        case TaskFamily::fgvc: return {6000, 256};
        case TaskFamily::sat: return {15000, 256};
    }
    return kDeskSizes;
}

std::shared_ptr<const Vocabulary> build_vocabulary(const TaskParams& params) {
    params.validate();
    std::vector<TokenSpec> t;
    t.push_back({kThinkTemplateToken, TokenRole::prompt_template});
    t.push_back({kDirectTemplateToken, TokenRole::prompt_template});
    for (const char* f : kFillers) t.push_back({f, TokenRole::filler});
    switch (params.family) {
        case TaskFamily::banner:
            t.push_back({"positive", TokenRole::answer});
            t.push_back({"negative", TokenRole::answer});
            for (std::size_t i = 0; i < kBannerMarkerTypes; ++i) t.push_back({indexed("pos", i), TokenRole::prompt});
            for (std::size_t i = 0; i < kBannerMarkerTypes; ++i) t.push_back({indexed("neg", i), TokenRole::prompt});
            for (std::size_t i = 0; i < kBannerNeutralTypes; ++i) t.push_back({indexed("word", i), TokenRole::prompt});
            break;
        case TaskFamily::fgvc:
            for (std::size_t i = 0; i < params.num_classes; ++i) t.push_back({indexed("class", i), TokenRole::answer});
            for (std::size_t i = 0; i < params.num_classes; ++i) t.push_back({indexed("c", i), TokenRole::prompt});
            for (std::size_t i = 0; i < kFgvcNoiseTypes; ++i) t.push_back({indexed("noise", i), TokenRole::prompt});
            break;
        case TaskFamily::sat:
            t.push_back({"left", TokenRole::answer});
            t.push_back({"right", TokenRole::answer});
            for (std::size_t i = 0; i < params.entity_pool; ++i) t.push_back({indexed("ent", i), TokenRole::prompt});
            t.push_back({"left_of", TokenRole::prompt});
            t.push_back({"right_of", TokenRole::prompt});
            t.push_back({";", TokenRole::prompt});
            t.push_back({"query", TokenRole::prompt});
            break;
    }
    return std::make_shared<const Vocabulary>(std::move(t));
}

std::vector<TaskInstance> generate_banner_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                                 std::size_t max_neutral) {
    if (n < 1) throw Fault("banner generator needs n >= 1");
    Rng rng(seed);
    std::vector<TaskInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Odd marker count: a strict majority always exists.
        const std::size_t markers = 1 + 2 * rng.uniform_index(3);
        std::size_t pos = 0;
        TaskInstance task;
        task.family = TaskFamily::banner;
        for (std::size_t m = 0; m < markers; ++m) {
            const bool positive = rng.bernoulli_half();
            pos += positive ? 1 : 0;
            task.prompt.push_back(vocab.id(indexed(positive ? "pos" : "neg", rng.uniform_index(kBannerMarkerTypes))));
        }
        const std::size_t neutral = rng.uniform_index(max_neutral + 1);
        for (std::size_t m = 0; m < neutral; ++m) {
            task.prompt.push_back(vocab.id(indexed("word", rng.uniform_index(kBannerNeutralTypes))));
        }
        rng.shuffle(std::span<TokenId>(task.prompt));
        const std::size_t neg = markers - pos;
        task.gold = {vocab.id(pos > neg ? "positive" : "negative")};
        task.metadata = {{"pos_markers", std::to_string(pos)}, {"neg_markers", std::to_string(neg)}};
        out.push_back(std::move(task));
    }
    return out;
}

std::vector<TaskInstance> generate_fgvc_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                               std::size_t num_classes, std::size_t max_distractors) {
    if (n < 1) throw Fault("fgvc generator needs n >= 1");
    if (num_classes < 2) throw Fault("fgvc generator needs num_classes >= 2");
    Rng rng(seed);
    std::vector<TaskInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = rng.uniform_index(num_classes);
        const std::size_t distractors = rng.uniform_index(max_distractors + 1);
        TaskInstance task;
        task.family = TaskFamily::fgvc;
        task.prompt.push_back(vocab.id(indexed("c", cls)));
        for (std::size_t k = 0; k < distractors; ++k) {
            task.prompt.push_back(vocab.id(indexed("noise", rng.uniform_index(kFgvcNoiseTypes))));
        }
        rng.shuffle(std::span<TokenId>(task.prompt));
        task.gold = {vocab.id(indexed("class", cls))};
        task.metadata = {{"class", std::to_string(cls)}, {"distractors", std::to_string(distractors)}};
        out.push_back(std::move(task));
    }
    return out;
}

std::vector<TaskInstance> generate_sat_analog(const Vocabulary& vocab, std::uint64_t seed, std::size_t n,
                                              std::size_t chain_length) {
    if (n < 1) throw Fault("sat generator needs n >= 1");
    if (chain_length < 2) throw Fault("sat generator needs chain_length >= 2");
    std::vector<TokenId> pool;
    for (std::size_t i = 0; auto e = vocab.find(indexed("ent", i)); ++i) pool.push_back(*e);
    if (pool.size() < chain_length + 1) throw Fault("sat generator: entity pool smaller than chain_length + 1");
    const TokenId left_of = vocab.id("left_of"), right_of = vocab.id("right_of");
    const TokenId sep = vocab.id(";"), query = vocab.id("query");

    Rng rng(seed);
    std::vector<TaskInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Entities in left-to-right order; relations link neighbours only, so
        // the order is total and acyclic.
        std::vector<TokenId> order = pool;
        rng.shuffle(std::span<TokenId>(order));
        order.resize(chain_length + 1);

        std::vector<std::array<TokenId, 3>> relations;
        for (std::size_t k = 0; k < chain_length; ++k) {
            if (rng.bernoulli_half()) {
                relations.push_back({order[k], left_of, order[k + 1]});
            } else {
                relations.push_back({order[k + 1], right_of, order[k]});
            }
        }
        rng.shuffle(std::span<std::array<TokenId, 3>>(relations));

        // Query a pair at least two links apart.
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a <= chain_length; ++a) {
            for (std::size_t b = a + 2; b <= chain_length; ++b) pairs.emplace_back(a, b);
        }
        auto [a, b] = pairs[rng.uniform_index(pairs.size())];
        const bool swap = rng.bernoulli_half();

        TaskInstance task;
        task.family = TaskFamily::sat;
        for (const auto& rel : relations) {
            task.prompt.insert(task.prompt.end(), rel.begin(), rel.end());
            task.prompt.push_back(sep);
        }
        task.prompt.push_back(query);
        task.prompt.push_back(swap ? order[b] : order[a]);
        task.prompt.push_back(swap ? order[a] : order[b]);
        task.gold = {vocab.id(swap ? "right" : "left")};
        task.metadata = {{"chain_length", std::to_string(chain_length)}, {"query_gap", std::to_string(b - a)}};
        out.push_back(std::move(task));
    }
    return out;
}

Dataset generate_dataset(const TaskParams& params, std::uint64_t seed, std::size_t n) {
    auto vocab = build_vocabulary(params);
    Dataset d{params, seed, {}};
    switch (params.family) {
        case TaskFamily::banner: d.instances = generate_banner_analog(*vocab, seed, n, params.max_distractors); break;
        case TaskFamily::fgvc:
            d.instances = generate_fgvc_analog(*vocab, seed, n, params.num_classes, params.max_distractors);
            break;
        case TaskFamily::sat: d.instances = generate_sat_analog(*vocab, seed, n, params.chain_length); break;
    }
    return d;
}

int verify(const TaskInstance& task, std::span<const TokenId> answer) {
    return !answer.empty() && std::ranges::equal(answer, task.gold) ? 1 : 0;
}

Tokens templated_prompt(const Vocabulary& vocab, const TaskInstance& task, ThinkMode mode) {
    Tokens out;
    out.reserve(task.prompt.size() + 1);
    out.push_back(vocab.id(mode == ThinkMode::with_think ? kThinkTemplateToken : kDirectTemplateToken));
    out.insert(out.end(), task.prompt.begin(), task.prompt.end());
    return out;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
    auto vocab = build_vocabulary(dataset.params);
    out << kMagicLine << '\n' << header_line(dataset) << '\n';
    for (const auto& task : dataset.instances) {
        if (task.family != dataset.params.family) throw Fault("dataset mixes task families");
        out << to_string(task.family) << '\t' << vocab->decode(task.prompt) << '\t' << vocab->decode(task.gold) << '\t';
        for (std::size_t i = 0; i < task.metadata.size(); ++i) {
            if (i) out << ',';
            out << task.metadata[i].first << '=' << task.metadata[i].second;
        }
        out << '\n';
    }
}

std::string serialize_dataset(const Dataset& dataset) {
    std::ostringstream os;
    write_dataset(os, dataset);
    return os.str();
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMagicLine) throw Fault("not an rftdesk dataset (bad magic line)");
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Fault("dataset header line missing");

    Dataset d;
    std::size_t n = 0;
    bool have_family = false;
    for (const auto& field : split(line.substr(2), ' ')) {
        auto eq = field.find('=');
        if (eq == std::string::npos) throw Fault("malformed dataset header field '" + field + "'");
        const auto key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "family") {
            d.params.family = parse_task_family(value);
            have_family = true;
        } else if (key == "seed") {
            d.seed = parse_u64(value, key);
        } else if (key == "n") {
            n = parse_u64(value, key);
        } else if (key == "num_classes") {
            d.params.num_classes = parse_u64(value, key);
        } else if (key == "max_distractors") {
            d.params.max_distractors = parse_u64(value, key);
        } else if (key == "chain_length") {
            d.params.chain_length = parse_u64(value, key);
        } else if (key == "entity_pool") {
            d.params.entity_pool = parse_u64(value, key);
        } else {
            throw Fault("unknown dataset header field '" + key + "'");
        }
    }
    if (!have_family) throw Fault("dataset header has no family");
    auto vocab = build_vocabulary(d.params);

    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = split(line, '\t');
        if (fields.size() != 4) {
            throw Fault("dataset line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
        }
        TaskInstance task;
        task.family = parse_task_family(fields[0]);
        if (task.family != d.params.family) throw Fault("dataset line " + std::to_string(lineno) + ": wrong family");
        task.prompt = vocab->encode(split(fields[1], ' '));
        task.gold = vocab->encode(split(fields[2], ' '));
        for (const auto& kv : split(fields[3], ',')) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw Fault("dataset line " + std::to_string(lineno) + ": bad metadata");
            task.metadata.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        d.instances.push_back(std::move(task));
    }
    if (d.instances.size() != n) {
        throw Fault("dataset header says n=" + std::to_string(n) + " but file has " +
                    std::to_string(d.instances.size()) + " records");
    }
    return d;
}

Dataset parse_dataset(const std::string& text) {
    std::istringstream is(text);
    return read_dataset(is);
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Fault("cannot open '" + path + "' for writing");
    write_dataset(out, dataset);
    if (!out) throw Fault("failed writing dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Fault("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

std::uint64_t dataset_header_hash(const Dataset& dataset) {
    return fnv1a64(std::string(kMagicLine) + "\n" + header_line(dataset) + "\n");
}

}  // namespace rft

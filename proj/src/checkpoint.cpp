// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rft {

namespace {

constexpr const char* kMagic = "# rftdesk-checkpoint v1";

std::string expect_field(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw Fault("checkpoint truncated before '" + key + "'");
    if (line.rfind(key + " ", 0) != 0) throw Fault("checkpoint: expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
}

std::size_t parse_size(const std::string& text, const std::string& key) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Fault("checkpoint: bad value for '" + key + "': '" + text + "'");
    }
    return v;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw Fault("cannot format double");
    return std::string(buf, ptr);
}

void write_checkpoint(std::ostream& out, const PolicyParams& params) {
    const auto& f = params.features();
    const auto& w = params.weights();
    out << kMagic << '\n'
        << "vocab_hash " << params.vocab().hash_hex() << '\n'
        << "vocab_size " << params.vocab().size() << '\n'
        << "context_window " << f.context_window() << '\n'
        << "feature_dim " << f.dim() << '\n';
    for (std::size_t v = 0; v < w.rows(); ++v) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            if (c) out << ' ';
            out << format_double(w(v, c));
        }
        out << '\n';
    }
}

std::string serialize_checkpoint(const PolicyParams& params) {
    std::ostringstream os;
    write_checkpoint(os, params);
    return os.str();
}

PolicyParams read_checkpoint(std::istream& in, std::shared_ptr<const Vocabulary> vocab) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw Fault("not an rftdesk checkpoint (bad magic line)");
    const std::string hash = expect_field(in, "vocab_hash");
    if (hash != vocab->hash_hex()) {
        throw Fault("checkpoint vocabulary hash " + hash + " does not match dataset vocabulary hash " +
                    vocab->hash_hex());
    }
    const std::size_t n = parse_size(expect_field(in, "vocab_size"), "vocab_size");
    const std::size_t k = parse_size(expect_field(in, "context_window"), "context_window");
    const std::size_t d = parse_size(expect_field(in, "feature_dim"), "feature_dim");
    if (n != vocab->size()) throw Fault("checkpoint vocab_size disagrees with the vocabulary");
    FeatureExtractor features(n, k);
    if (d != features.dim()) throw Fault("checkpoint feature_dim inconsistent with vocab_size and context_window");

    Matrix w(n, d, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        if (!std::getline(in, line)) throw Fault("checkpoint truncated at row " + std::to_string(v));
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t c = 0; c < d; ++c) {
            if (c) {
                if (p == end || *p != ' ') throw Fault("checkpoint row " + std::to_string(v) + " is malformed");
                ++p;
            }
            double x = 0.0;
            auto [next, ec] = std::from_chars(p, end, x);
            if (ec != std::errc()) throw Fault("checkpoint row " + std::to_string(v) + " has a bad number");
            w(v, c) = x;
            p = next;
        }
        if (p != end) throw Fault("checkpoint row " + std::to_string(v) + " has extra values");
    }
    return PolicyParams(std::move(vocab), features, std::move(w));
}

void save_checkpoint(const std::string& path, const PolicyParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Fault("cannot open '" + path + "' for writing");
    write_checkpoint(out, params);
    if (!out) throw Fault("failed writing checkpoint '" + path + "'");
}

PolicyParams load_checkpoint(const std::string& path, std::shared_ptr<const Vocabulary> vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Fault("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in, std::move(vocab));
}

}  // namespace rft

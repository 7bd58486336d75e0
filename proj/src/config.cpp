// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/config.hpp"

#include "rft/checkpoint.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rft {

namespace {

constexpr std::array<ConfigKey, 39> kKeys{{
    {"run.mode", "train_sft | train_rft | evaluate (set by the CLI subcommand)"},
    {"run.id", "run identifier; empty derives <family>-<paradigm>-<think_mode>-s<seed>"},
    {"run.output_dir", "artifact directory; empty means runs/<run.id>"},
    {"run.seed", "training and evaluation seed"},
    {"run.think_mode", "with_think | without_think"},
    {"run.final_window", "steps in the final-window summary"},
    {"data.family", "banner | fgvc | sat"},
    {"data.train_file", "training dataset file; empty generates one"},
    {"data.eval_file", "evaluation dataset file; empty generates one"},
    {"data.train_size", "generated training instances"},
    {"data.eval_size", "generated evaluation instances"},
    {"data.train_seed", "generator seed for the training set"},
    {"data.eval_seed", "generator seed for the evaluation set"},
    {"data.num_classes", "fgvc classes"},
    {"data.max_distractors", "fgvc noise tokens / banner neutral words, upper bound"},
    {"data.chain_length", "sat relations per prompt"},
    {"data.entity_pool", "sat entity types"},
    {"policy.context_window", "response tokens in the feature window (K)"},
    {"trainer.group_size", "rollouts per prompt (G)"},
    {"trainer.kl_coefficient", "KL penalty (beta); paper preset 0.04"},
    {"trainer.learning_rate", "ascent step size; paper preset 1e-6"},
    {"trainer.total_steps", "optimizer steps (also the SFT step budget)"},
    {"trainer.gradient_accumulation", "micro-batches per step"},
    {"trainer.prompts_per_device_step", "prompts per micro-batch"},
    {"trainer.max_grad_norm", "update norm clip, 0 disables; paper preset 0"},
    {"trainer.workers", "threads for rollouts and evaluation (results do not depend on it)"},
    {"decode.temperature", "sampling temperature"},
    {"decode.max_response_length", "response token cap"},
    {"reward.accuracy_weight", "weight of the exact-match reward"},
    {"reward.format_weight", "weight of the format reward"},
    {"reward.length_weight", "weight of the normalized length reward"},
    {"reward.length_enabled", "add the normalized length reward"},
    {"reward.length_lambda", "length reward scale (lambda)"},
    {"reward.length_l0", "length reward reference length (L0)"},
    {"sft.learning_rate", "SFT descent step size"},
    {"sft.batch_size", "SFT examples per step"},
    {"eval.checkpoint", "checkpoint to evaluate (evaluate mode)"},
    {"eval.paradigm", "table column for evaluate runs: training_free | sft | rft"},
    {"eval.constrained", "decode evaluation answers under the format grammar"},
}};

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Reader {
    const ConfigMap& values;

    const std::string* find(const std::string& key) const {
        auto it = values.find(key);
        return it == values.end() ? nullptr : &it->second;
    }

    [[noreturn]] static void bad(const std::string& key, const std::string& text, const char* what) {
        throw Fault("config key '" + key + "': cannot parse '" + text + "' as " + what);
    }

    void get(const std::string& key, std::string& out) const {
        if (auto* v = find(key)) out = *v;
    }
    void get(const std::string& key, std::uint64_t& out) const {
        auto* v = find(key);
        if (!v) return;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || p != v->data() + v->size()) bad(key, *v, "a non-negative integer");
    }
    void get(const std::string& key, double& out) const {
        auto* v = find(key);
        if (!v) return;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || p != v->data() + v->size()) bad(key, *v, "a real number");
    }
    void get(const std::string& key, bool& out) const {
        auto* v = find(key);
        if (!v) return;
        if (*v == "true" || *v == "1") out = true;
        else if (*v == "false" || *v == "0") out = false;
        else bad(key, *v, "a boolean (true/false)");
    }
    template <class E, class Parse>
    void get_enum(const std::string& key, E& out, Parse parse) const {
        auto* v = find(key);
        if (!v) return;
        try {
            out = parse(*v);
        } catch (const Fault& e) {
            throw Fault("config key '" + key + "': " + e.what());
        }
    }
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const char* to_string(RunMode mode) {
    switch (mode) {
        case RunMode::train_sft: return "train_sft";
        case RunMode::train_rft: return "train_rft";
        case RunMode::evaluate: return "evaluate";
    }
    return "?";
}

RunMode parse_run_mode(const std::string& text) {
    if (text == "train_sft") return RunMode::train_sft;
    if (text == "train_rft") return RunMode::train_rft;
    if (text == "evaluate") return RunMode::evaluate;
    throw Fault("unknown mode '" + text + "' (expected train_sft, train_rft or evaluate)");
}

const char* to_string(Paradigm paradigm) {
    switch (paradigm) {
        case Paradigm::training_free: return "training_free";
        case Paradigm::sft: return "sft";
        case Paradigm::rft: return "rft";
    }
    return "?";
}

Paradigm parse_paradigm(const std::string& text) {
    if (text == "training_free") return Paradigm::training_free;
    if (text == "sft") return Paradigm::sft;
    if (text == "rft") return Paradigm::rft;
    throw Fault("unknown paradigm '" + text + "' (expected training_free, sft or rft)");
}

std::span<const ConfigKey> config_keys() { return kKeys; }

Paradigm ExperimentConfig::paradigm() const {
    switch (mode) {
        case RunMode::train_sft: return Paradigm::sft;
        case RunMode::train_rft: return Paradigm::rft;
        case RunMode::evaluate: return eval_paradigm;
    }
    return eval_paradigm;
}

std::string ExperimentConfig::resolved_run_id() const {
    if (!run_id.empty()) return run_id;
    return std::string(to_string(task.family)) + "-" + to_string(paradigm()) + "-" + to_string(think_mode) + "-s" +
           std::to_string(seed);
}

std::string ExperimentConfig::resolved_output_dir() const {
    return output_dir.empty() ? "runs/" + resolved_run_id() : output_dir;
}

void ExperimentConfig::validate() const {
    task.validate();
    trainer.validate();
    reward.validate();
    if (context_window < 1) throw Fault("policy.context_window must be >= 1");
    if (final_window < 1) throw Fault("run.final_window must be >= 1");
    if (!(sft_learning_rate >= 0.0)) throw Fault("sft.learning_rate must be >= 0");
    if (sft_batch_size < 1) throw Fault("sft.batch_size must be >= 1");
    if (eval_file.empty() && eval_size < 1) throw Fault("data.eval_size must be >= 1");
    if (mode == RunMode::evaluate) {
        if (checkpoint.empty()) throw Fault("eval.checkpoint is required in evaluate mode");
    } else if (train_file.empty() && train_size < 1) {
        throw Fault("data.train_size must be >= 1 (or set data.train_file)");
    }
    for (char c : resolved_run_id()) {
        if (c == '/' || c == '\\' || c == ' ' || c == '\t' || c == '\n') {
            throw Fault("run.id must not contain '/', '\\\\' or whitespace");
        }
    }
}

ConfigMap ExperimentConfig::to_map() const {
    ConfigMap m;
    m["run.mode"] = to_string(mode);
    m["run.id"] = run_id;
    m["run.output_dir"] = output_dir;
    m["run.seed"] = fmt(seed);
    m["run.think_mode"] = to_string(think_mode);
    m["run.final_window"] = fmt(std::uint64_t{final_window});
    m["data.family"] = to_string(task.family);
    m["data.train_file"] = train_file;
    m["data.eval_file"] = eval_file;
    m["data.train_size"] = fmt(std::uint64_t{train_size});
    m["data.eval_size"] = fmt(std::uint64_t{eval_size});
    m["data.train_seed"] = fmt(train_seed);
    m["data.eval_seed"] = fmt(eval_seed);
    m["data.num_classes"] = fmt(std::uint64_t{task.num_classes});
    m["data.max_distractors"] = fmt(std::uint64_t{task.max_distractors});
    m["data.chain_length"] = fmt(std::uint64_t{task.chain_length});
    m["data.entity_pool"] = fmt(std::uint64_t{task.entity_pool});
    m["policy.context_window"] = fmt(std::uint64_t{context_window});
    m["trainer.group_size"] = fmt(std::uint64_t{trainer.group_size});
    m["trainer.kl_coefficient"] = fmt(trainer.kl_coefficient);
    m["trainer.learning_rate"] = fmt(trainer.learning_rate);
    m["trainer.total_steps"] = fmt(std::uint64_t{trainer.total_steps});
    m["trainer.gradient_accumulation"] = fmt(std::uint64_t{trainer.gradient_accumulation});
    m["trainer.prompts_per_device_step"] = fmt(std::uint64_t{trainer.prompts_per_device_step});
    m["trainer.max_grad_norm"] = fmt(trainer.max_grad_norm);
    m["trainer.workers"] = fmt(std::uint64_t{trainer.workers});
    m["decode.temperature"] = fmt(trainer.decode.temperature);
    m["decode.max_response_length"] = fmt(std::uint64_t{trainer.decode.max_response_length});
    m["reward.accuracy_weight"] = fmt(reward.accuracy_weight);
    m["reward.format_weight"] = fmt(reward.format_weight);
    m["reward.length_weight"] = fmt(reward.length_weight);
    m["reward.length_enabled"] = fmt(reward.length.enabled);
    m["reward.length_lambda"] = fmt(reward.length.lambda);
    m["reward.length_l0"] = fmt(reward.length.l0);
    m["sft.learning_rate"] = fmt(sft_learning_rate);
    m["sft.batch_size"] = fmt(std::uint64_t{sft_batch_size});
    m["eval.checkpoint"] = checkpoint;
    m["eval.paradigm"] = to_string(eval_paradigm);
    m["eval.constrained"] = fmt(eval_constrained);
    return m;
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& values) {
    for (const auto& [key, value] : values) {
        bool known = false;
        for (const auto& k : kKeys) known = known || key == k.key;
        if (!known) throw Fault("unknown config key '" + key + "'");
    }
    ExperimentConfig c;
    Reader r{values};
    r.get_enum("run.mode", c.mode, parse_run_mode);
    r.get("run.id", c.run_id);
    r.get("run.output_dir", c.output_dir);
    r.get("run.seed", c.seed);
    r.get_enum("run.think_mode", c.think_mode, parse_think_mode);
    r.get("run.final_window", c.final_window);
    r.get_enum("data.family", c.task.family, parse_task_family);
    r.get("data.train_file", c.train_file);
    r.get("data.eval_file", c.eval_file);
    r.get("data.train_size", c.train_size);
    r.get("data.eval_size", c.eval_size);
    r.get("data.train_seed", c.train_seed);
    r.get("data.eval_seed", c.eval_seed);
    r.get("data.num_classes", c.task.num_classes);
    r.get("data.max_distractors", c.task.max_distractors);
    r.get("data.chain_length", c.task.chain_length);
    r.get("data.entity_pool", c.task.entity_pool);
    r.get("policy.context_window", c.context_window);
    r.get("trainer.group_size", c.trainer.group_size);
    r.get("trainer.kl_coefficient", c.trainer.kl_coefficient);
    r.get("trainer.learning_rate", c.trainer.learning_rate);
    r.get("trainer.total_steps", c.trainer.total_steps);
    r.get("trainer.gradient_accumulation", c.trainer.gradient_accumulation);
    r.get("trainer.prompts_per_device_step", c.trainer.prompts_per_device_step);
    r.get("trainer.max_grad_norm", c.trainer.max_grad_norm);
    r.get("trainer.workers", c.trainer.workers);
    r.get("decode.temperature", c.trainer.decode.temperature);
    r.get("decode.max_response_length", c.trainer.decode.max_response_length);
    r.get("reward.accuracy_weight", c.reward.accuracy_weight);
    r.get("reward.format_weight", c.reward.format_weight);
    r.get("reward.length_weight", c.reward.length_weight);
    r.get("reward.length_enabled", c.reward.length.enabled);
    r.get("reward.length_lambda", c.reward.length.lambda);
    r.get("reward.length_l0", c.reward.length.l0);
    r.get("sft.learning_rate", c.sft_learning_rate);
    r.get("sft.batch_size", c.sft_batch_size);
    r.get("eval.checkpoint", c.checkpoint);
    r.get_enum("eval.paradigm", c.eval_paradigm, parse_paradigm);
    r.get("eval.constrained", c.eval_constrained);
    c.trainer.think_required = c.think_mode == ThinkMode::with_think;
    return c;
}

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Fault(origin + ":" + std::to_string(n) + ": expected 'key = value', got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw Fault(origin + ":" + std::to_string(n) + ": empty key");
        if (!out.emplace(key, trim(t.substr(eq + 1))).second) {
            throw Fault(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Fault("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str(), path);
}

std::string format_config(const ConfigMap& values) {
    std::string out;
    for (const auto& k : kKeys) {
        auto it = values.find(k.key);
        if (it == values.end()) continue;
        out += std::string("# ") + k.doc + "\n" + k.key + " = " + it->second + "\n";
    }
    return out;
}

ConfigMap preset_overrides(const std::string& name, TaskFamily family) {
    if (name == "desk") return {};
    if (name == "paper") {
        const auto sizes = paper_scale_sizes(family);
        const auto p = TrainerConfig::paper_preset();
        return {
            {"trainer.learning_rate", fmt(p.learning_rate)},
            {"trainer.kl_coefficient", fmt(p.kl_coefficient)},
            {"trainer.max_grad_norm", fmt(p.max_grad_norm)},
            {"data.train_size", fmt(std::uint64_t{sizes.train})},
        };
    }
    throw Fault("unknown preset '" + name + "' (expected desk or paper)");
}

ConfigMap merge_layers(std::initializer_list<const ConfigMap*> layers) {
    ConfigMap out;
    for (const ConfigMap* layer : layers) {
        if (!layer) continue;
        for (const auto& [k, v] : *layer) out[k] = v;
    }
    return out;
}

}  // namespace rft

// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "rft/harness.hpp"

#include "rft/checkpoint.hpp"
#include "rft/rng.hpp"
#include "rft/sft.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rft {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kLossFile = "loss.csv";
constexpr const char* kCheckpointFile = "checkpoint.txt";
constexpr const char* kEvalLogFile = "eval_log.tsv";
constexpr const char* kTrainDataFile = "train.tsv";
constexpr const char* kEvalDataFile = "eval.tsv";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Fault("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Fault("cannot open '" + path + "' for writing");
    out << bytes;
    if (!out) throw Fault("failed writing '" + path + "'");
}

double parse_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw Fault("bad number '" + text + "' in " + what);
    return v;
}

Dataset resolve_dataset(const ExperimentConfig& c, const std::string& file, std::uint64_t seed, std::size_t n,
                        const char* key) {
    if (file.empty()) return generate_dataset(c.task, seed, n);
    Dataset d = load_dataset(file);
    if (!(d.params == c.task)) {
        throw Fault(std::string(key) + " '" + file + "' was generated with different data.* parameters");
    }
    return d;
}

std::string join_tokens(const Vocabulary& vocab, std::span<const TokenId> tokens) { return vocab.decode(tokens); }

void write_eval_log(const std::string& path, const Vocabulary& vocab, std::span<const TaskInstance> instances,
                    const EvalResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Fault("cannot open '" + path + "' for writing");
    out << "index\tgold\tresponse\tcorrect\tformat\n";
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& rec = result.records[i];
        out << i << '\t' << join_tokens(vocab, instances[i].gold) << '\t' << join_tokens(vocab, rec.rollout.response)
            << '\t' << rec.correct << '\t' << rec.format << '\n';
    }
    if (!out) throw Fault("failed writing '" + path + "'");
}

ordered_json window_json(const WindowSummary& w) {
    return ordered_json{{"steps", w.steps},
                        {"mean_reward", w.mean_reward},
                        {"accuracy", w.accuracy},
                        {"mean_response_length", w.mean_response_length},
                        {"mean_kl", w.mean_kl}};
}

WindowSummary window_from_json(const ordered_json& j) {
    WindowSummary w;
    w.steps = j.at("steps").get<std::size_t>();
    w.mean_reward = j.at("mean_reward").get<double>();
    w.accuracy = j.at("accuracy").get<double>();
    w.mean_response_length = j.at("mean_response_length").get<double>();
    w.mean_kl = j.at("mean_kl").get<double>();
    return w;
}

ordered_json eval_json(const EvalSummary& e) {
    return ordered_json{{"instances", e.instances},
                        {"accuracy", e.accuracy},
                        {"format_rate", e.format_rate},
                        {"mean_response_length", e.mean_response_length}};
}

EvalSummary eval_from_json(const ordered_json& j) {
    EvalSummary e;
    e.instances = j.at("instances").get<std::size_t>();
    e.accuracy = j.at("accuracy").get<double>();
    e.format_rate = j.at("format_rate").get<double>();
    e.mean_response_length = j.at("mean_response_length").get<double>();
    return e;
}

void say(std::ostream* log, const std::string& line) {
    if (log) *log << line << '\n' << std::flush;
}

std::string fixed(double v, int digits, bool sign = false) {
    std::ostringstream os;
    if (sign) os << std::showpos;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void write_metrics_row(std::ostream& out, const StepMetrics& m) {
    out << m.step << ',' << format_double(m.mean_reward) << ',' << format_double(m.accuracy) << ','
        << format_double(m.mean_response_length) << ',' << format_double(m.mean_kl) << ','
        << format_double(m.grad_norm) << '\n';
}

}  // namespace

// ---- metrics ----------------------------------------------------------------

void write_metrics_csv(std::ostream& out, const TrainingMetrics& metrics) {
    out << kMetricsHeader << '\n';
    for (const auto& m : metrics) write_metrics_row(out, m);
}

TrainingMetrics read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw Fault("metrics CSV header mismatch");
    TrainingMetrics out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw Fault("metrics CSV row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                                       " fields");
        StepMetrics m;
        m.step = static_cast<std::size_t>(parse_double(f[0], "metrics step"));
        m.mean_reward = parse_double(f[1], "metrics CSV");
        m.accuracy = parse_double(f[2], "metrics CSV");
        m.mean_response_length = parse_double(f[3], "metrics CSV");
        m.mean_kl = parse_double(f[4], "metrics CSV");
        m.grad_norm = parse_double(f[5], "metrics CSV");
        out.push_back(m);
    }
    return out;
}

TrainingMetrics load_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Fault("cannot open metrics '" + path + "'");
    return read_metrics_csv(in);
}

WindowSummary final_window(const TrainingMetrics& metrics, std::size_t window) {
    WindowSummary w;
    const std::size_t n = std::min(window, metrics.size());
    if (n == 0) return w;
    for (std::size_t i = metrics.size() - n; i < metrics.size(); ++i) {
        w.mean_reward += metrics[i].mean_reward;
        w.accuracy += metrics[i].accuracy;
        w.mean_response_length += metrics[i].mean_response_length;
        w.mean_kl += metrics[i].mean_kl;
    }
    const double d = static_cast<double>(n);
    w.steps = n;
    w.mean_reward /= d;
    w.accuracy /= d;
    w.mean_response_length /= d;
    w.mean_kl /= d;
    return w;
}

// ---- manifests ----------------------------------------------------------------

std::string manifest_to_json(const Manifest& m) {
    ordered_json j;
    j["format"] = m.format;
    j["run_id"] = m.run_id;
    j["status"] = m.status;
    if (!m.error.empty()) j["error"] = m.error;
    j["mode"] = m.mode;
    j["paradigm"] = m.paradigm;
    j["family"] = m.family;
    j["think_mode"] = m.think_mode;
    j["template_version"] = m.template_version;
    j["vocab_hash"] = m.vocab_hash;
    j["steps_completed"] = m.steps_completed;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : m.config) cfg[k] = v;
    j["config"] = cfg;
    ordered_json seeds = ordered_json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    j["seeds"] = seeds;
    ordered_json hashes = ordered_json::object();
    for (const auto& [k, v] : m.dataset_header_hashes) hashes[k] = v;
    j["dataset_header_hashes"] = hashes;
    if (m.eval) j["eval"] = eval_json(*m.eval);
    if (m.window) j["final_window"] = window_json(*m.window);
    ordered_json arts = ordered_json::object();
    for (const auto& [k, v] : m.artifacts) arts[k] = v;
    j["artifacts"] = arts;
    return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw Fault(std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        Manifest m;
        m.format = j.at("format").get<std::string>();
        if (m.format != "rftdesk-manifest v1") throw Fault("unsupported manifest format '" + m.format + "'");
        m.run_id = j.at("run_id").get<std::string>();
        m.status = j.at("status").get<std::string>();
        if (j.contains("error")) m.error = j.at("error").get<std::string>();
        m.mode = j.at("mode").get<std::string>();
        m.paradigm = j.at("paradigm").get<std::string>();
        m.family = j.at("family").get<std::string>();
        m.think_mode = j.at("think_mode").get<std::string>();
        m.template_version = j.at("template_version").get<std::string>();
        m.vocab_hash = j.at("vocab_hash").get<std::string>();
        m.steps_completed = j.at("steps_completed").get<std::size_t>();
        for (const auto& [k, v] : j.at("config").items()) m.config[k] = v.get<std::string>();
        for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
        for (const auto& [k, v] : j.at("dataset_header_hashes").items()) m.dataset_header_hashes[k] = v.get<std::string>();
        for (const auto& [k, v] : j.at("artifacts").items()) m.artifacts[k] = v.get<std::string>();
        if (j.contains("eval")) m.eval = eval_from_json(j.at("eval"));
        if (j.contains("final_window")) m.window = window_from_json(j.at("final_window"));
        return m;
    } catch (const Fault&) {
        throw;
    } catch (const std::exception& e) {
        throw Fault(std::string("malformed manifest: ") + e.what());
    }
}

Manifest load_manifest(const std::string& path) {
    std::string p = path;
    if (fs::is_directory(p)) p = (fs::path(p) / kManifestFile).string();
    Manifest m = parse_manifest(read_file(p));
    m.path = p;
    return m;
}

std::string file_checksum(const std::string& path) { return "fnv1a64:" + hex64(fnv1a64(read_file(path))); }

ExperimentConfig config_from_manifest(const Manifest& manifest, const std::string& output_dir) {
    ConfigMap values = manifest.config;
    values["run.id"] = manifest.run_id;
    values["run.output_dir"] = output_dir;
    return ExperimentConfig::from_map(values);
}

void write_initial_checkpoint(const ExperimentConfig& config, const std::string& path) {
    config.task.validate();
    save_checkpoint(path, PolicyParams(build_vocabulary(config.task), config.context_window));
}

// ---- run ----------------------------------------------------------------------

RunOutcome run(const ExperimentConfig& config, std::ostream* log) {
    config.validate();
    RunOutcome out;
    out.directory = config.resolved_output_dir();
    const fs::path dir(out.directory);
    fs::create_directories(dir);
    auto at = [&](const char* name) { return (dir / name).string(); };

    Manifest& m = out.manifest;
    m.run_id = config.resolved_run_id();
    m.mode = to_string(config.mode);
    m.paradigm = to_string(config.paradigm());
    m.family = to_string(config.task.family);
    m.think_mode = to_string(config.think_mode);
    m.config = config.to_map();
    const std::uint64_t train_seed = derive_seed(config.seed, 1);
    const std::uint64_t eval_seed = derive_seed(config.seed, 2);
    m.seeds = {{"run", config.seed},
               {"training", train_seed},
               {"evaluation", eval_seed},
               {"train_data", config.train_seed},
               {"eval_data", config.eval_seed}};

    // Stale artifacts from an earlier run in the same directory would end up
    // in the checksums.
    for (const char* f : {kMetricsFile, kLossFile, kCheckpointFile, kEvalLogFile, kTrainDataFile, kEvalDataFile}) {
        fs::remove(at(f));
    }

    std::optional<PolicyParams> params;
    try {
        const Dataset eval_ds = resolve_dataset(config, config.eval_file, config.eval_seed, config.eval_size,
                                                "data.eval_file");
        save_dataset(at(kEvalDataFile), eval_ds);
        m.dataset_header_hashes["eval"] = hex64(dataset_header_hash(eval_ds));
        const auto vocab = build_vocabulary(eval_ds.params);
        m.vocab_hash = vocab->hash_hex();
        const DecodeConfig response = response_decode(*vocab, config.think_mode, config.trainer.decode);

        if (config.mode == RunMode::evaluate) {
            params.emplace(load_checkpoint(config.checkpoint, vocab));
        } else {
            const Dataset train_ds = resolve_dataset(config, config.train_file, config.train_seed, config.train_size,
                                                     "data.train_file");
            save_dataset(at(kTrainDataFile), train_ds);
            m.dataset_header_hashes["train"] = hex64(dataset_header_hash(train_ds));
            params.emplace(vocab, config.context_window);

            if (config.mode == RunMode::train_rft) {
                std::vector<TaskInstance> train = train_ds.instances;
                for (auto& t : train) t.prompt = templated_prompt(*vocab, t, config.think_mode);
                TrainerConfig tc = config.trainer;
                tc.think_required = config.think_mode == ThinkMode::with_think;
                tc.decode = response;
                std::ofstream csv(at(kMetricsFile), std::ios::binary);
                if (!csv) throw Fault("cannot open metrics CSV for writing");
                csv << kMetricsHeader << '\n' << std::flush;
                TrainingMetrics series;
                train_rft(*params, train, config.reward, tc, train_seed, [&](const StepMetrics& s) {
                    write_metrics_row(csv, s);
                    csv.flush();
                    series.push_back(s);
                    m.steps_completed = s.step;
                    if (s.step % 25 == 0 || s.step == tc.total_steps) {
                        say(log, m.run_id + " step " + std::to_string(s.step) + " reward " + fixed(s.mean_reward, 3) +
                                     " acc " + fixed(s.accuracy, 3) + " len " + fixed(s.mean_response_length, 1) +
                                     " kl " + fixed(s.mean_kl, 4));
                    }
                });
                m.window = final_window(series, config.final_window);
            } else {
                std::vector<SftExample> examples;
                for (const auto& t : train_ds.instances) {
                    examples.push_back(make_sft_example(*vocab, t, config.think_mode));
                }
                SftConfig sc;
                sc.learning_rate = config.sft_learning_rate;
                sc.steps = config.trainer.total_steps;
                sc.batch_size = config.sft_batch_size;
                sc.workers = config.trainer.workers;
                sc.decode = response;
                std::ofstream csv(at(kLossFile), std::ios::binary);
                if (!csv) throw Fault("cannot open loss CSV for writing");
                csv << "step,loss\n" << std::flush;
                train_sft(*params, examples, sc, train_seed, [&](std::size_t step, double loss) {
                    csv << step << ',' << format_double(loss) << '\n' << std::flush;
                    m.steps_completed = step;
                    if (step % 25 == 0 || step == sc.steps) {
                        say(log, m.run_id + " step " + std::to_string(step) + " loss " + fixed(loss, 4));
                    }
                });
            }
        }
        save_checkpoint(at(kCheckpointFile), *params);

        EvalOptions opts;
        opts.constrained = config.eval_constrained;
        opts.seed = eval_seed;
        opts.workers = config.trainer.workers;
        const EvalResult er = evaluate(*params, eval_ds.instances, config.think_mode, config.trainer.decode, opts);
        write_eval_log(at(kEvalLogFile), *vocab, eval_ds.instances, er);
        m.eval = EvalSummary{er.accuracy, er.format_rate, er.mean_response_length, eval_ds.instances.size()};
        say(log, m.run_id + " eval accuracy " + fixed(er.accuracy, 4) + " format " + fixed(er.format_rate, 4));
        m.status = "complete";
    } catch (const std::exception& e) {
        m.status = "partial";
        m.error = e.what();
        out.status = 1;
        if (params) {
            try {
                save_checkpoint(at(kCheckpointFile), *params);
            } catch (const std::exception&) {
            }
        }
        say(log, m.run_id + " FAULT: " + m.error);
    }

    for (const char* f : {kMetricsFile, kLossFile, kCheckpointFile, kEvalLogFile, kTrainDataFile, kEvalDataFile}) {
        if (fs::exists(at(f))) m.artifacts[f] = file_checksum(at(f));
    }
    write_file(at(kManifestFile), manifest_to_json(m));
    m.path = at(kManifestFile);
    return out;
}

// ---- comparison table ------------------------------------------------------------

ComparisonTable comparison_table(std::span<const Manifest> manifests) {
    struct Slot {
        ComparisonRow row;
        const Manifest* owners[6] = {};
        std::vector<const Manifest*> trained;
    };
    std::map<std::string, Slot> by_family;
    for (const auto& m : manifests) {
        const std::string where = m.path.empty() ? m.run_id : m.path;
        if (m.status != "complete") throw Fault("manifest '" + where + "' is " + m.status + ": " + m.error);
        if (!m.eval) throw Fault("manifest '" + where + "' has no evaluation result");
        const Paradigm p = parse_paradigm(m.paradigm);
        const ThinkMode t = parse_think_mode(m.think_mode);
        const std::size_t idx = static_cast<std::size_t>(p) * 2 + (t == ThinkMode::with_think ? 0 : 1);
        Slot& slot = by_family[m.family];
        slot.row.family = m.family;
        if (slot.owners[idx]) {
            throw Fault("duplicate table cell (" + m.family + ", " + m.paradigm + ", " + m.think_mode + "): runs '" +
                        slot.owners[idx]->run_id + "' and '" + m.run_id + "'");
        }
        slot.owners[idx] = &m;
        slot.row.cells[idx] = ComparisonCell{m.run_id, m.eval->accuracy};
        if (p != Paradigm::training_free) slot.trained.push_back(&m);
    }
    ComparisonTable table;
    for (auto& [family, slot] : by_family) {
        // Fairness: SFT and RFT cells of one family share a step budget.
        const Manifest* first = nullptr;
        for (const Manifest* m : slot.trained) {
            auto it = m->config.find("trainer.total_steps");
            if (it == m->config.end()) throw Fault("manifest '" + m->run_id + "' does not record trainer.total_steps");
            if (!first) {
                first = m;
            } else if (first->config.at("trainer.total_steps") != it->second) {
                throw Fault("fairness contract violated for " + family + ": run '" + first->run_id + "' used " +
                            first->config.at("trainer.total_steps") + " steps but run '" + m->run_id + "' used " +
                            it->second);
            }
        }
        table.rows.push_back(slot.row);
    }
    return table;
}

std::string format_table(const ComparisonTable& table) {
    static const char* kHeads[6] = {"training-free w/ think", "training-free w/o think", "SFT w/ think",
                                    "SFT w/o think",          "RFT w/ think",            "RFT w/o think"};
    std::ostringstream os;
    os << std::left << std::setw(8) << "family";
    for (const char* h : kHeads) os << " | " << std::setw(23) << h;
    os << '\n';
    for (const auto& row : table.rows) {
        os << std::left << std::setw(8) << row.family;
        for (const auto& cell : row.cells) {
            os << " | " << std::setw(23) << (cell ? fixed(100.0 * cell->accuracy, 2) : std::string("absent"));
        }
        os << '\n';
    }
    return os.str();
}

std::vector<Manifest> run_grid(const ExperimentConfig& base, const std::string& directory, std::ostream* log) {
    fs::create_directories(directory);
    const std::string init = (fs::path(directory) / "initial_checkpoint.txt").string();
    write_initial_checkpoint(base, init);
    std::vector<Manifest> manifests;
    for (const ThinkMode think : {ThinkMode::with_think, ThinkMode::without_think}) {
        for (const Paradigm p : {Paradigm::training_free, Paradigm::sft, Paradigm::rft}) {
            ExperimentConfig c = base;
            c.think_mode = think;
            c.trainer.think_required = think == ThinkMode::with_think;
            c.mode = p == Paradigm::training_free ? RunMode::evaluate
                                                  : (p == Paradigm::sft ? RunMode::train_sft : RunMode::train_rft);
            c.eval_paradigm = Paradigm::training_free;
            c.checkpoint = p == Paradigm::training_free ? init : std::string();
            c.run_id = std::string(to_string(c.task.family)) + "-" + to_string(p) + "-" + to_string(think);
            c.output_dir = (fs::path(directory) / c.run_id).string();
            auto outcome = run(c, log);
            if (outcome.status != 0) {
                throw Fault("grid run '" + c.run_id + "' failed: " + outcome.manifest.error);
            }
            manifests.push_back(outcome.manifest);
        }
    }
    return manifests;
}

// ---- length ablation ----------------------------------------------------------------

AblationSummary length_ablation(const ExperimentConfig& base, const std::string& directory, bool with_control,
                                std::ostream* log) {
    fs::create_directories(directory);
    auto arm = [&](const std::string& name, bool enabled) {
        ExperimentConfig c = base;
        c.mode = RunMode::train_rft;
        c.reward.length.enabled = enabled;
        c.run_id = base.resolved_run_id() + "-" + name;
        c.output_dir = (fs::path(directory) / name).string();
        auto outcome = run(c, log);
        if (outcome.status != 0) throw Fault("ablation arm '" + name + "' failed: " + outcome.manifest.error);
        AblationArm a;
        a.name = name;
        a.directory = outcome.directory;
        a.length_enabled = enabled;
        a.window = *outcome.manifest.window;
        a.eval = *outcome.manifest.eval;
        return a;
    };
    AblationSummary s;
    s.family = to_string(base.task.family);
    s.window = base.final_window;
    s.without_length = arm("length_off", false);
    s.with_length = arm("length_on", true);
    if (with_control) s.control = arm("control", false);

    ordered_json j;
    j["family"] = s.family;
    j["think_mode"] = to_string(base.think_mode);
    j["window"] = s.window;
    auto arm_json = [](const AblationArm& a) {
        return ordered_json{{"name", a.name},
                            {"directory", a.directory},
                            {"length_enabled", a.length_enabled},
                            {"final_window", window_json(a.window)},
                            {"eval", eval_json(a.eval)}};
    };
    j["without_length"] = arm_json(s.without_length);
    j["with_length"] = arm_json(s.with_length);
    if (s.control) j["control"] = arm_json(*s.control);
    j["delta"] = ordered_json{{"final_window_accuracy", s.accuracy_delta()},
                              {"final_window_mean_response_length", s.length_delta()},
                              {"eval_accuracy", s.eval_accuracy_delta()}};
    write_file((fs::path(directory) / "summary.json").string(), j.dump(2) + "\n");
    write_file((fs::path(directory) / "summary.txt").string(), format_ablation(s));
    return s;
}

std::string format_ablation(const AblationSummary& s) {
    std::ostringstream os;
    auto line = [&](const AblationArm& a) {
        os << std::left << std::setw(12) << a.name << " window acc " << fixed(a.window.accuracy, 4) << "  window len "
           << fixed(a.window.mean_response_length, 2) << "  eval acc " << fixed(a.eval.accuracy, 4) << '\n';
    };
    os << "length ablation, " << s.family << ", final window " << s.window << " steps\n";
    line(s.without_length);
    line(s.with_length);
    if (s.control) line(*s.control);
    os << "delta (on - off): window acc " << fixed(s.accuracy_delta(), 4, true) << "  window len "
       << fixed(s.length_delta(), 2, true) << "  eval acc " << fixed(s.eval_accuracy_delta(), 4, true) << '\n';
    return os.str();
}

}  // namespace rft

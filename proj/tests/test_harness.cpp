// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include "rft/checkpoint.hpp"
#include "rft/config.hpp"
#include "rft/evaluation.hpp"
#include "rft/harness.hpp"
#include "rft/rewards.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace rft;
using namespace rft::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig quick(const fs::path& dir, std::size_t steps) {
    ExperimentConfig c;
    c.output_dir = dir.string();
    c.trainer.total_steps = steps;
    c.eval_size = 64;
    c.train_size = 64;
    return c;
}

Manifest fake(const std::string& id, const std::string& family, const std::string& paradigm,
              const std::string& think, const std::string& steps = "300") {
    Manifest m;
    m.run_id = id;
    m.status = "complete";
    m.family = family;
    m.paradigm = paradigm;
    m.think_mode = think;
    m.config["trainer.total_steps"] = steps;
    m.eval = EvalSummary{0.5, 1.0, 3.0, 256};
    return m;
}

std::string run_cli(const std::string& args) {
    const std::string cmd = std::string(RFTDESK_EXE) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    pclose(pipe);
    return out;
}

}  // namespace

// ---- config ------------------------------------------------------------------------

TEST_CASE("config text parsing") {
    const ConfigMap m = parse_config_text("# comment\n\ntrainer.kl_coefficient = 0.04\n  data.family=sat  \n");
    CHECK(m.at("trainer.kl_coefficient") == "0.04");
    CHECK(m.at("data.family") == "sat");
    CHECK_THROWS_WITH_AS(parse_config_text("a = 1\na = 2\n"), doctest::Contains(":2: duplicate key 'a'"), Fault);
    CHECK_THROWS_WITH_AS(parse_config_text("just words\n"), doctest::Contains(":1:"), Fault);
}

TEST_CASE("config map round trip and faults name the key") {
    ExperimentConfig c;
    c.trainer.kl_coefficient = 0.1234567890123;
    c.think_mode = ThinkMode::with_think;
    c.reward.length.enabled = true;
    c.task.family = TaskFamily::sat;
    const ConfigMap m = c.to_map();
    CHECK(m.size() == config_keys().size());
    const ExperimentConfig back = ExperimentConfig::from_map(m);
    CHECK(back.to_map() == m);
    CHECK(back.trainer.think_required);
    CHECK(parse_config_text(format_config(m)) == m);

    CHECK_THROWS_WITH_AS(ExperimentConfig::from_map({{"trainer.bogus", "1"}}), doctest::Contains("trainer.bogus"),
                         Fault);
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_map({{"trainer.group_size", "eight"}}),
                         doctest::Contains("trainer.group_size"), Fault);
    ExperimentConfig bad;
    bad.trainer.group_size = 1;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("trainer.group_size"), Fault);
    ExperimentConfig eval;
    eval.mode = RunMode::evaluate;
    CHECK_THROWS_WITH_AS(eval.validate(), doctest::Contains("eval.checkpoint"), Fault);
}

TEST_CASE("layer precedence: later layers win") {
    const ConfigMap preset = preset_overrides("paper", TaskFamily::fgvc);
    CHECK(preset.at("trainer.kl_coefficient") == "0.04");
    CHECK(preset.at("trainer.learning_rate") == "1e-06");
    CHECK(preset.at("data.train_size") == "6000");
    const ConfigMap file{{"trainer.kl_coefficient", "0.2"}, {"run.seed", "5"}};
    const ConfigMap flags{{"trainer.kl_coefficient", "0.3"}};
    const ConfigMap merged = merge_layers({&preset, &file, &flags});
    CHECK(merged.at("trainer.kl_coefficient") == "0.3");
    CHECK(merged.at("run.seed") == "5");
    CHECK(merged.at("trainer.learning_rate") == "1e-06");
    CHECK(preset_overrides("desk", TaskFamily::banner).empty());
}

TEST_CASE("CLI: flag over file over default") {
    const auto dir = scratch_dir("cli");
    const auto cfg = dir / "run.cfg";
    std::ofstream(cfg) << "trainer.kl_coefficient = 0.2\nrun.seed = 7\n";
    const std::string out =
        run_cli("train-rft --print-config --config " + cfg.string() + " --trainer.kl_coefficient 0.3");
    CHECK(out.find("trainer.kl_coefficient = 0.3\n") != std::string::npos);
    CHECK(out.find("run.seed = 7\n") != std::string::npos);
    CHECK(out.find("trainer.group_size = 8\n") != std::string::npos);
    CHECK(out.find("run.mode = train_rft\n") != std::string::npos);
    const std::string bad = run_cli("train-rft --print-config --trainer.group_size 1");
    CHECK(bad.find("trainer.group_size") != std::string::npos);
}

// ---- metrics CSV and manifests -----------------------------------------------------------

TEST_CASE("metrics CSV") {
    TrainingMetrics m{{1, 1.5, 0.25, 0.5, 3.0, 0.01, 0.2}, {2, 2.0, 0.5, 1.0, 4.0, 0.02, 0.1}};
    std::ostringstream os;
    write_metrics_csv(os, m);
    const std::string text = os.str();
    CHECK(text.substr(0, text.find('\n')) == "step,mean_reward,accuracy,mean_response_length,mean_kl,grad_norm");
    std::istringstream in(text);
    const TrainingMetrics back = read_metrics_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].step == 2);
    CHECK(back[1].accuracy == 0.5);
    CHECK(back[1].grad_norm == 0.1);
    std::istringstream wrong("step,reward\n");
    CHECK_THROWS_AS(read_metrics_csv(wrong), Fault);

    const WindowSummary w = final_window(back, 1);
    CHECK(w.steps == 1);
    CHECK(w.accuracy == 0.5);
    CHECK(final_window(back, 50).accuracy == doctest::Approx(0.375));
}

TEST_CASE("manifest JSON round trip") {
    Manifest m = fake("r1", "sat", "rft", "with_think");
    m.seeds = {{"run", 3}, {"training", 0xfedcba9876543210ULL}};
    m.dataset_header_hashes = {{"eval", "00ff"}};
    m.artifacts = {{"metrics.csv", "fnv1a64:0123456789abcdef"}};
    m.window = WindowSummary{50, 1.0, 0.75, 12.5, 0.01};
    m.steps_completed = 300;
    const Manifest back = parse_manifest(manifest_to_json(m));
    CHECK(manifest_to_json(back) == manifest_to_json(m));
    CHECK(back.seeds.at("training") == 0xfedcba9876543210ULL);
    CHECK(back.window->mean_response_length == 12.5);
}

// ---- comparison table -----------------------------------------------------------------------

TEST_CASE("comparison table") {
    SUBCASE("empty input gives a header-only table") {
        const std::string t = format_table(comparison_table({}));
        CHECK(std::count(t.begin(), t.end(), '\n') == 1);
        CHECK(t.find("RFT w/o think") != std::string::npos);
    }
    SUBCASE("missing cells are rendered as absent") {
        const std::vector<Manifest> ms{fake("a", "fgvc", "rft", "with_think")};
        const std::string t = format_table(comparison_table(ms));
        CHECK(std::count(t.begin(), t.end(), '\n') == 2);
        CHECK(t.find("50.00") != std::string::npos);
        std::size_t absent = 0;
        for (auto p = t.find("absent"); p != std::string::npos; p = t.find("absent", p + 1)) ++absent;
        CHECK(absent == 5);
    }
    SUBCASE("duplicate cells name both runs") {
        const std::vector<Manifest> ms{fake("first-run", "sat", "sft", "with_think"),
                                       fake("second-run", "sat", "sft", "with_think")};
        CHECK_THROWS_WITH_AS(comparison_table(ms), doctest::Contains("'first-run' and 'second-run'"), Fault);
    }
    SUBCASE("unequal SFT and RFT step budgets violate fairness") {
        const std::vector<Manifest> ms{fake("s", "sat", "sft", "with_think", "300"),
                                       fake("r", "sat", "rft", "with_think", "200")};
        CHECK_THROWS_WITH_AS(comparison_table(ms), doctest::Contains("fairness"), Fault);
    }
    SUBCASE("partial manifests are rejected") {
        Manifest m = fake("p", "sat", "rft", "with_think");
        m.status = "partial";
        CHECK_THROWS_AS(comparison_table(std::vector<Manifest>{m}), Fault);
    }
}

// ---- checkpoints and evaluation ----------------------------------------------------------

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(41);
    auto vocab = build_vocabulary({});
    PolicyParams p(vocab, 3);
    for (double& w : p.weights().flat()) w = std::ldexp(2.0 * rng.uniform01() - 1.0, -20 + int(rng.uniform_index(40)));
    std::istringstream in(serialize_checkpoint(p));
    const PolicyParams back = read_checkpoint(in, vocab);
    CHECK(back.weights() == p.weights());
    CHECK(back.features() == p.features());
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(p));
}

TEST_CASE("checkpoint for another vocabulary names both hashes") {
    auto banner = build_vocabulary({});
    TaskParams fp;
    fp.family = TaskFamily::fgvc;
    auto fgvc = build_vocabulary(fp);
    std::istringstream in(serialize_checkpoint(PolicyParams(banner)));
    std::string message;
    try {
        read_checkpoint(in, fgvc);
    } catch (const Fault& e) {
        message = e.what();
    }
    CHECK(message.find(banner->hash_hex()) != std::string::npos);
    CHECK(message.find(fgvc->hash_hex()) != std::string::npos);
}

TEST_CASE("evaluate") {
    auto vocab = build_vocabulary({});
    const auto eval = generate_banner_analog(*vocab, 2, 256);

    SUBCASE("untrained policy lies in the binomial band around 0.5") {
        for (ThinkMode mode : {ThinkMode::with_think, ThinkMode::without_think}) {
            const auto r = evaluate(PolicyParams(vocab), eval, mode, {});
            INFO(to_string(mode) << " accuracy " << r.accuracy);
            CHECK(r.accuracy >= 0.406);
            CHECK(r.accuracy <= 0.594);
            CHECK(r.format_rate == 1.0);   // constrained decoding
        }
    }
    SUBCASE("an oracle policy scores 1") {
        TaskParams fp;
        fp.family = TaskFamily::fgvc;
        auto fv = build_vocabulary(fp);
        const auto tasks = generate_fgvc_analog(*fv, 3, 256);
        PolicyParams p(fv);
        for (std::size_t k = 0; k < 100; ++k) {
            p.weights()(fv->id("class_" + std::to_string(k)), p.features().prompt_column(fv->id("c_" + std::to_string(k)))) = 10.0;
        }
        CHECK(evaluate(p, tasks, ThinkMode::without_think, {}).accuracy == 1.0);
        CHECK(evaluate(p, tasks, ThinkMode::with_think, {}).accuracy == 1.0);
    }
    SUBCASE("without_think transcripts contain no think tokens") {
        Rng rng(42);
        PolicyParams p(vocab);
        randomize(p, rng, 2.0);
        for (bool constrained : {true, false}) {
            EvalOptions o;
            o.constrained = constrained;
            DecodeConfig d;
            d.max_response_length = 64;
            const auto r = evaluate(p, eval, ThinkMode::without_think, d, o);
            for (const auto& rec : r.records) {
                for (TokenId t : rec.rollout.response) {
                    CHECK(t != kThinkOpen);
                    CHECK(t != kThinkClose);
                }
            }
        }
    }
}

// ---- full runs -------------------------------------------------------------------------------

TEST_CASE("run: zero steps gives a header-only CSV and the initial checkpoint") {
    const auto dir = scratch_dir("run0");
    const RunOutcome out = run(quick(dir / "r", 0));
    REQUIRE(out.status == 0);
    CHECK(slurp(dir / "r" / "metrics.csv") == std::string(kMetricsHeader) + "\n");
    const auto vocab = build_vocabulary({});
    CHECK(slurp(dir / "r" / "checkpoint.txt") == serialize_checkpoint(PolicyParams(vocab)));
    const Manifest m = load_manifest((dir / "r").string());
    CHECK(m.status == "complete");
    CHECK(m.artifacts.at("metrics.csv") == file_checksum((dir / "r" / "metrics.csv").string()));
    CHECK(m.dataset_header_hashes.count("train") == 1);
    CHECK(m.dataset_header_hashes.count("eval") == 1);
}

TEST_CASE("run: rerun from the manifest is bit-identical") {
    const auto dir = scratch_dir("rerun");
    const RunOutcome a = run(quick(dir / "a", 30));
    REQUIRE(a.status == 0);
    const RunOutcome b = run(config_from_manifest(load_manifest((dir / "a").string()), (dir / "b").string()));
    REQUIRE(b.status == 0);
    for (const char* f : {"metrics.csv", "checkpoint.txt", "eval_log.tsv", "train.tsv", "eval.tsv"}) {
        INFO(f);
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(a.manifest.artifacts == b.manifest.artifacts);
}

TEST_CASE("run: a mid-run fault leaves a partial manifest") {
    const auto dir = scratch_dir("partial");
    ExperimentConfig c = quick(dir / "r", 5);
    c.mode = RunMode::evaluate;
    c.checkpoint = (dir / "missing.txt").string();
    const RunOutcome out = run(c);
    CHECK(out.status == 1);
    const Manifest m = load_manifest((dir / "r").string());
    CHECK(m.status == "partial");
    CHECK(m.error.find("missing.txt") != std::string::npos);
}

TEST_CASE("run: a dataset file with other parameters is rejected") {
    const auto dir = scratch_dir("mismatch");
    TaskParams sat;
    sat.family = TaskFamily::sat;
    save_dataset((dir / "sat.tsv").string(), generate_dataset(sat, 1, 8));
    ExperimentConfig c = quick(dir / "r", 5);
    c.eval_file = (dir / "sat.tsv").string();
    CHECK(run(c).status == 1);
}

TEST_CASE("run_grid: six cells, one row, equal budgets") {
    const auto dir = scratch_dir("grid");
    ExperimentConfig c = quick(dir, 20);
    c.trainer.decode.max_response_length = 64;
    const auto manifests = run_grid(c, dir.string());
    CHECK(manifests.size() == 6);
    const ComparisonTable t = comparison_table(manifests);
    REQUIRE(t.rows.size() == 1);
    for (const auto& cell : t.rows[0].cells) CHECK(cell.has_value());
}

TEST_CASE("length ablation with the length reward disabled in both arms is null") {
    const auto dir = scratch_dir("control");
    ExperimentConfig c = quick(dir, 20);
    c.task.family = TaskFamily::sat;
    c.trainer.decode.max_response_length = 64;
    const AblationSummary s = length_ablation(c, dir.string(), true);
    REQUIRE(s.control);
    CHECK(s.control->window.accuracy == s.without_length.window.accuracy);
    CHECK(s.control->window.mean_response_length == s.without_length.window.mean_response_length);
    CHECK(s.control->eval.accuracy == s.without_length.eval.accuracy);
    CHECK(slurp(fs::path(s.control->directory) / "metrics.csv") ==
          slurp(fs::path(s.without_length.directory) / "metrics.csv"));
    CHECK(fs::exists(dir / "summary.json"));
}

// ---- default banner runs ----------------------------------------------------------------------

TEST_CASE("banner with defaults: greedy evaluation reaches 0.9") {
    const auto dir = scratch_dir("banner-eval");
    ExperimentConfig c;
    c.output_dir = (dir / "r").string();
    const RunOutcome out = run(c);
    REQUIRE(out.status == 0);
    CHECK(load_metrics_csv((dir / "r" / "metrics.csv").string()).size() == 300);
    CHECK(out.manifest.eval->accuracy >= 0.9);
}

TEST_CASE("banner with defaults: final-50 training accuracy in the CSV reaches 0.9") {
    // Training rollouts are sampled at temperature 1 under the KL penalty.
    const auto dir = scratch_dir("banner-window");
    ExperimentConfig c;
    c.output_dir = (dir / "r").string();
    REQUIRE(run(c).status == 0);
    const WindowSummary w = final_window(load_metrics_csv((dir / "r" / "metrics.csv").string()), 50);
    INFO("final-50 training accuracy " << w.accuracy);
    CHECK(w.accuracy >= 0.9);
}

TEST_CASE("banner with_think: format compliance reaches 0.95 by the end of a default run") {
    const auto dir = scratch_dir("banner-think");
    ExperimentConfig c;
    c.output_dir = (dir / "r").string();
    c.think_mode = ThinkMode::with_think;
    c.trainer.think_required = true;
    REQUIRE(run(c).status == 0);
    // Sampled rollouts of the final policy, as during training.
    auto vocab = build_vocabulary({});
    const auto train = load_dataset((dir / "r" / "train.tsv").string());
    const PolicyParams p = load_checkpoint((dir / "r" / "checkpoint.txt").string(), vocab);
    const DecodeConfig d = response_decode(*vocab, ThinkMode::with_think, c.trainer.decode);
    double fmt = 0.0;
    for (std::size_t i = 0; i < train.instances.size(); ++i) {
        const Rollout r =
            sample_response(p, templated_prompt(*vocab, train.instances[i], ThinkMode::with_think), d, i);
        fmt += format_reward(r, true);
    }
    fmt /= static_cast<double>(train.instances.size());
    const WindowSummary w = final_window(load_metrics_csv((dir / "r" / "metrics.csv").string()), 50);
    INFO("sampled format compliance " << fmt << ", final-50 mean reward " << w.mean_reward);
    CHECK(fmt >= 0.95);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coevolve/orchestrator.hpp"

using namespace coevolve;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("coevolve_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small enough to finish in seconds yet large enough to trigger one
// evolution phase with signals.
RunConfig tiny_config() {
    RunConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.group_size = 4;
    cfg.batch_size = 4;
    cfg.total_steps = 4;
    cfg.gen_frequency = 2;
    cfg.init_pool_size = 6;
    cfg.eval_tasks = 8;
    cfg.max_steps = 12;
    cfg.env_tools = 6;
    cfg.env_depth = 3;
    cfg.init_explore_steps = 8;
    cfg.init_round_budget = 5000;
    cfg.signal_budget = 4;
    cfg.explore_rounds = 2;
    cfg.policy_buckets = 4096;
    cfg.rare_min_total = 40;
    cfg.window_size = 10;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("mode names round-trip and accept both spellings") {
    CHECK(std::string(to_string(RunMode::coevolve)) == "coevolve");
    CHECK(std::string(to_string(RunMode::grpo_static)) == "grpo_static");
    CHECK(std::string(to_string(RunMode::random_explore)) == "random_explore");
    CHECK(run_mode_from_string("coevolve") == RunMode::coevolve);
    CHECK(run_mode_from_string("grpo-static") == RunMode::grpo_static);
    CHECK(run_mode_from_string("grpo_static") == RunMode::grpo_static);
    CHECK(run_mode_from_string("random-explore") == RunMode::random_explore);
    CHECK(run_mode_from_string("random_explore") == RunMode::random_explore);
    CHECK_THROWS_AS(run_mode_from_string("ppo"), std::domain_error);
}

TEST_CASE("config parsing fills defaults and validates") {
    SUBCASE("empty text keeps every default") {
        RunConfig parsed = parse_config_text("");
        RunConfig defaults;
        CHECK(json(parsed) == json(defaults));
    }
    SUBCASE("comments, blanks, and assignments") {
        RunConfig parsed = parse_config_text(
            "# a comment\n"
            "\n"
            "learning_rate = 0.25   # trailing comment\n"
            "group_size=4\n"
            "seed = 99\n"
            "rare_threshold = 2.5\n");
        CHECK(parsed.learning_rate == 0.25);
        CHECK(parsed.group_size == 4);
        CHECK(parsed.seed == 99);
        CHECK(parsed.rare_threshold == 2.5);
        CHECK(parsed.batch_size == RunConfig{}.batch_size);
    }
    SUBCASE("unknown keys name themselves") {
        try {
            parse_config_text("learning_rte = 0.1\n");
            FAIL("expected rejection");
        } catch (const std::domain_error& e) {
            CHECK(std::string(e.what()).find("learning_rte") != std::string::npos);
        }
    }
    SUBCASE("malformed values name the key") {
        try {
            parse_config_text("group_size = four\n");
            FAIL("expected rejection");
        } catch (const std::domain_error& e) {
            CHECK(std::string(e.what()).find("group_size") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_config_text("learning_rate = 1e"), std::domain_error);
        CHECK_THROWS_AS(parse_config_text("seed = -3"), std::domain_error);
        CHECK_THROWS_AS(parse_config_text("no equals sign"), std::domain_error);
    }
    SUBCASE("range violations name the key") {
        try {
            parse_config_text("group_size = 1\n");
            FAIL("expected rejection");
        } catch (const std::domain_error& e) {
            CHECK(std::string(e.what()).find("group_size") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_config_text("clip_low = 1.5"), std::domain_error);
        CHECK_THROWS_AS(parse_config_text("rare_threshold = 0"), std::domain_error);
        CHECK_THROWS_AS(parse_config_text("env_tools = 3\nenv_depth = 4"),
                        std::domain_error);
        RunConfig bad;
        bad.embed_dim = 4;
        CHECK_THROWS_AS(validate_config(bad), std::domain_error);
    }
    SUBCASE("load_config reads files and rejects missing ones") {
        fs::path dir = fresh_dir("cfg");
        fs::path file = dir / "a.conf";
        std::ofstream(file) << "total_steps = 17\n";
        CHECK(load_config(file).total_steps == 17);
        CHECK_THROWS(load_config(dir / "missing.conf"));
    }
}

TEST_CASE("a zero-step run evaluates once and writes its artifacts") {
    RunConfig cfg = tiny_config();
    cfg.total_steps = 0;
    fs::path dir = fresh_dir("zerostep");
    RunReport report = run(cfg, RunMode::grpo_static, dir);

    REQUIRE(report.eval_series.size() == 1);
    CHECK(report.eval_series[0].first == 0);
    CHECK(report.final_success == report.eval_series[0].second);
    CHECK(report.signal_series.empty());
    CHECK(report.evolution_phases == 0);
    CHECK(report.pool_series.empty());  // entries appear at evolution steps only

    CHECK(fs::exists(dir / "run.log"));
    CHECK(fs::exists(dir / "trajectories.log"));
    CHECK(fs::exists(dir / "env.json"));
    CHECK(fs::exists(dir / "pool_step_00000.json"));
    CHECK(fs::exists(dir / "policy_final.json"));
    CHECK(fs::exists(dir / "report.json") == false);  // only emit_report writes it
}

TEST_CASE("identical config and seed reproduce byte-identical artifacts") {
    RunConfig cfg = tiny_config();
    fs::path a = fresh_dir("rerun_a");
    fs::path b = fresh_dir("rerun_b");
    RunReport ra = run(cfg, RunMode::coevolve, a);
    RunReport rb = run(cfg, RunMode::coevolve, b);

    CHECK(slurp(a / "run.log") == slurp(b / "run.log"));
    CHECK(slurp(a / "trajectories.log") == slurp(b / "trajectories.log"));
    CHECK(slurp(a / "env.json") == slurp(b / "env.json"));
    CHECK(slurp(a / "policy_final.json") == slurp(b / "policy_final.json"));
    CHECK(ra.final_success == rb.final_success);
    CHECK(ra.eval_series == rb.eval_series);

    // A different seed changes the log.
    RunConfig other = cfg;
    other.seed = 8;
    fs::path c = fresh_dir("rerun_c");
    run(other, RunMode::coevolve, c);
    CHECK(slurp(a / "run.log") != slurp(c / "run.log"));
}

TEST_CASE("a full tiny run trains, signals, and evolves") {
    RunConfig cfg = tiny_config();
    fs::path dir = fresh_dir("full");
    RunReport report = run(cfg, RunMode::coevolve, dir);

    CHECK(report.eval_series.size() == static_cast<std::size_t>(cfg.total_steps) + 1);
    CHECK(report.signal_series.size() == static_cast<std::size_t>(cfg.total_steps));
    CHECK(report.evolution_phases == cfg.total_steps / cfg.gen_frequency);
    REQUIRE(report.pool_series.size() ==
            static_cast<std::size_t>(report.evolution_phases));
    CHECK(report.pool_series[0].first == cfg.gen_frequency);
    // Pools never shrink below the seeded size.
    std::size_t previous = 6;
    for (const auto& [step, size] : report.pool_series) {
        CHECK(size >= previous);
        previous = size;
    }
    long long verdicts = report.verdicts_accepted + report.verdicts_retained +
                         report.verdicts_rejected;
    CHECK(verdicts >= 0);

    // The log carries one iteration record per step, in order.
    std::ifstream in(dir / "run.log");
    std::string line;
    std::vector<int> iteration_steps;
    int phase_records = 0;
    while (std::getline(in, line)) {
        json rec = json::parse(line);
        if (rec["type"] == "iteration") iteration_steps.push_back(rec["step"]);
        if (rec["type"] == "evolution") phase_records += 1;
    }
    CHECK(iteration_steps == std::vector<int>{1, 2, 3, 4});
    CHECK(phase_records == report.evolution_phases);

    // Every trajectory line decodes.
    std::ifstream tl(dir / "trajectories.log");
    int count = 0;
    while (std::getline(tl, line)) {
        CHECK_NOTHROW(decode_trajectory(line));
        count += 1;
    }
    CHECK(count >= cfg.total_steps * cfg.batch_size * cfg.group_size);
}

TEST_CASE("static mode never evolves while random mode may") {
    RunConfig cfg = tiny_config();
    fs::path s = fresh_dir("mode_static");
    RunReport rs = run(cfg, RunMode::grpo_static, s);
    CHECK(rs.evolution_phases == 0);
    CHECK(rs.pool_series.empty());

    fs::path r = fresh_dir("mode_random");
    RunReport rr = run(cfg, RunMode::random_explore, r);
    CHECK(rr.evolution_phases == cfg.total_steps / cfg.gen_frequency);

    // Shared seeding: training is identical until the first phase step, so
    // the step-1 eval matches across all modes.
    fs::path c = fresh_dir("mode_co");
    RunReport rc = run(cfg, RunMode::coevolve, c);
    REQUIRE(rs.eval_series.size() >= 3);
    REQUIRE(rr.eval_series.size() >= 3);
    REQUIRE(rc.eval_series.size() >= 3);
    for (std::size_t i = 0; i < 3; ++i) {  // steps 0, 1, 2 precede divergence
        CHECK(rs.eval_series[i] == rr.eval_series[i]);
        CHECK(rs.eval_series[i] == rc.eval_series[i]);
    }
}

TEST_CASE("report emission recomputes series from the log") {
    RunConfig cfg = tiny_config();
    fs::path dir = fresh_dir("report");
    RunReport report = run(cfg, RunMode::coevolve, dir);
    json rep = emit_report(dir / "run.log");

    CHECK(fs::exists(dir / "report.json"));
    CHECK(rep["warnings"].empty());
    CHECK(rep["mode"] == "coevolve");
    REQUIRE(rep["success_series"].size() == report.eval_series.size());
    CHECK(rep["success_series"].back()["success"] == report.final_success);
    CHECK(rep["signal_series"].size() == report.signal_series.size());
    // The embedding series re-reads every snapshot: the seeded pool plus one
    // entry per evolution phase.
    REQUIRE(rep["pool_embedding_series"].size() == report.pool_series.size() + 1);
    CHECK(rep["pool_embedding_series"][0]["step"] == 0);
    CHECK(rep["pool_embedding_series"][0]["size"] == 6);
    for (std::size_t i = 0; i < report.pool_series.size(); ++i) {
        const json& entry = rep["pool_embedding_series"][i + 1];
        CHECK(entry["step"] == report.pool_series[i].first);
        CHECK(entry["size"] == report.pool_series[i].second);
        REQUIRE_FALSE(entry["embeddings"].empty());
        CHECK(entry["embeddings"][0].size() ==
              static_cast<std::size_t>(cfg.embed_dim));
    }
    // Verdict tallies recompute to the same totals the run reported.
    long long accepted = 0;
    for (const auto& phase : rep["pass_rate_series"]) {
        accepted += phase["accepted"].get<long long>();
    }
    CHECK(accepted == report.verdicts_accepted);

    // A custom output path is honored.
    fs::path alt = dir / "alt_report.json";
    emit_report(dir / "run.log", alt);
    CHECK(fs::exists(alt));
    CHECK(slurp(alt) == slurp(dir / "report.json"));
}

TEST_CASE("a truncated log yields a partial report with a warning") {
    RunConfig cfg = tiny_config();
    cfg.total_steps = 2;
    fs::path dir = fresh_dir("truncated");
    run(cfg, RunMode::grpo_static, dir);

    std::string full = slurp(dir / "run.log");
    // Cut mid-line to simulate a crashed run.
    std::string cut = full.substr(0, full.size() * 2 / 3);
    fs::path broken = dir / "broken.log";
    std::ofstream(broken) << cut;

    json rep = emit_report(broken, dir / "broken_report.json");
    REQUIRE_FALSE(rep["warnings"].empty());
    std::string w = rep["warnings"][0].get<std::string>();
    CHECK(w.find("truncated or corrupt") != std::string::npos);
    // What was readable is still reported.
    CHECK(rep["success_series"].size() >= 1);

    CHECK_THROWS(emit_report(dir / "does_not_exist.log"));
}

// End-to-end acceptance suite. Each criterion prints exactly one line,
//   criterion N: PASS — detail   or   criterion N: FAIL — detail
// and the process exits nonzero if any criterion fails. Tolerances and run
// configurations are pinned here, not read from anywhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coevolve/env.hpp"
#include "coevolve/metrics.hpp"
#include "coevolve/orchestrator.hpp"
#include "coevolve/policy.hpp"
#include "coevolve/prompts.hpp"
#include "coevolve/rng.hpp"
#include "coevolve/signals.hpp"
#include "coevolve/synthesis.hpp"
#include "coevolve/taskpool.hpp"

using namespace coevolve;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL")
              << " — " << detail << "\n"
              << std::flush;
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: the incremental signal extractor against a from-scratch
// re-scan that keeps complete score lists and a rebuilt pattern multiset.
// ---------------------------------------------------------------------------
Trajectory make_traj(const std::string& task, const std::string& id, double score,
                     std::vector<std::string> tools, int train_step) {
    Trajectory t;
    t.traj_id = id;
    t.task_id = task;
    t.score = score;
    t.raw_reward = score;
    t.train_step = train_step;
    t.terminated_by = score >= 1.0 ? Termination::goal : Termination::step_limit;
    if (t.terminated_by == Termination::step_limit) t.raw_reward = 0.0;
    int i = 0;
    for (auto& tool : tools) {
        t.steps.push_back(Step{{std::move(tool), {}}, "obs", i});
        ++i;
    }
    return t;
}

struct NaiveState {
    int window;
    int n;
    double theta;
    long long n_min;
    std::map<std::string, std::vector<double>> scores;
    std::map<Pattern, long long> counts;
    long long total = 0;
};

std::vector<Pattern> naive_ngrams(const Trajectory& t, int n) {
    std::vector<std::string> tools;
    for (const auto& s : t.steps) tools.push_back(s.action.tool);
    if (static_cast<int>(tools.size()) < n) return {tools};
    std::vector<Pattern> out;
    for (int i = 0; i + n <= static_cast<int>(tools.size()); ++i) {
        out.push_back(Pattern(tools.begin() + i, tools.begin() + i + n));
    }
    return out;
}

std::vector<SignalAnnotation> naive_extract(
    const std::vector<std::vector<Trajectory>>& groups, NaiveState& st) {
    std::vector<SignalAnnotation> out;
    for (const auto& group : groups) {
        // Forgetting against the history as it stood before this group.
        for (const auto& t : group) {
            const auto& all = st.scores[t.task_id];
            int lo = std::max(0, static_cast<int>(all.size()) - st.window);
            double witness = -1.0;
            for (int i = lo; i < static_cast<int>(all.size()); ++i) {
                double s = all[static_cast<std::size_t>(i)];
                if (s >= 0.5 && s > witness) witness = s;
            }
            if (t.score < 0.5 && witness >= 0.0) {
                out.push_back({SignalKind::forgetting, t.traj_id, t.task_id,
                               ForgettingEvidence{witness, t.score}, t.train_step});
            }
        }
        for (const auto& t : group) st.scores[t.task_id].push_back(t.score);

        // Boundary: first strict success and first strict failure by position.
        int si = -1;
        int fi = -1;
        for (int i = 0; i < static_cast<int>(group.size()); ++i) {
            if (si < 0 && group[static_cast<std::size_t>(i)].score > 0.5) si = i;
            if (fi < 0 && group[static_cast<std::size_t>(i)].score < 0.5) fi = i;
        }
        if (si >= 0 && fi >= 0) {
            BoundaryEvidence ev{si, fi, group[static_cast<std::size_t>(si)].score,
                                group[static_cast<std::size_t>(fi)].score};
            for (const auto& t : group) {
                out.push_back({SignalKind::boundary, t.traj_id, t.task_id, ev,
                               t.train_step});
            }
        }

        // Count every pattern first, then hunt each trajectory's rarest
        // qualifying one (lowest count, then lexicographically smallest).
        for (const auto& t : group) {
            auto pats = naive_ngrams(t, st.n);
            for (const auto& p : pats) {
                st.counts[p] += 1;
                st.total += 1;
            }
            if (st.total < st.n_min) continue;
            std::optional<Pattern> best;
            long long best_count = 0;
            for (const auto& p : pats) {
                long long c = st.counts.count(p) ? st.counts.at(p) : 0;
                if (c <= 0) continue;
                if (100.0 * static_cast<double>(c) /
                        static_cast<double>(st.total) >=
                    st.theta) {
                    continue;
                }
                if (!best || c < best_count || (c == best_count && p < *best)) {
                    best = p;
                    best_count = c;
                }
            }
            if (best) {
                out.push_back({SignalKind::rare, t.traj_id, t.task_id,
                               RareEvidence{*best, best_count, st.total},
                               t.train_step});
            }
        }
    }
    return out;
}

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> score_menu = {0.0, 0.2, 0.5, 0.7, 1.0};
    const std::vector<std::string> tool_menu = {"t0", "t1", "t2", "t3", "t4"};
    long long streams_ok = 0;
    long long annotations = 0;
    std::string first_mismatch;

    for (std::uint64_t stream = 0; stream < 1000; ++stream) {
        auto g = rng::make_engine(90000 + stream);
        SignalState state;
        state.window = 2 + static_cast<int>(rng::uniform_index(g, 5));
        state.pattern_length = 1 + static_cast<int>(rng::uniform_index(g, 3));
        state.rare_threshold = 5.0 + 5.0 * static_cast<double>(rng::uniform_index(g, 4));
        state.rare_min_total = 10 + 10 * static_cast<long long>(rng::uniform_index(g, 4));
        NaiveState naive{state.window, state.pattern_length, state.rare_threshold,
                         state.rare_min_total, {}, {}, 0};

        bool stream_ok = true;
        int id = 0;
        for (int step = 1; step <= 8 && stream_ok; ++step) {
            std::vector<std::vector<Trajectory>> groups;
            int n_groups = 1 + static_cast<int>(rng::uniform_index(g, 3));
            for (int gi = 0; gi < n_groups; ++gi) {
                std::string task = "task_" + std::to_string(rng::uniform_index(g, 6));
                int k = 2 + static_cast<int>(rng::uniform_index(g, 4));
                std::vector<Trajectory> group;
                for (int i = 0; i < k; ++i) {
                    double score = score_menu[rng::uniform_index(g, score_menu.size())];
                    std::vector<std::string> tools;
                    int len = static_cast<int>(rng::uniform_index(g, 6));
                    for (int s = 0; s < len; ++s) {
                        tools.push_back(tool_menu[rng::uniform_index(g, tool_menu.size())]);
                    }
                    group.push_back(make_traj(
                        task, task + "#" + std::to_string(id++), score, tools, step));
                }
                groups.push_back(std::move(group));
            }
            auto got = extract_signals(groups, state);
            auto want = naive_extract(groups, naive);
            if (got != want) {
                stream_ok = false;
                if (first_mismatch.empty()) {
                    first_mismatch = "stream " + std::to_string(stream) + " step " +
                                     std::to_string(step) + " (" +
                                     std::to_string(got.size()) + " vs " +
                                     std::to_string(want.size()) + " annotations)";
                }
            }
            annotations += static_cast<long long>(want.size());
        }
        if (stream_ok && state.patterns.total != naive.total) {
            stream_ok = false;
            if (first_mismatch.empty()) {
                first_mismatch = "stream " + std::to_string(stream) + " pattern total";
            }
        }
        if (stream_ok) ++streams_ok;
    }

    double secs = seconds_since(t0);
    bool pass = streams_ok == 1000 && secs < 10.0;
    std::string detail = std::to_string(streams_ok) +
                         "/1000 streams exactly equal the naive re-scan (" +
                         std::to_string(annotations) + " annotations, " +
                         fmt(secs) + " s)";
    if (!first_mismatch.empty()) detail += "; first mismatch at " + first_mismatch;
    report(1, pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic gradient vs central finite differences.
// ---------------------------------------------------------------------------
Policy random_policy(std::size_t buckets, std::size_t actions, double temperature,
                     std::uint64_t seed, double spread) {
    Policy p = Policy::make(buckets, actions, temperature);
    auto g = rng::make_engine(seed);
    for (auto& v : p.logits) v = (rng::uniform01(g) - 0.5) * 2.0 * spread;
    return p;
}

GroupBatch fabricate_batch(const PolicySnapshot& old_policy, double temperature,
                           std::uint64_t seed, double epsilon) {
    auto g = rng::make_engine(seed);
    GroupBatch batch;
    int k = 2 + static_cast<int>(rng::uniform_index(g, 3));
    const std::vector<double> reward_menu = {0.0, 0.3, 1.0};
    for (int i = 0; i < k; ++i) {
        int steps = 1 + static_cast<int>(rng::uniform_index(g, 5));
        std::vector<StepStat> stats;
        for (int s = 0; s < steps; ++s) {
            StepStat st;
            st.bucket = rng::uniform_index(g, old_policy.bucket_count);
            st.action = rng::uniform_index(g, old_policy.action_count);
            st.logp_old = old_policy.log_prob(st.bucket, st.action, temperature);
            stats.push_back(st);
        }
        Trajectory t;
        t.traj_id = "fab" + std::to_string(i);
        t.task_id = "fab";
        t.group_index = i;
        batch.trajectories.push_back(std::move(t));
        batch.step_stats.push_back(std::move(stats));
        batch.rewards.push_back(reward_menu[rng::uniform_index(g, reward_menu.size())]);
    }
    bool flat = true;
    for (double r : batch.rewards) flat = flat && r == batch.rewards[0];
    if (flat) batch.rewards[0] = batch.rewards[0] < 0.5 ? 1.0 : 0.0;
    batch.advantages = group_advantages(batch.rewards, epsilon);
    return batch;
}

void criterion_2() {
    auto t0 = std::chrono::steady_clock::now();
    const double h = 1e-5;
    const double tol = 1e-5;  // relative, with a 1e-3 absolute floor
    double worst = 0.0;
    long long coords = 0;
    int configs = 0;

    for (std::uint64_t trial = 0; trial < 24; ++trial) {
        RunConfig cfg;
        cfg.rollout_temperature = trial % 3 == 0 ? 0.7 : (trial % 3 == 1 ? 0.9 : 1.3);
        cfg.clip_low = trial % 2 == 0 ? 0.2 : 0.1;
        cfg.clip_high = trial % 2 == 0 ? 0.28 : 0.1;
        cfg.kl_coeff = trial % 4 == 0 ? 0.0 : 0.05;

        Policy old = random_policy(6, 4, cfg.rollout_temperature, 1000 + trial, 1.0);
        Policy ref = random_policy(6, 4, cfg.rollout_temperature, 2000 + trial, 1.0);
        Policy cur = random_policy(6, 4, cfg.rollout_temperature, 3000 + trial, 1.5);

        GroupBatch batch =
            fabricate_batch(old, cfg.rollout_temperature, 4000 + trial, cfg.adv_epsilon);
        GradientMap grad = grpo_gradient(batch, cur, ref, cfg);

        for (const auto& [coord, g] : grad) {
            Policy plus = cur;
            plus.at(coord.first, coord.second) += h;
            Policy minus = cur;
            minus.at(coord.first, coord.second) -= h;
            double numeric = (grpo_objective(batch, plus, ref, cfg) -
                              grpo_objective(batch, minus, ref, cfg)) /
                             (2.0 * h);
            double rel = std::abs(g - numeric) / std::max(1e-3, std::abs(numeric));
            worst = std::max(worst, rel);
            ++coords;
        }
        ++configs;
    }

    double secs = seconds_since(t0);
    bool pass = configs >= 20 && worst <= tol && secs < 5.0;
    report(2, pass,
           std::to_string(configs) + " configurations, " + std::to_string(coords) +
               " coordinates, max relative error " + fmt(worst) + " (tol " +
               fmt(tol) + ", " + fmt(secs) + " s)");
}

// ---------------------------------------------------------------------------
// Criteria 3/4/7/8 share the full-run machinery.
// ---------------------------------------------------------------------------
RunConfig smoke_config() {
    RunConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.group_size = 8;
    cfg.batch_size = 4;
    cfg.total_steps = 200;
    cfg.gen_frequency = 50;
    cfg.init_pool_size = 6;
    cfg.eval_tasks = 8;
    cfg.max_steps = 9;
    cfg.env_tools = 5;
    cfg.env_depth = 3;
    cfg.init_explore_steps = 9;
    cfg.init_round_budget = 5000;
    cfg.policy_buckets = 4096;
    cfg.signal_budget = 4;
    cfg.seed = 11;
    return cfg;
}

RunConfig loop_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.group_size = 8;
    cfg.batch_size = 8;
    cfg.total_steps = 60;
    cfg.gen_frequency = 10;
    cfg.init_pool_size = 12;
    cfg.eval_tasks = 48;
    cfg.max_steps = 12;
    cfg.env_tools = 15;
    cfg.env_depth = 4;
    cfg.init_explore_steps = 12;
    cfg.init_round_budget = 50000;
    cfg.policy_buckets = 65536;
    cfg.signal_budget = 4;
    cfg.explore_rounds = 3;
    cfg.explore_noise = 0.25;
    cfg.dedup_threshold = 0.95;
    cfg.seed = seed;
    return cfg;
}

void criterion_3(const fs::path& work) {
    auto t0 = std::chrono::steady_clock::now();
    RunReport rep = run(smoke_config(), RunMode::grpo_static, work / "smoke");
    double secs = seconds_since(t0);

    double first = rep.eval_series.empty() ? 1.0 : rep.eval_series.front().second;
    int reached_at = -1;
    for (const auto& [step, s] : rep.eval_series) {
        if (s >= 0.9) {
            reached_at = step;
            break;
        }
    }
    bool pass = first < 0.2 && reached_at >= 0 && reached_at <= 200 &&
                rep.final_success >= 0.9 && secs < 60.0;
    report(3, pass,
           "held-out success " + fmt(first) + " at step 0, >= 0.9 from step " +
               std::to_string(reached_at) + ", final " + fmt(rep.final_success) +
               " (" + fmt(secs) + " s)");
}

struct LoopRuns {
    // reports[mode][seed_index], seeds pinned to {1, 2, 3}
    std::map<RunMode, std::vector<RunReport>> reports;
    fs::path coevolve_seed1_dir;
    double coevolve_seed1_secs = 0.0;
    bool within_budget = false;
};

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

LoopRuns criterion_4(const fs::path& work) {
    auto t0 = std::chrono::steady_clock::now();
    LoopRuns out;
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    const std::vector<RunMode> modes = {RunMode::coevolve, RunMode::random_explore,
                                        RunMode::grpo_static};
    std::map<RunMode, std::vector<double>> finals;
    for (RunMode mode : modes) {
        for (std::uint64_t seed : seeds) {
            fs::path dir = work / (std::string(to_string(mode)) + "_" +
                                   std::to_string(seed));
            auto r0 = std::chrono::steady_clock::now();
            RunReport rep = run(loop_config(seed), mode, dir);
            double rs = seconds_since(r0);
            if (mode == RunMode::coevolve && seed == 1) {
                out.coevolve_seed1_dir = dir;
                out.coevolve_seed1_secs = rs;
            }
            finals[mode].push_back(rep.final_success);
            out.reports[mode].push_back(std::move(rep));
        }
    }
    double secs = seconds_since(t0);

    double med_co = median3(finals[RunMode::coevolve]);
    double med_rand = median3(finals[RunMode::random_explore]);
    double med_static = median3(finals[RunMode::grpo_static]);
    out.within_budget = secs < 900.0;
    bool pass = med_co > med_rand && med_rand >= med_static &&
                med_co - med_static >= 0.05 && out.within_budget;

    auto triple = [&](RunMode m) {
        std::string s;
        for (double v : finals[m]) s += (s.empty() ? "" : "/") + fmt(v);
        return s;
    };
    report(4, pass,
           "median final success coevolve " + fmt(med_co) + " (" +
               triple(RunMode::coevolve) + ") > random_explore " + fmt(med_rand) +
               " (" + triple(RunMode::random_explore) + ") >= grpo_static " +
               fmt(med_static) + " (" + triple(RunMode::grpo_static) +
               "), gap " + fmt(med_co - med_static) + " >= 0.05 (" + fmt(secs) +
               " s)");
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 5: the validation gate never lets a rejected pair into the pool,
// and every pooled synthesized task carries an admitting verdict.
// ---------------------------------------------------------------------------
std::vector<ActionToken> mutate_oracle(std::vector<ActionToken> actions,
                                       const std::vector<std::string>& tools,
                                       int kind, std::mt19937_64& g) {
    switch (kind) {
        case 0:  // exact oracle: solvable
            break;
        case 1:  // truncated: cannot finish
            if (!actions.empty()) actions.pop_back();
            break;
        case 2: {  // random walk over valid tool names
            actions.clear();
            std::size_t len = rng::uniform_index(g, 8);
            for (std::size_t i = 0; i < len; ++i) {
                actions.push_back({tools[rng::uniform_index(g, tools.size())], {}});
            }
            break;
        }
        case 3:  // unknown tool in the middle: execution error
            actions.insert(actions.begin() + static_cast<long>(actions.size() / 2),
                           {"tool_bogus", {}});
            break;
        default:  // empty sequence
            actions.clear();
            break;
    }
    return actions;
}

void criterion_5(const LoopRuns& loop) {
    auto t0 = std::chrono::steady_clock::now();
    EnvSpec env = generate_env(123, 10, 4);
    std::vector<std::string> tool_names;
    for (const auto& t : env.tools) tool_names.push_back(t.name);
    std::vector<std::string> goal_ids;
    for (const auto& [gid, res] : env.goals) goal_ids.push_back(gid);
    std::map<std::string, std::vector<ActionToken>> oracles;
    for (const auto& gid : goal_ids) {
        auto sol = oracle_solve(env, gid);
        if (!sol) {
            report(5, false, "oracle could not solve " + gid);
            return;
        }
        oracles[gid] = *sol;
    }

    // Grades a replayed prefix: full oracle match succeeds, a partial match
    // accrues proportional reward, anything else earns nothing. Exercises the
    // retain-on-reward branch deterministically.
    TaskExecutor graded = [&oracles](const EnvSpec& spec,
                                     const TaskSolutionPair& pair) {
        (void)spec;
        auto it = oracles.find(pair.goal_id);
        if (it == oracles.end()) throw std::runtime_error("unknown goal");
        const auto& oracle = it->second;
        std::size_t match = 0;
        while (match < oracle.size() && match < pair.action_sequence.size() &&
               pair.action_sequence[match].tool == oracle[match].tool) {
            ++match;
        }
        ExecutionResult res;
        res.success = match == oracle.size() &&
                      pair.action_sequence.size() == oracle.size();
        res.cumulative_reward =
            res.success ? 1.0
                        : static_cast<double>(match) /
                              static_cast<double>(oracle.size());
        return res;
    };

    auto g = rng::make_engine(4242);
    TaskPool pool(default_embedder(32, 5), 0.98,
                  SignalState{10, 3, 5.0, 100, {}, {}});
    std::map<std::string, VerdictKind> verdict_of;
    std::vector<TaskSolutionPair> admissible;
    long long rejected = 0;
    long long retained = 0;
    TaskExecutor replay = replay_executor(16);

    for (int i = 0; i < 500; ++i) {
        const std::string& gid = goal_ids[rng::uniform_index(g, goal_ids.size())];
        int kind = static_cast<int>(rng::uniform_index(g, 5));
        TaskSolutionPair pair;
        pair.goal_id = gid;
        pair.source_task_id = "fuzz_src";
        pair.action_sequence = mutate_oracle(oracles[gid], tool_names, kind, g);
        pair.query = "fuzz case " + std::to_string(i) + " kind " +
                     std::to_string(kind) + " goal " + gid;
        // Half the cases run the literal replay gate, half the graded gate.
        Verdict v = validate_task(pair, env, i % 2 == 0 ? replay : graded);
        verdict_of[pair.query] = v.kind;
        if (v.kind == VerdictKind::reject) {
            ++rejected;
        } else {
            if (v.kind == VerdictKind::retain_by_reward) ++retained;
            admissible.push_back(std::move(pair));
        }
    }
    EvolutionResult evo = evolve_pool(admissible, pool, 1, env.seed);

    std::set<std::string> pooled_queries;
    for (const auto& entry : pool.snapshot()) {
        pooled_queries.insert(entry.at("query").get<std::string>());
    }
    long long leaked = 0;
    for (const auto& [query, kind] : verdict_of) {
        if (kind == VerdictKind::reject && pooled_queries.count(query)) ++leaked;
    }
    long long unvouched = 0;
    for (const auto& q : pooled_queries) {
        auto it = verdict_of.find(q);
        if (it == verdict_of.end() || it->second == VerdictKind::reject) ++unvouched;
    }
    bool counts_ok = evo.appended.size() + static_cast<std::size_t>(evo.duplicates) ==
                     admissible.size();

    // Audit a real run log the same way: every synthesized task in the final
    // pool snapshot must have a logged admitting verdict for its query.
    long long audited = 0;
    long long unlogged = 0;
    std::map<std::string, std::string> logged_verdict;
    std::string last_snapshot_name;
    {
        std::ifstream in(loop.coevolve_seed1_dir / "run.log");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json rec = json::parse(line);
            std::string type = rec.value("type", "");
            if (type == "verdict") {
                logged_verdict[rec.at("query").get<std::string>()] =
                    rec.at("verdict").get<std::string>();
            } else if (type == "evolution") {
                last_snapshot_name = rec.at("snapshot").get<std::string>();
            }
        }
    }
    if (!last_snapshot_name.empty()) {
        json snap = json::parse(slurp(loop.coevolve_seed1_dir / last_snapshot_name));
        for (const auto& entry : snap) {
            if (entry.at("origin").get<std::string>() != "synthesized") continue;
            ++audited;
            auto it = logged_verdict.find(entry.at("query").get<std::string>());
            if (it == logged_verdict.end() ||
                !(it->second == "accept" || it->second == "retain_by_reward")) {
                ++unlogged;
            }
        }
    }

    double secs = seconds_since(t0);
    bool pass = leaked == 0 && unvouched == 0 && counts_ok && rejected > 0 &&
                retained > 0 && !last_snapshot_name.empty() && unlogged == 0 &&
                secs < 30.0;
    report(5, pass,
           "500 fuzzed pairs (" + std::to_string(rejected) + " rejected, " +
               std::to_string(retained) + " retained-by-reward): " +
               std::to_string(leaked) + " rejected leaks, " +
               std::to_string(unvouched) + " unvouched pool entries; run-log audit " +
               std::to_string(audited) + " synthesized tasks, " +
               std::to_string(unlogged) + " without an admitting verdict (" +
               fmt(secs) + " s)");
}

// ---------------------------------------------------------------------------
// Criterion 6: metric implementations against brute-force and hand values.
// ---------------------------------------------------------------------------
std::vector<Vec> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    auto g = rng::make_engine(seed);
    std::vector<Vec> out(n, Vec(dim));
    for (auto& v : out) {
        for (auto& x : v) x = (rng::uniform01(g) - 0.5) * 4.0;
    }
    return out;
}

double brute_sr_at_k(const std::vector<Vec>& points, int k) {
    double outer = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> sims;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            sims.emplace_back(cosine_similarity(points[i], points[j]), j);
        }
        std::stable_sort(sims.begin(), sims.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        double inner = 0.0;
        for (int t = 0; t < k; ++t) inner += sims[static_cast<std::size_t>(t)].first;
        outer += inner / k;
    }
    return outer / static_cast<double>(points.size());
}

void criterion_6() {
    auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-12;
    double worst_sr = 0.0;
    auto points = random_points(50, 8, 60);
    for (int k : {1, 3, 5, 10, 49}) {
        worst_sr = std::max(worst_sr,
                            std::abs(sr_at_k(points, k) - brute_sr_at_k(points, k)));
    }

    std::vector<Vec> x = {{0.0}, {2.0}};
    std::vector<Vec> y = {{1.0}, {1.0}};
    double worst_ed = std::abs(energy_distance(x, y) - 1.0);
    worst_ed = std::max(worst_ed, std::abs(ed_rel(x, y) - 0.5));
    worst_ed = std::max(worst_ed, std::abs(energy_distance(x, x)));
    bool degenerate_throws = false;
    try {
        ed_rel({{0.0}}, y);
    } catch (const std::domain_error&) {
        degenerate_throws = true;
    }

    double secs = seconds_since(t0);
    bool pass = worst_sr <= tol && worst_ed <= tol && degenerate_throws && secs < 5.0;
    report(6, pass,
           "sr_at_k max dev " + fmt(worst_sr) + " over 50 points, energy-distance max dev " +
               fmt(worst_ed) + " on hand values, single-point baseline " +
               (degenerate_throws ? "rejected" : "ACCEPTED") + " (tol " + fmt(tol) +
               ", " + fmt(secs) + " s)");
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical rerun of a full coevolve run.
// ---------------------------------------------------------------------------
std::optional<fs::path> last_pool_snapshot(const fs::path& dir) {
    std::optional<fs::path> best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("pool_step_", 0) != 0) continue;
        if (!best || name > best->filename().string()) best = entry.path();
    }
    return best;
}

void criterion_7(const fs::path& work, const LoopRuns& loop) {
    auto t0 = std::chrono::steady_clock::now();
    fs::path dir = work / "rerun_coevolve_1";
    run(loop_config(1), RunMode::coevolve, dir);
    double secs = seconds_since(t0);

    bool log_equal = slurp(dir / "run.log") ==
                     slurp(loop.coevolve_seed1_dir / "run.log");
    auto snap_a = last_pool_snapshot(loop.coevolve_seed1_dir);
    auto snap_b = last_pool_snapshot(dir);
    bool snap_equal = snap_a && snap_b &&
                      snap_a->filename() == snap_b->filename() &&
                      slurp(*snap_a) == slurp(*snap_b);
    // Budget: one extra run, so at most twice the first one (plus scheduler
    // slack).
    bool in_budget = secs <= 2.0 * loop.coevolve_seed1_secs + 1.0;

    report(7, log_equal && snap_equal && in_budget,
           std::string("run.log ") + (log_equal ? "byte-identical" : "DIFFERS") +
               ", final pool snapshot " + (snap_equal ? "byte-identical" : "DIFFERS") +
               " (" + fmt(secs) + " s vs first run " +
               fmt(loop.coevolve_seed1_secs) + " s)");
}

// ---------------------------------------------------------------------------
// Criterion 8: signal totals decline from the first evolution window to the
// last in at least 2 of the 3 coevolve runs.
// ---------------------------------------------------------------------------
void criterion_8(const LoopRuns& loop) {
    const int window = 10;  // gen_frequency of the loop config
    int declining = 0;
    std::string detail;
    const auto& reports = loop.reports.at(RunMode::coevolve);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& series = reports[i].signal_series;
        long long first = 0;
        long long last = 0;
        for (const auto& c : series) {
            if (c.step <= window) first += c.total();
            if (c.step > static_cast<int>(series.size()) - window) last += c.total();
        }
        bool ok = last <= first;
        if (ok) ++declining;
        if (!detail.empty()) detail += ", ";
        detail += "seed " + std::to_string(i + 1) + ": " + std::to_string(first) +
                  " -> " + std::to_string(last) + (ok ? "" : " (rose)");
    }
    report(8, declining >= 2,
           "final-window signal totals <= first-window in " +
               std::to_string(declining) + "/3 coevolve runs (" + detail + ")");
}

// ---------------------------------------------------------------------------
// Criterion 9: embedded templates byte-match the asset files, and rendering
// touches nothing outside the placeholder sites.
// ---------------------------------------------------------------------------
void criterion_9() {
    auto t0 = std::chrono::steady_clock::now();
    int files_ok = 0;
    int renders_ok = 0;
    int total = 0;
    std::string first_bad;

    for (const auto& [name, embedded] : prompts::all_templates()) {
        ++total;
        std::string on_disk = slurp(fs::path(COEVOLVE_ASSETS_DIR) / name);
        bool file_ok = on_disk == std::string(embedded);
        if (file_ok) ++files_ok;

        // Discover the placeholder sites, then substitute sentinels both via
        // the library and via an independent left-to-right splice.
        std::set<std::string> keys;
        std::regex site("\\{([a-z0-9_]+)\\}");
        for (auto it = std::sregex_iterator(on_disk.begin(), on_disk.end(), site);
             it != std::sregex_iterator(); ++it) {
            keys.insert((*it)[1].str());
        }
        std::map<std::string, std::string> values;
        int n = 0;
        for (const auto& k : keys) values[k] = "<<S" + std::to_string(n++) + ">>";

        std::string expected = on_disk;
        for (const auto& [k, v] : values) {
            std::string ph = "{" + k + "}";
            std::size_t pos = expected.find(ph);
            while (pos != std::string::npos) {
                expected.replace(pos, ph.size(), v);
                pos = expected.find(ph, pos + v.size());
            }
        }
        bool render_ok = prompts::render_template(embedded, values) == expected;
        if (render_ok) ++renders_ok;
        if ((!file_ok || !render_ok) && first_bad.empty()) first_bad = name;
    }

    double secs = seconds_since(t0);
    bool pass = total == 9 && files_ok == total && renders_ok == total && secs < 1.0;
    std::string detail = std::to_string(files_ok) + "/" + std::to_string(total) +
                         " asset files byte-identical, " +
                         std::to_string(renders_ok) + "/" + std::to_string(total) +
                         " renders exact outside placeholder sites (" + fmt(secs) +
                         " s)";
    if (!first_bad.empty()) detail += "; first failure: " + first_bad;
    report(9, pass, detail);
}

}  // namespace

int main() {
    fs::path work = fs::temp_directory_path() / "coevolve_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    criterion_1();
    criterion_2();
    criterion_3(work);
    LoopRuns loop = criterion_4(work);
    criterion_5(loop);
    criterion_6();
    criterion_7(work, loop);
    criterion_8(loop);
    criterion_9();

    if (failures == 0) {
        std::cout << "all 9 criteria passed\n";
    } else {
        std::cout << failures << " criteria failed\n";
    }
    return failures == 0 ? 0 : 1;
}

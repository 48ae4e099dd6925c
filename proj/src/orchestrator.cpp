#include "coevolve/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "coevolve/env.hpp"
#include "coevolve/metrics.hpp"
#include "coevolve/policy.hpp"
#include "coevolve/rng.hpp"
#include "coevolve/signals.hpp"
#include "coevolve/synthesis.hpp"
#include "coevolve/taskpool.hpp"

namespace coevolve {

namespace fs = std::filesystem;

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::coevolve: return "coevolve";
        case RunMode::grpo_static: return "grpo_static";
        case RunMode::random_explore: return "random_explore";
    }
    throw std::domain_error("unknown run mode");
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "coevolve") return RunMode::coevolve;
    if (s == "grpo_static" || s == "grpo-static") return RunMode::grpo_static;
    if (s == "random_explore" || s == "random-explore") return RunMode::random_explore;
    throw std::domain_error("unknown run mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::domain_error("config key '" + key + "': cannot parse value '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (used != value.size()) bad_value(key, value);
    return v;
}

long long parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (used != value.size()) bad_value(key, value);
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (used != value.size() || (!value.empty() && value[0] == '-')) bad_value(key, value);
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& config_setters() {
    auto dbl = [](double RunConfig::*field) {
        return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = parse_double(k, v);
        });
    };
    auto num = [](int RunConfig::*field) {
        return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
            long long x = parse_int(k, v);
            if (x < INT_MIN || x > INT_MAX) bad_value(k, v);
            c.*field = static_cast<int>(x);
        });
    };
    static const std::map<std::string, Setter> setters = {
        {"learning_rate", dbl(&RunConfig::learning_rate)},
        {"group_size", num(&RunConfig::group_size)},
        {"batch_size", num(&RunConfig::batch_size)},
        {"clip_low", dbl(&RunConfig::clip_low)},
        {"clip_high", dbl(&RunConfig::clip_high)},
        {"kl_coeff", dbl(&RunConfig::kl_coeff)},
        {"rollout_temperature", dbl(&RunConfig::rollout_temperature)},
        {"max_steps", num(&RunConfig::max_steps)},
        {"window_size", num(&RunConfig::window_size)},
        {"rare_threshold", dbl(&RunConfig::rare_threshold)},
        {"rare_min_total",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.rare_min_total = parse_int(k, v);
         }},
        {"init_pool_size", num(&RunConfig::init_pool_size)},
        {"gen_frequency", num(&RunConfig::gen_frequency)},
        {"total_steps", num(&RunConfig::total_steps)},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = parse_u64(k, v);
         }},
        {"dedup_threshold", dbl(&RunConfig::dedup_threshold)},
        {"adv_epsilon", dbl(&RunConfig::adv_epsilon)},
        {"env_tools", num(&RunConfig::env_tools)},
        {"env_depth", num(&RunConfig::env_depth)},
        {"pattern_length", num(&RunConfig::pattern_length)},
        {"explore_rounds", num(&RunConfig::explore_rounds)},
        {"explore_steps", num(&RunConfig::explore_steps)},
        {"explore_noise", dbl(&RunConfig::explore_noise)},
        {"init_explore_steps", num(&RunConfig::init_explore_steps)},
        {"init_round_budget", num(&RunConfig::init_round_budget)},
        {"signal_budget", num(&RunConfig::signal_budget)},
        {"eval_tasks", num(&RunConfig::eval_tasks)},
        {"policy_buckets", num(&RunConfig::policy_buckets)},
        {"embed_dim", num(&RunConfig::embed_dim)},
        {"sr_k", num(&RunConfig::sr_k)},
        {"hist_bins", num(&RunConfig::hist_bins)},
    };
    return setters;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::domain_error("config line " + std::to_string(line_no) +
                                    ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = config_setters().find(key);
        if (it == config_setters().end()) {
            throw std::domain_error("config line " + std::to_string(line_no) +
                                    ": unknown key '" + key + "'");
        }
        if (value.empty()) bad_value(key, value);
        it->second(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void validate_config(const RunConfig& cfg) {
    auto require = [](bool ok, const std::string& key, const std::string& constraint) {
        if (!ok) throw std::domain_error("config key '" + key + "': must be " + constraint);
    };
    require(std::isfinite(cfg.learning_rate) && cfg.learning_rate > 0.0, "learning_rate",
            "finite and > 0");
    require(cfg.group_size >= 2, "group_size", ">= 2");
    require(cfg.batch_size >= 1, "batch_size", ">= 1");
    require(cfg.clip_low > 0.0 && cfg.clip_low < 1.0, "clip_low", "in (0, 1)");
    require(std::isfinite(cfg.clip_high) && cfg.clip_high > 0.0, "clip_high",
            "finite and > 0");
    require(std::isfinite(cfg.kl_coeff) && cfg.kl_coeff >= 0.0, "kl_coeff",
            "finite and >= 0");
    require(std::isfinite(cfg.rollout_temperature) && cfg.rollout_temperature > 0.0,
            "rollout_temperature", "finite and > 0");
    require(cfg.max_steps >= 1, "max_steps", ">= 1");
    require(cfg.window_size >= 1, "window_size", ">= 1");
    require(cfg.rare_threshold > 0.0 && cfg.rare_threshold <= 100.0, "rare_threshold",
            "in (0, 100]");
    require(cfg.rare_min_total >= 1, "rare_min_total", ">= 1");
    require(cfg.init_pool_size >= 1, "init_pool_size", ">= 1");
    require(cfg.gen_frequency >= 1, "gen_frequency", ">= 1");
    require(cfg.total_steps >= 0, "total_steps", ">= 0");
    require(cfg.dedup_threshold > 0.0 && cfg.dedup_threshold <= 1.0, "dedup_threshold",
            "in (0, 1]");
    require(std::isfinite(cfg.adv_epsilon) && cfg.adv_epsilon > 0.0, "adv_epsilon",
            "finite and > 0");
    require(cfg.env_tools >= 1, "env_tools", ">= 1");
    require(cfg.env_depth >= 1, "env_depth", ">= 1");
    require(cfg.env_tools >= cfg.env_depth, "env_tools", ">= env_depth");
    require(cfg.pattern_length >= 1, "pattern_length", ">= 1");
    require(cfg.explore_rounds >= 1, "explore_rounds", ">= 1");
    require(cfg.explore_steps >= 0, "explore_steps", ">= 0 (0 means max_steps)");
    require(cfg.explore_noise >= 0.0 && cfg.explore_noise <= 1.0, "explore_noise",
            "in [0, 1]");
    require(cfg.init_explore_steps >= 1, "init_explore_steps", ">= 1");
    require(cfg.init_round_budget >= 1, "init_round_budget", ">= 1");
    require(cfg.signal_budget >= 1, "signal_budget", ">= 1");
    require(cfg.eval_tasks >= 1, "eval_tasks", ">= 1");
    require(cfg.policy_buckets >= 1, "policy_buckets", ">= 1");
    require(cfg.embed_dim >= 8, "embed_dim", ">= 8");
    require(cfg.sr_k >= 1, "sr_k", ">= 1");
    require(cfg.hist_bins >= 1, "hist_bins", ">= 1");
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------
namespace {

std::string padded_name(const char* prefix, int step, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%05d%s", prefix, step, suffix);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

struct PhaseOutcome {
    int signals_selected = 0;
    int explored_tasks = 0;
    int aborted_rounds = 0;
    long long attempted = 0;
    long long accepted = 0;
    long long retained = 0;
    long long rejected = 0;
    int appended = 0;
    int duplicates = 0;
    json selected = json::array();  // (task, signal) pairs, in pick order
};

}  // namespace

RunReport run(const RunConfig& cfg, RunMode mode, const fs::path& out_dir,
              const RunOptions& options) {
    validate_config(cfg);
    fs::create_directories(out_dir);

    std::ofstream run_log(out_dir / "run.log", std::ios::binary | std::ios::trunc);
    std::ofstream traj_log(out_dir / "trajectories.log", std::ios::binary | std::ios::trunc);
    if (!run_log || !traj_log) {
        throw std::runtime_error("cannot open logs under '" + out_dir.string() + "'");
    }
    auto log = [&](const json& record) { run_log << record.dump() << '\n'; };

    const bool remote = options.backend == RunOptions::Backend::remote;

    EnvSpec env = generate_env(rng::derive(cfg.seed, "env"), cfg.env_tools, cfg.env_depth);
    validate_env(env);
    write_file(out_dir / "env.json", json(env).dump(2) + "\n");

    // Held-out evaluation tasks, goals round-robin so every depth is weighted
    // equally. Never pooled, never trained on.
    std::vector<std::string> goal_ids;
    for (const auto& [gid, res] : env.goals) goal_ids.push_back(gid);
    std::vector<TaskSpec> eval_tasks;
    for (int i = 0; i < cfg.eval_tasks; ++i) {
        const std::string& gid = goal_ids[static_cast<std::size_t>(i) % goal_ids.size()];
        char id[32];
        std::snprintf(id, sizeof id, "eval_%03d", i);
        eval_tasks.push_back(TaskSpec{id, "evaluate: reach '" + env.goals.at(gid) + "'",
                                      env.seed, gid, TaskOrigin::initial, std::nullopt, 0});
    }

    json goal_depths = json::object();
    for (const auto& [gid, res] : env.goals) {
        auto plan = oracle_solve(env, gid);
        goal_depths[gid] = plan ? json(plan->size()) : json(nullptr);
    }
    log({{"type", "config"},
         {"mode", to_string(mode)},
         {"backend", remote ? "remote" : "scripted"},
         {"config", json(cfg)}});
    log({{"type", "env"},
         {"tools", env.tools.size()},
         {"goals", goal_depths}});

    std::shared_ptr<const Embedder> embedder =
        default_embedder(static_cast<std::size_t>(cfg.embed_dim), rng::derive(cfg.seed, "embed"));

    std::unique_ptr<ExplorationBackend> init_backend;
    std::unique_ptr<ExplorationBackend> phase_backend;
    std::unique_ptr<ContextSummarizer> summarizer;
    std::unique_ptr<TaskAbstractor> abstractor;
    if (remote) {
        init_backend = std::make_unique<RemoteBackend>(options.endpoint);
        phase_backend = std::make_unique<RemoteBackend>(options.endpoint);
        summarizer = std::make_unique<RemoteSummarizer>(options.endpoint);
        abstractor = std::make_unique<RemoteAbstractor>(options.endpoint);
    } else {
        init_backend = random_walk_backend();
        phase_backend = scripted_backend(cfg.explore_noise);
        summarizer = std::make_unique<RuleBasedSummarizer>();
        abstractor = std::make_unique<RuleBasedAbstractor>();
    }

    TaskPool pool = init_pool(env, cfg.init_pool_size, *init_backend,
                              rng::derive(cfg.seed, "init"), cfg, embedder);
    const std::size_t initial_count = pool.size();
    write_file(out_dir / "pool_step_00000.json", pool.snapshot().dump(2) + "\n");
    log({{"type", "pool"},
         {"step", 0},
         {"snapshot", "pool_step_00000.json"},
         {"size", pool.size()}});

    Policy policy = Policy::make(static_cast<std::size_t>(cfg.policy_buckets),
                                 env.tools.size(), cfg.rollout_temperature);
    const PolicySnapshot ref = policy;  // KL anchor stays the uniform init

    RunReport report;
    auto record_eval = [&](int step) {
        int wins = 0;
        for (const auto& t : eval_tasks) {
            Trajectory tr = greedy_rollout(policy, env, t, cfg.max_steps);
            wins += tr.terminated_by == Termination::goal ? 1 : 0;
        }
        double success = static_cast<double>(wins) / static_cast<double>(eval_tasks.size());
        log({{"type", "eval"}, {"step", step}, {"success", success}});
        report.eval_series.emplace_back(step, success);
        report.final_success = success;
    };
    record_eval(0);

    const int explore_steps = cfg.explore_steps > 0 ? cfg.explore_steps : cfg.max_steps;
    auto executor = replay_executor(cfg.max_steps);

    // Buffered between evolution phases (coevolve only): annotations plus the
    // trajectories they reference.
    std::vector<SignalAnnotation> phase_signals;
    std::unordered_map<std::string, Trajectory> phase_trajectories;

    auto run_phase = [&](int step) {
        PhaseOutcome outcome;
        std::vector<ExplorationTriplet> triplets;
        // A task explored under several annotations keeps its first
        // (highest-priority) signal kind for the synthesized pairs.
        std::map<std::string, std::optional<SignalKind>> task_signal;

        if (mode == RunMode::coevolve) {
            // Latest annotation per (task, kind); within a kind, tasks the
            // greedy policy currently fails come first (ties broken by the
            // lower mean window score, then by recency); then a round-robin
            // over kinds up to the budget so no single signal monopolizes
            // the phase. The greedy probe matters: sampled scores stay noisy
            // long after argmax consolidates, so score means alone cannot
            // tell a mastered task that wobbles from one the policy has
            // never solved.
            std::array<std::vector<const SignalAnnotation*>, 3> by_kind;
            std::set<std::pair<std::string, int>> seen;
            for (auto it = phase_signals.rbegin(); it != phase_signals.rend(); ++it) {
                int k = static_cast<int>(it->kind);
                if (!seen.emplace(it->task_id, k).second) continue;
                by_kind[static_cast<std::size_t>(k)].push_back(&*it);
            }
            auto window_mean = [&](const std::string& task_id) {
                const auto& histories = pool.signal_state().histories;
                auto it = histories.find(task_id);
                if (it == histories.end() || it->second.scores.empty()) return 1.0;
                double sum = 0.0;
                for (double s : it->second.scores) sum += s;
                return sum / static_cast<double>(it->second.scores.size());
            };
            std::map<std::string, bool> greedy_memo;
            auto greedy_fails = [&](const std::string& task_id) {
                auto it = greedy_memo.find(task_id);
                if (it == greedy_memo.end()) {
                    Trajectory probe =
                        greedy_rollout(policy, env, pool.task(task_id), cfg.max_steps);
                    it = greedy_memo
                             .emplace(task_id, probe.terminated_by != Termination::goal)
                             .first;
                }
                return it->second;
            };
            for (auto& annotations : by_kind) {
                std::stable_sort(annotations.begin(), annotations.end(),
                                 [&](const SignalAnnotation* a,
                                     const SignalAnnotation* b) {
                                     bool fa = greedy_fails(a->task_id);
                                     bool fb = greedy_fails(b->task_id);
                                     if (fa != fb) return fa;
                                     return window_mean(a->task_id) <
                                            window_mean(b->task_id);
                                 });
            }
            std::vector<const SignalAnnotation*> selected;
            std::array<std::size_t, 3> cursor{0, 0, 0};
            bool advanced = true;
            while (advanced && static_cast<int>(selected.size()) < cfg.signal_budget) {
                advanced = false;
                for (std::size_t k = 0;
                     k < 3 && static_cast<int>(selected.size()) < cfg.signal_budget; ++k) {
                    if (cursor[k] < by_kind[k].size()) {
                        selected.push_back(by_kind[k][cursor[k]++]);
                        advanced = true;
                    }
                }
            }
            outcome.signals_selected = static_cast<int>(selected.size());
            int idx = 0;
            for (const SignalAnnotation* ann : selected) {
                outcome.selected.push_back(
                    {{"task", ann->task_id}, {"signal", to_string(ann->kind)}});
                const Trajectory& trajectory = phase_trajectories.at(ann->traj_id);
                ExplorationContext context = build_context(*ann, trajectory, *summarizer);
                const TaskSpec& task = pool.task(ann->task_id);
                ExplorationRun explored = explore(
                    context, env, task, cfg.explore_rounds, explore_steps, *phase_backend,
                    rng::derive(cfg.seed, "explore",
                                static_cast<std::uint64_t>(step) * 4096 +
                                    static_cast<std::uint64_t>(idx)));
                outcome.aborted_rounds += explored.aborted_rounds;
                triplets.insert(triplets.end(), explored.triplets.begin(),
                                explored.triplets.end());
                task_signal.emplace(ann->task_id, ann->kind);
                ++idx;
            }
        } else {  // random_explore: same budget, unconditioned task choice
            std::size_t n = std::min(static_cast<std::size_t>(cfg.signal_budget), pool.size());
            auto chosen = pool.sample_batch(n, rng::derive(cfg.seed, "phase-tasks",
                                                           static_cast<std::uint64_t>(step)));
            outcome.signals_selected = static_cast<int>(chosen.size());
            int idx = 0;
            for (const TaskSpec& task : chosen) {
                outcome.selected.push_back({{"task", task.task_id}, {"signal", nullptr}});
                ExplorationRun explored = explore(
                    std::nullopt, env, task, cfg.explore_rounds, explore_steps, *phase_backend,
                    rng::derive(cfg.seed, "explore",
                                static_cast<std::uint64_t>(step) * 4096 +
                                    static_cast<std::uint64_t>(idx)));
                outcome.aborted_rounds += explored.aborted_rounds;
                triplets.insert(triplets.end(), explored.triplets.begin(),
                                explored.triplets.end());
                task_signal.emplace(task.task_id, std::nullopt);
                ++idx;
            }
        }

        std::vector<TaskSolutionPair> admissible;
        auto grouped = aggregate_triplets(triplets);
        outcome.explored_tasks = static_cast<int>(grouped.size());
        for (const auto& [task_id, rollouts] : grouped) {
            const TaskSpec& source = pool.task(task_id);
            auto pairs = abstractor->abstract(env, source, rollouts, task_signal.at(task_id));
            for (auto& pair : pairs) {
                Verdict verdict = validate_task(pair, env, executor);
                ++outcome.attempted;
                switch (verdict.kind) {
                    case VerdictKind::accept: ++outcome.accepted; break;
                    case VerdictKind::retain_by_reward: ++outcome.retained; break;
                    case VerdictKind::reject: ++outcome.rejected; break;
                }
                log({{"type", "verdict"},
                     {"step", step},
                     {"verdict", to_string(verdict.kind)},
                     {"task", task_id},
                     {"query", pair.query},
                     {"actions", pair.action_sequence.size()},
                     {"detail", verdict.detail}});
                if (verdict.kind != VerdictKind::reject) admissible.push_back(std::move(pair));
            }
        }

        EvolutionResult evolved = evolve_pool(admissible, pool, step, env.seed);
        outcome.appended = static_cast<int>(evolved.appended.size());
        outcome.duplicates = evolved.duplicates;

        std::string snapshot = padded_name("pool_step_", step, ".json");
        write_file(out_dir / snapshot, pool.snapshot().dump(2) + "\n");

        const auto& embeddings = pool.embeddings();
        std::vector<Vec> initial_embs(embeddings.begin(),
                                      embeddings.begin() + static_cast<long>(initial_count));
        std::vector<Vec> synth_embs(embeddings.begin() + static_cast<long>(initial_count),
                                    embeddings.end());
        json sr = embeddings.size() > static_cast<std::size_t>(cfg.sr_k)
                      ? json(sr_at_k(embeddings, cfg.sr_k))
                      : json(nullptr);
        json edr = (!synth_embs.empty() && initial_embs.size() >= 2)
                       ? json(ed_rel(initial_embs, synth_embs))
                       : json(nullptr);
        std::vector<long long> hist(static_cast<std::size_t>(cfg.hist_bins), 0);
        if (!synth_embs.empty()) {
            hist = max_similarity_distribution(synth_embs, initial_embs, cfg.hist_bins);
        }

        log({{"type", "evolution"},
             {"step", step},
             {"signals_selected", outcome.signals_selected},
             {"selected", outcome.selected},
             {"explored_tasks", outcome.explored_tasks},
             {"aborted_rounds", outcome.aborted_rounds},
             {"attempted", outcome.attempted},
             {"accepted", outcome.accepted},
             {"retained", outcome.retained},
             {"rejected", outcome.rejected},
             {"appended", outcome.appended},
             {"duplicates", outcome.duplicates},
             {"pool_size", pool.size()},
             {"snapshot", snapshot},
             {"sr_at_k", sr},
             {"ed_rel", edr},
             {"max_sim_histogram", hist}});

        report.pool_series.emplace_back(step, pool.size());
        report.verdicts_accepted += outcome.accepted;
        report.verdicts_retained += outcome.retained;
        report.verdicts_rejected += outcome.rejected;
        ++report.evolution_phases;
    };

    for (int step = 1; step <= cfg.total_steps; ++step) {
        auto batch = pool.sample_batch(static_cast<std::size_t>(cfg.batch_size),
                                       rng::derive(cfg.seed, "batch",
                                                   static_cast<std::uint64_t>(step)));
        IterationResult iter =
            train_iteration(policy, ref, env, batch, cfg,
                            rng::derive(cfg.seed, "train", static_cast<std::uint64_t>(step)),
                            step);

        std::vector<std::vector<Trajectory>> groups;
        double score_sum = 0.0;
        long long trained = 0;
        for (const GroupBatch& g : iter.groups) {
            for (const Trajectory& t : g.trajectories) {
                traj_log << encode_trajectory(t) << '\n';
                score_sum += t.score;
                ++trained;
            }
            groups.push_back(g.trajectories);
        }
        auto signals = extract_signals(groups, pool.signal_state());

        SignalCounts counts;
        counts.step = step;
        for (const SignalAnnotation& a : signals) {
            switch (a.kind) {
                case SignalKind::forgetting: ++counts.forgetting; break;
                case SignalKind::boundary: ++counts.boundary; break;
                case SignalKind::rare: ++counts.rare; break;
            }
        }
        report.signal_series.push_back(counts);

        log({{"type", "iteration"},
             {"step", step},
             {"objective", iter.objective},
             {"mean_score", trained > 0 ? score_sum / static_cast<double>(trained) : 0.0},
             {"trajectories", trained},
             {"pool_size", pool.size()}});
        log({{"type", "signals"},
             {"step", step},
             {"forgetting", counts.forgetting},
             {"boundary", counts.boundary},
             {"rare", counts.rare},
             {"total", counts.total()}});

        if (mode == RunMode::coevolve) {
            phase_signals.insert(phase_signals.end(), signals.begin(), signals.end());
            for (const GroupBatch& g : iter.groups) {
                for (const Trajectory& t : g.trajectories) phase_trajectories[t.traj_id] = t;
            }
        }

        record_eval(step);

        if (step % cfg.gen_frequency == 0) {
            if (mode != RunMode::grpo_static) run_phase(step);
            phase_signals.clear();
            phase_trajectories.clear();
            write_file(out_dir / padded_name("policy_step_", step, ".json"),
                       save_policy(policy));
        }
    }

    write_file(out_dir / "policy_final.json", save_policy(policy));
    log({{"type", "done"},
         {"final_success", report.final_success},
         {"pool_size", pool.size()},
         {"evolution_phases", report.evolution_phases},
         {"accepted", report.verdicts_accepted},
         {"retained", report.verdicts_retained},
         {"rejected", report.verdicts_rejected}});
    if (!run_log || !traj_log) {
        throw std::runtime_error("log write failed under '" + out_dir.string() + "'");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------
json emit_report(const fs::path& log_path, const fs::path& out_path) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open log '" + log_path.string() + "'");

    json report = {{"mode", nullptr},
                   {"success_series", json::array()},
                   {"signal_series", json::array()},
                   {"pool_embedding_series", json::array()},
                   {"pass_rate_series", json::array()},
                   {"max_similarity_histogram", json::array()},
                   {"warnings", json::array()}};
    auto warn = [&](const std::string& msg) { report["warnings"].push_back(msg); };

    std::optional<RunConfig> cfg;
    // (step, snapshot file) in log order; verdict tallies keyed by step.
    std::vector<std::pair<int, std::string>> snapshots;
    std::map<int, std::pair<long long, long long>> verdicts;  // step -> (accepted, attempted)
    std::map<int, std::pair<long long, long long>> recorded;  // evolution record's own counts

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("type")) {
            warn("log truncated or corrupt at line " + std::to_string(line_no) +
                 "; report is partial");
            break;
        }
        const std::string type = rec["type"].get<std::string>();
        if (type == "config") {
            report["mode"] = rec.value("mode", std::string("unknown"));
            try {
                cfg = rec.at("config").get<RunConfig>();
            } catch (const std::exception&) {
                warn("config record unreadable; embeddings omitted");
            }
        } else if (type == "eval") {
            report["success_series"].push_back(
                {{"step", rec.value("step", 0)}, {"success", rec.value("success", 0.0)}});
        } else if (type == "signals") {
            report["signal_series"].push_back({{"step", rec.value("step", 0)},
                                               {"forgetting", rec.value("forgetting", 0LL)},
                                               {"boundary", rec.value("boundary", 0LL)},
                                               {"rare", rec.value("rare", 0LL)},
                                               {"total", rec.value("total", 0LL)}});
        } else if (type == "pool" || type == "evolution") {
            snapshots.emplace_back(rec.value("step", 0), rec.value("snapshot", std::string()));
            if (type == "evolution") {
                recorded[rec.value("step", 0)] = {rec.value("accepted", 0LL),
                                                  rec.value("attempted", 0LL)};
                report["max_similarity_histogram"] = rec.value("max_sim_histogram", json::array());
            }
        } else if (type == "verdict") {
            auto& [accepted, attempted] = verdicts[rec.value("step", 0)];
            ++attempted;
            if (rec.value("verdict", std::string()) == "accept") ++accepted;
        }
    }

    std::unique_ptr<const Embedder> embedder;
    if (cfg) {
        embedder = default_embedder(static_cast<std::size_t>(cfg->embed_dim),
                                    rng::derive(cfg->seed, "embed"));
    } else {
        warn("no config record found; embeddings omitted");
    }
    for (const auto& [step, snapshot] : snapshots) {
        json entry = {{"step", step}, {"snapshot", snapshot}};
        if (embedder && !snapshot.empty()) {
            fs::path snap_path = log_path.parent_path() / snapshot;
            std::ifstream snap_in(snap_path, std::ios::binary);
            json tasks = snap_in ? json::parse(snap_in, nullptr, false) : json();
            if (!snap_in || tasks.is_discarded() || !tasks.is_array()) {
                warn("pool snapshot '" + snapshot + "' missing or unreadable");
            } else {
                json embs = json::array();
                for (const auto& t : tasks) {
                    embs.push_back(embedder->embed(t.value("query", std::string())));
                }
                entry["size"] = tasks.size();
                entry["embeddings"] = std::move(embs);
            }
        }
        report["pool_embedding_series"].push_back(std::move(entry));
    }

    // Pass rate is recomputed from the verdict records; the evolution
    // record's own tally is only cross-checked.
    for (const auto& [step, tally] : verdicts) {
        const auto& [accepted, attempted] = tally;
        double rate = attempted > 0
                          ? static_cast<double>(accepted) / static_cast<double>(attempted)
                          : 0.0;
        report["pass_rate_series"].push_back({{"step", step},
                                              {"accepted", accepted},
                                              {"attempted", attempted},
                                              {"pass_rate", rate}});
        auto it = recorded.find(step);
        if (it != recorded.end() && it->second != tally) {
            warn("verdict records disagree with the evolution summary at step " +
                 std::to_string(step));
        }
    }

    fs::path target = out_path.empty() ? log_path.parent_path() / "report.json" : out_path;
    write_file(target, report.dump(2) + "\n");
    return report;
}

}  // namespace coevolve

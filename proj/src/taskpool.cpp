#include "coevolve/taskpool.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "coevolve/rng.hpp"
#include "coevolve/synthesis.hpp"

namespace coevolve {

TaskPool::TaskPool(std::shared_ptr<const Embedder> embedder,
                   double dedup_threshold, const SignalState& signal_params)
    : embedder_(std::move(embedder)),
      dedup_threshold_(dedup_threshold),
      signal_state_(signal_params) {
    if (!embedder_) throw std::domain_error("TaskPool: embedder required");
    signal_state_.histories.clear();
    signal_state_.patterns = {};
}

bool TaskPool::contains(const std::string& task_id) const {
    return std::any_of(tasks_.begin(), tasks_.end(),
                       [&](const TaskSpec& t) { return t.task_id == task_id; });
}

const TaskSpec& TaskPool::task(const std::string& task_id) const {
    for (const auto& t : tasks_) {
        if (t.task_id == task_id) return t;
    }
    throw std::domain_error("TaskPool: unknown task " + task_id);
}

bool TaskPool::try_append(TaskSpec spec) {
    if (contains(spec.task_id)) {
        throw std::domain_error("TaskPool: duplicate task id " + spec.task_id);
    }
    Vec embedding = embedder_->embed(spec.query);
    for (const auto& existing : embeddings_) {
        if (cosine_similarity(embedding, existing) > dedup_threshold_) return false;
    }
    tasks_.push_back(std::move(spec));
    embeddings_.push_back(std::move(embedding));
    return true;
}

std::vector<TaskSpec> TaskPool::sample_batch(std::size_t n,
                                             std::uint64_t seed) const {
    if (n < 1) throw std::domain_error("sample_batch: n must be >= 1");
    if (tasks_.empty()) throw std::domain_error("sample_batch: empty pool");

    auto g = rng::make_engine(rng::derive(seed, "batch"));
    std::vector<TaskSpec> out;
    out.reserve(n);
    if (n > tasks_.size()) {
        // Larger than the pool: uniform with replacement.
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(tasks_[rng::uniform_index(g, tasks_.size())]);
        }
        return out;
    }
    // Partial Fisher-Yates over indices.
    std::vector<std::size_t> idx(tasks_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + rng::uniform_index(g, idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(tasks_[idx[i]]);
    }
    return out;
}

ScoreHistory& TaskPool::record_score(const std::string& task_id, double score) {
    if (!contains(task_id)) {
        throw std::domain_error("record_score: unknown task " + task_id);
    }
    ScoreHistory& h = signal_state_.history_for(task_id);
    h.append(score);
    return h;
}

json TaskPool::snapshot() const {
    json j = json::array();
    for (const auto& t : tasks_) j.push_back(t);
    return j;
}

TaskPool init_pool(const EnvSpec& spec, int n, ExplorationBackend& backend,
                   std::uint64_t seed, const RunConfig& cfg,
                   std::shared_ptr<const Embedder> embedder) {
    if (n < 1) throw std::domain_error("init_pool: n must be >= 1");
    SignalState params;
    params.window = cfg.window_size;
    params.pattern_length = cfg.pattern_length;
    params.rare_threshold = cfg.rare_threshold;
    params.rare_min_total = cfg.rare_min_total;
    TaskPool pool(std::move(embedder), cfg.dedup_threshold, params);

    std::vector<std::string> goals;
    goals.reserve(spec.goals.size());
    for (const auto& [goal_id, target] : spec.goals) goals.push_back(goal_id);

    RuleBasedAbstractor abstractor;
    TaskExecutor executor = replay_executor(cfg.max_steps);
    auto goal_rng = rng::make_engine(rng::derive(seed, "init-goals"));
    int next_id = 0;
    int steps = cfg.init_explore_steps > 0 ? cfg.init_explore_steps : cfg.max_steps;

    for (int round = 0; round < cfg.init_round_budget; ++round) {
        if (pool.size() >= static_cast<std::size_t>(n)) break;
        TaskSpec probe;
        probe.task_id = "seed_round_" + std::to_string(round);
        probe.goal_id = goals[rng::uniform_index(goal_rng, goals.size())];
        probe.env_seed = spec.seed;

        ExplorationRun run =
            explore(std::nullopt, spec, probe, 1, steps, backend,
                    rng::derive(seed, "init-round", static_cast<std::uint64_t>(round)));
        if (run.triplets.empty()) continue;

        for (auto& [task_id, rollouts] : aggregate_triplets(run.triplets)) {
            auto pairs = abstractor.abstract(spec, probe, rollouts, std::nullopt);
            for (const auto& pair : pairs) {
                if (pool.size() >= static_cast<std::size_t>(n)) break;
                Verdict verdict = validate_task(pair, spec, executor);
                if (verdict.kind == VerdictKind::reject) continue;
                TaskSpec task;
                task.task_id = "init_" + std::to_string(next_id);
                task.query = pair.query;
                task.env_seed = spec.seed;
                task.goal_id = pair.goal_id;
                task.origin = TaskOrigin::initial;
                task.created_at_step = 0;
                if (pool.try_append(std::move(task))) next_id += 1;
            }
        }
    }
    if (pool.size() < static_cast<std::size_t>(n)) {
        throw std::runtime_error(
            "init_pool: only " + std::to_string(pool.size()) + " of " +
            std::to_string(n) + " admissible tasks within " +
            std::to_string(cfg.init_round_budget) + " rounds");
    }
    return pool;
}

}  // namespace coevolve

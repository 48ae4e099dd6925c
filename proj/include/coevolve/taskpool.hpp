#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coevolve/core.hpp"
#include "coevolve/env.hpp"
#include "coevolve/explorer.hpp"
#include "coevolve/metrics.hpp"
#include "coevolve/signals.hpp"

namespace coevolve {

// Append-only task container with embedding-based query dedup and the
// per-task score histories the signal detectors read.
class TaskPool {
public:
    TaskPool(std::shared_ptr<const Embedder> embedder, double dedup_threshold,
             const SignalState& signal_params);

    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    std::size_t size() const { return tasks_.size(); }
    bool contains(const std::string& task_id) const;
    // Unknown ids are a domain error.
    const TaskSpec& task(const std::string& task_id) const;

    // Appends unless a pooled query's cosine similarity exceeds the dedup
    // threshold or the id already exists (duplicate ids are a domain error).
    // Returns false on a near-duplicate query.
    bool try_append(TaskSpec spec);

    // Uniform sample without replacement; falls back to sampling with
    // replacement when n exceeds the pool size. n >= 1, non-empty pool.
    std::vector<TaskSpec> sample_batch(std::size_t n, std::uint64_t seed) const;

    // Appends into the task's rolling window (window size from the signal
    // state) and returns the history. Unknown ids are a domain error.
    ScoreHistory& record_score(const std::string& task_id, double score);

    SignalState& signal_state() { return signal_state_; }
    const SignalState& signal_state() const { return signal_state_; }
    const std::vector<Vec>& embeddings() const { return embeddings_; }
    const Embedder& embedder() const { return *embedder_; }

    // Tasks as a JSON array, in append order.
    json snapshot() const;

private:
    std::shared_ptr<const Embedder> embedder_;
    double dedup_threshold_;
    std::vector<TaskSpec> tasks_;
    std::vector<Vec> embeddings_;
    SignalState signal_state_;
};

// Seeds a pool of n admissible tasks through unguided exploration rounds
// (random goal per round, cfg.init_explore_steps step cap), abstracting and
// validating exactly as the synthesis phase does. Throws std::runtime_error
// naming the shortfall when cfg.init_round_budget rounds cannot reach n.
TaskPool init_pool(const EnvSpec& spec, int n, ExplorationBackend& backend,
                   std::uint64_t seed, const RunConfig& cfg,
                   std::shared_ptr<const Embedder> embedder);

}  // namespace coevolve

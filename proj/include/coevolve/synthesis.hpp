#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coevolve/core.hpp"
#include "coevolve/env.hpp"
#include "coevolve/explorer.hpp"
#include "coevolve/taskpool.hpp"

namespace coevolve {

struct Rollout {
    std::string rollout_id;
    std::vector<ExplorationTriplet> steps;  // ordered by step_index
};

// Groups triplets by source task (keys sorted), rollouts in first-appearance
// order, steps in input order per rollout. Input order within a rollout must
// already follow step_index; violations are a domain error.
std::map<std::string, std::vector<Rollout>> aggregate_triplets(
    const std::vector<ExplorationTriplet>& triplets);

class TaskAbstractor {
public:
    virtual ~TaskAbstractor() = default;
    virtual std::vector<TaskSolutionPair> abstract(
        const EnvSpec& spec, const TaskSpec& source,
        const std::vector<Rollout>& rollouts,
        std::optional<SignalKind> source_signal) = 0;
};

// For each rollout that reached the source goal, emits the shortest
// contiguous action window that replays from a fresh reset to success
// (earliest window on ties). Windows shorter than 3 actions are discarded;
// identical action sequences are emitted once. Queries are templated from the
// goal's resource and the window's tool names.
class RuleBasedAbstractor final : public TaskAbstractor {
public:
    std::vector<TaskSolutionPair> abstract(
        const EnvSpec& spec, const TaskSpec& source,
        const std::vector<Rollout>& rollouts,
        std::optional<SignalKind> source_signal) override;
};

// Prompts a chat endpoint with the abstraction template; unparseable replies
// fall back to the rule-based abstraction (counted).
class RemoteAbstractor final : public TaskAbstractor {
public:
    explicit RemoteAbstractor(RemoteEndpoint endpoint);
    std::vector<TaskSolutionPair> abstract(
        const EnvSpec& spec, const TaskSpec& source,
        const std::vector<Rollout>& rollouts,
        std::optional<SignalKind> source_signal) override;
    long long fallback_count() const { return fallbacks_; }

private:
    ChatClient client_;
    RuleBasedAbstractor fallback_;
    long long fallbacks_ = 0;
};

// The reply block format the remote abstractor requests and parses.
std::string abstraction_output_format();

enum class VerdictKind { accept, retain_by_reward, reject };
const char* to_string(VerdictKind v);

struct Verdict {
    VerdictKind kind = VerdictKind::reject;
    Trajectory evidence;
    std::string detail;
};

struct ExecutionResult {
    bool success = false;
    double cumulative_reward = 0.0;
    Trajectory trajectory;
};

using TaskExecutor =
    std::function<ExecutionResult(const EnvSpec&, const TaskSolutionPair&)>;

// Replays the pair's action sequence literally in a fresh episode of its
// goal; rewards accumulate per step and the step cap applies.
TaskExecutor replay_executor(int max_steps);

// accept when the executor completes the objective; retain_by_reward when it
// fails but accrues positive reward; reject otherwise. Executor errors
// (unknown goal or tool, instantiation failure) reject with the error in
// `detail`.
Verdict validate_task(const TaskSolutionPair& pair, const EnvSpec& spec,
                      const TaskExecutor& executor);

struct EvolutionResult {
    std::vector<TaskSpec> appended;
    int duplicates = 0;
};

// Appends the admissible pairs as synthesized tasks (ids "syn_<step>_<k>"),
// skipping near-duplicate queries via the pool's embedding dedup.
EvolutionResult evolve_pool(const std::vector<TaskSolutionPair>& admissible,
                            TaskPool& pool, int created_at_step,
                            std::uint64_t env_seed);

}  // namespace coevolve

#include "coevolve/synthesis.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "coevolve/prompts.hpp"

namespace coevolve {

std::map<std::string, std::vector<Rollout>> aggregate_triplets(
    const std::vector<ExplorationTriplet>& triplets) {
    std::map<std::string, std::vector<Rollout>> out;
    std::map<std::string, std::pair<std::string, std::size_t>> where;  // rollout -> (task, idx)
    for (const auto& t : triplets) {
        auto& rollouts = out[t.source_task_id];
        auto it = where.find(t.rollout_id);
        if (it == where.end()) {
            where[t.rollout_id] = {t.source_task_id, rollouts.size()};
            rollouts.push_back({t.rollout_id, {t}});
            continue;
        }
        if (it->second.first != t.source_task_id) {
            throw std::domain_error("aggregate_triplets: rollout " + t.rollout_id +
                                    " spans multiple tasks");
        }
        Rollout& r = out[it->second.first][it->second.second];
        if (!r.steps.empty() && t.step_index <= r.steps.back().step_index) {
            throw std::domain_error("aggregate_triplets: rollout " + t.rollout_id +
                                    " steps out of order");
        }
        r.steps.push_back(t);
    }
    return out;
}

namespace {

// Replays window actions from a fresh episode; true when the goal is reached.
bool window_succeeds(const EnvSpec& spec, const std::string& goal_id,
                     const std::vector<ActionToken>& actions) {
    EnvState state = reset(spec, goal_id);
    for (const auto& a : actions) {
        if (state.done) break;
        step(spec, state, a, static_cast<int>(actions.size()) + 1);
    }
    return state.succeeded;
}

std::string window_key(const std::vector<ActionToken>& actions) {
    std::string key;
    for (const auto& a : actions) {
        key += a.tool;
        key += '\x1f';
        for (const auto& arg : a.args) {
            key += arg;
            key += '\x1e';
        }
    }
    return key;
}

}  // namespace

std::vector<TaskSolutionPair> RuleBasedAbstractor::abstract(
    const EnvSpec& spec, const TaskSpec& source,
    const std::vector<Rollout>& rollouts,
    std::optional<SignalKind> source_signal) {
    auto goal_it = spec.goals.find(source.goal_id);
    if (goal_it == spec.goals.end()) {
        throw std::domain_error("abstract: unknown goal " + source.goal_id);
    }
    const std::string& target = goal_it->second;

    std::vector<TaskSolutionPair> out;
    std::set<std::string> seen;
    for (const Rollout& rollout : rollouts) {
        std::vector<ActionToken> actions;
        actions.reserve(rollout.steps.size());
        for (const auto& t : rollout.steps) actions.push_back(t.action);
        if (actions.empty()) continue;

        // Shortest contiguous window that replays to success, earliest first.
        std::vector<ActionToken> window;
        for (std::size_t len = 1; len <= actions.size() && window.empty(); ++len) {
            for (std::size_t start = 0; start + len <= actions.size(); ++start) {
                std::vector<ActionToken> candidate(
                    actions.begin() + static_cast<std::ptrdiff_t>(start),
                    actions.begin() + static_cast<std::ptrdiff_t>(start + len));
                if (window_succeeds(spec, source.goal_id, candidate)) {
                    window = std::move(candidate);
                    break;
                }
            }
        }
        if (window.size() < 3) continue;  // no success, or the task is too shallow
        if (!seen.insert(window_key(window)).second) continue;

        std::string query = "Obtain resource '" + target + "' by chaining " +
                            std::to_string(window.size()) + " tools:";
        for (const auto& a : window) query += " " + a.tool;
        out.push_back({query, window, source.task_id, source_signal, source.goal_id});
    }
    return out;
}

std::string abstraction_output_format() {
    return "TaskDescription: <one line>\n"
           "Query: <one line>\n"
           "ActionSequence: tool_name_1 | tool_name_2 | tool_name_3\n"
           "CompletionCriterion: <one line>";
}

RemoteAbstractor::RemoteAbstractor(RemoteEndpoint endpoint)
    : client_(std::move(endpoint)) {}

std::vector<TaskSolutionPair> RemoteAbstractor::abstract(
    const EnvSpec& spec, const TaskSpec& source,
    const std::vector<Rollout>& rollouts,
    std::optional<SignalKind> source_signal) {
    std::string prompt = prompts::render_template(
        prompts::task_abstraction(), {{"output_format", abstraction_output_format()}});
    std::string evidence = "Source task: " + source.task_id + " (goal " +
                           source.goal_id + ")\n";
    for (const Rollout& r : rollouts) {
        evidence += "rollout " + r.rollout_id + ":\n";
        for (const auto& t : r.steps) {
            evidence += "  " + std::to_string(t.step_index) + ". " + t.action.tool +
                        " -> " + t.observation + "\n";
        }
    }

    for (int attempt = 0; attempt < client_.endpoint().max_attempts; ++attempt) {
        auto reply = client_.complete({{"system", prompt}, {"user", evidence}});
        if (!reply) continue;

        std::vector<TaskSolutionPair> parsed;
        std::istringstream in(*reply);
        std::string line, query;
        while (std::getline(in, line)) {
            if (line.rfind("Query:", 0) == 0) {
                query = line.substr(6);
                query.erase(0, query.find_first_not_of(' '));
            } else if (line.rfind("ActionSequence:", 0) == 0 && !query.empty()) {
                std::vector<ActionToken> actions;
                std::istringstream seq(line.substr(15));
                std::string part;
                bool valid = true;
                while (std::getline(seq, part, '|')) {
                    std::istringstream word(part);
                    ActionToken token;
                    if (!(word >> token.tool)) { valid = false; break; }
                    std::string arg;
                    while (word >> arg) token.args.push_back(arg);
                    bool known = std::any_of(
                        spec.tools.begin(), spec.tools.end(),
                        [&](const ToolDef& t) { return t.name == token.tool; });
                    if (!known) { valid = false; break; }
                    actions.push_back(std::move(token));
                }
                if (valid && actions.size() >= 3) {
                    parsed.push_back({query, actions, source.task_id, source_signal,
                                      source.goal_id});
                }
                query.clear();
            }
        }
        if (!parsed.empty()) return parsed;
    }
    fallbacks_ += 1;
    return fallback_.abstract(spec, source, rollouts, source_signal);
}

const char* to_string(VerdictKind v) {
    switch (v) {
        case VerdictKind::accept: return "accept";
        case VerdictKind::retain_by_reward: return "retain_by_reward";
        case VerdictKind::reject: return "reject";
    }
    throw std::domain_error("unknown VerdictKind");
}

TaskExecutor replay_executor(int max_steps) {
    return [max_steps](const EnvSpec& spec, const TaskSolutionPair& pair) {
        ExecutionResult res;
        EnvState state = reset(spec, pair.goal_id);
        res.trajectory.traj_id = "validate:" + pair.source_task_id;
        res.trajectory.task_id = pair.source_task_id;
        for (const auto& action : pair.action_sequence) {
            if (state.done) break;
            StepResult sr = step(spec, state, action, max_steps);
            res.trajectory.steps.push_back(
                {action, sr.observation,
                 static_cast<int>(res.trajectory.steps.size())});
            res.cumulative_reward += sr.reward;
        }
        res.success = state.succeeded;
        res.trajectory.raw_reward = res.cumulative_reward;
        res.trajectory.score = normalize_score(res.cumulative_reward);
        res.trajectory.terminated_by =
            state.succeeded ? Termination::goal : Termination::step_limit;
        return res;
    };
}

Verdict validate_task(const TaskSolutionPair& pair, const EnvSpec& spec,
                      const TaskExecutor& executor) {
    ExecutionResult res;
    try {
        res = executor(spec, pair);
    } catch (const std::exception& e) {
        return {VerdictKind::reject, {}, std::string("execution error: ") + e.what()};
    }
    if (res.success) {
        return {VerdictKind::accept, res.trajectory, "objective completed"};
    }
    if (res.cumulative_reward > 0.0) {
        return {VerdictKind::retain_by_reward, res.trajectory,
                "objective failed but reward " + json(res.cumulative_reward).dump() +
                    " accrued"};
    }
    return {VerdictKind::reject, res.trajectory, "objective failed"};
}

EvolutionResult evolve_pool(const std::vector<TaskSolutionPair>& admissible,
                            TaskPool& pool, int created_at_step,
                            std::uint64_t env_seed) {
    EvolutionResult result;
    int appended = 0;
    for (const auto& pair : admissible) {
        TaskSpec spec;
        spec.task_id = "syn_" + std::to_string(created_at_step) + "_" +
                       std::to_string(appended);
        spec.query = pair.query;
        spec.env_seed = env_seed;
        spec.goal_id = pair.goal_id;
        spec.origin = TaskOrigin::synthesized;
        spec.source_signal = pair.source_signal;
        spec.created_at_step = created_at_step;
        if (pool.try_append(spec)) {
            result.appended.push_back(std::move(spec));
            appended += 1;
        } else {
            result.duplicates += 1;
        }
    }
    return result;
}

}  // namespace coevolve

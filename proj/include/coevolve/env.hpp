#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coevolve/core.hpp"

namespace coevolve {

// Deterministic tool-chaining environment. Tools consume owned resources and
// produce new ones; goals name a target resource. The dependency graph is
// acyclic by construction (a tool only requires resources produced by
// lower-indexed tools).
struct ToolDef {
    std::string name;
    std::vector<std::string> requires_resources;
    std::string produces;

    bool operator==(const ToolDef&) const = default;
};

struct EnvSpec {
    std::uint64_t seed = 0;
    std::vector<ToolDef> tools;
    std::map<std::string, std::string> goals;  // goal_id -> target resource

    bool operator==(const EnvSpec&) const = default;
};

struct EnvState {
    std::string goal_id;
    std::set<std::string> owned;
    int steps_taken = 0;
    bool done = false;
    bool succeeded = false;
};

struct StepResult {
    std::string observation;
    double reward = 0.0;
    bool done = false;
};

// Builds a seeded environment out of independent tool chains. The first chain
// has length max_chain_depth; further chains draw their length uniformly from
// [min(3, max_chain_depth), max_chain_depth] until tools run out. Goals sit at
// the tails of chains of length >= 3 when any exist, otherwise at every tail.
// Throws std::domain_error when num_tools < max_chain_depth or either is < 1.
EnvSpec generate_env(std::uint64_t seed, int num_tools, int max_chain_depth);

// Structural checks: known resources, acyclic requirements, every goal's
// target producible. Throws std::domain_error on violation.
void validate_env(const EnvSpec& spec);

// True when some goal's shortest solution has at least min_depth actions.
bool has_goal_with_min_depth(const EnvSpec& spec, int min_depth);

// Fresh state for the goal. Unknown goal_id is a domain error.
EnvState reset(const EnvSpec& spec, const std::string& goal_id);

// Applies one tool invocation. Unknown tool names and stepping a finished
// episode are domain errors. Unmet requirements leave owned resources
// unchanged and return an observation naming the first missing resource.
// Reward is 1 exactly when the goal resource is first owned; hitting
// max_steps without it finishes the episode with reward 0.
StepResult step(const EnvSpec& spec, EnvState& state, const ActionToken& action,
                int max_steps);

// Shortest action sequence that reaches the goal from a fresh reset (BFS over
// owned-resource sets, ties broken by tool index). Unknown goal is a domain
// error; an unreachable goal returns an empty optional.
std::optional<std::vector<ActionToken>> oracle_solve(const EnvSpec& spec,
                                                     const std::string& goal_id);

// Same search from an arbitrary owned set; used by the scripted explorer.
std::optional<std::vector<ActionToken>> oracle_solve_from(
    const EnvSpec& spec, const std::set<std::string>& owned,
    const std::string& goal_id);

// Tools whose requirements are met by the owned set, in spec order.
std::vector<int> executable_tools(const EnvSpec& spec,
                                  const std::set<std::string>& owned);

// Human-readable tool list plus goal statement; the initial observation fed to
// exploration backends.
std::string describe_env(const EnvSpec& spec, const std::string& goal_id);

void to_json(json& j, const ToolDef& t);
void from_json(const json& j, ToolDef& t);
void to_json(json& j, const EnvSpec& spec);
void from_json(const json& j, EnvSpec& spec);

}  // namespace coevolve

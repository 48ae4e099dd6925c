#include "coevolve/env.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "coevolve/rng.hpp"

namespace coevolve {

namespace {

std::string tool_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "tool_%02d", i);
    return buf;
}

std::string resource_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "res_%02d", i);
    return buf;
}

int tool_index(const EnvSpec& spec, const std::string& name) {
    for (std::size_t i = 0; i < spec.tools.size(); ++i) {
        if (spec.tools[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace

EnvSpec generate_env(std::uint64_t seed, int num_tools, int max_chain_depth) {
    if (num_tools < 1 || max_chain_depth < 1) {
        throw std::domain_error("generate_env: num_tools and max_chain_depth must be >= 1");
    }
    if (num_tools < max_chain_depth) {
        throw std::domain_error("generate_env: num_tools < max_chain_depth");
    }

    auto g = rng::make_engine(rng::derive(seed, "env-gen"));
    EnvSpec spec;
    spec.seed = seed;

    const int min_len = std::min(3, max_chain_depth);
    std::vector<int> chain_lengths;
    int assigned = 0;
    while (assigned < num_tools) {
        int len;
        if (chain_lengths.empty()) {
            len = max_chain_depth;
        } else {
            len = min_len +
                  static_cast<int>(rng::uniform_index(
                      g, static_cast<std::size_t>(max_chain_depth - min_len + 1)));
        }
        len = std::min(len, num_tools - assigned);
        chain_lengths.push_back(len);
        assigned += len;
    }

    int next_tool = 0;
    std::vector<std::pair<int, int>> tails;  // (tail tool index, chain length)
    for (int len : chain_lengths) {
        for (int pos = 0; pos < len; ++pos) {
            ToolDef t;
            t.name = tool_name(next_tool);
            t.produces = resource_name(next_tool);
            if (pos > 0) {
                t.requires_resources.push_back(resource_name(next_tool - 1));
            }
            spec.tools.push_back(std::move(t));
            ++next_tool;
        }
        tails.emplace_back(next_tool - 1, len);
    }

    bool any_deep = std::any_of(tails.begin(), tails.end(),
                                [](const auto& t) { return t.second >= 3; });
    int goal_idx = 0;
    for (const auto& [tail, len] : tails) {
        if (any_deep && len < 3) continue;
        char buf[16];
        std::snprintf(buf, sizeof buf, "goal_%02d", goal_idx++);
        spec.goals[buf] = spec.tools[static_cast<std::size_t>(tail)].produces;
    }

    validate_env(spec);
    return spec;
}

void validate_env(const EnvSpec& spec) {
    if (spec.tools.empty()) throw std::domain_error("env: no tools");
    std::unordered_set<std::string> names;
    std::unordered_map<std::string, std::size_t> producer;  // resource -> tool index
    for (std::size_t i = 0; i < spec.tools.size(); ++i) {
        if (!names.insert(spec.tools[i].name).second) {
            throw std::domain_error("env: duplicate tool name " + spec.tools[i].name);
        }
        producer.emplace(spec.tools[i].produces, i);
    }
    // Acyclic: every requirement must be producible by a lower-indexed tool.
    for (std::size_t i = 0; i < spec.tools.size(); ++i) {
        for (const auto& req : spec.tools[i].requires_resources) {
            auto it = producer.find(req);
            if (it == producer.end()) {
                throw std::domain_error("env: tool " + spec.tools[i].name +
                                        " requires unknown resource " + req);
            }
            if (it->second >= i) {
                throw std::domain_error("env: tool " + spec.tools[i].name +
                                        " requires resource produced at or after it");
            }
        }
    }
    if (spec.goals.empty()) throw std::domain_error("env: no goals");
    for (const auto& [goal_id, target] : spec.goals) {
        if (!producer.count(target)) {
            throw std::domain_error("env: goal " + goal_id +
                                    " targets unknown resource " + target);
        }
        // Index ordering makes every produced resource reachable from empty,
        // so a known producer suffices.
    }
}

bool has_goal_with_min_depth(const EnvSpec& spec, int min_depth) {
    for (const auto& [goal_id, target] : spec.goals) {
        auto plan = oracle_solve(spec, goal_id);
        if (plan && static_cast<int>(plan->size()) >= min_depth) return true;
    }
    return false;
}

EnvState reset(const EnvSpec& spec, const std::string& goal_id) {
    if (!spec.goals.count(goal_id)) {
        throw std::domain_error("reset: unknown goal " + goal_id);
    }
    EnvState s;
    s.goal_id = goal_id;
    return s;
}

StepResult step(const EnvSpec& spec, EnvState& state, const ActionToken& action,
                int max_steps) {
    if (state.done) throw std::domain_error("step: episode already finished");
    int idx = tool_index(spec, action.tool);
    if (idx < 0) throw std::domain_error("step: unknown tool " + action.tool);

    const ToolDef& tool = spec.tools[static_cast<std::size_t>(idx)];
    state.steps_taken += 1;

    StepResult out;
    bool ran = true;
    for (const auto& req : tool.requires_resources) {
        if (!state.owned.count(req)) {
            out.observation =
                "error: tool '" + tool.name + "' missing resource '" + req + "'";
            ran = false;
            break;
        }
    }
    if (ran) {
        bool fresh = state.owned.insert(tool.produces).second;
        out.observation = "produced resource '" + tool.produces + "'" +
                          (fresh ? "" : " (already owned)");
        const std::string& target = spec.goals.at(state.goal_id);
        if (fresh && tool.produces == target) {
            out.observation += "; goal reached";
            out.reward = 1.0;
            state.done = true;
            state.succeeded = true;
        }
    }
    if (!state.done && state.steps_taken >= max_steps) {
        state.done = true;
    }
    out.done = state.done;
    return out;
}

std::optional<std::vector<ActionToken>> oracle_solve_from(
    const EnvSpec& spec, const std::set<std::string>& owned,
    const std::string& goal_id) {
    auto goal_it = spec.goals.find(goal_id);
    if (goal_it == spec.goals.end()) {
        throw std::domain_error("oracle_solve: unknown goal " + goal_id);
    }
    const std::string& target = goal_it->second;
    if (spec.tools.size() > 63) {
        throw std::domain_error("oracle_solve: more than 63 tools unsupported");
    }

    // Owned sets as bitmasks over producing tools. Resources without a
    // producer cannot occur (validate_env), and initial owned resources map
    // onto producer bits.
    std::unordered_map<std::string, int> producer;
    for (std::size_t i = 0; i < spec.tools.size(); ++i) {
        producer.emplace(spec.tools[i].produces, static_cast<int>(i));
    }
    std::uint64_t start = 0;
    for (const auto& r : owned) {
        auto it = producer.find(r);
        if (it != producer.end()) start |= 1ull << it->second;
    }

    auto has_resource = [&](std::uint64_t mask, const std::string& r) {
        auto it = producer.find(r);
        return it != producer.end() && (mask >> it->second) & 1ull;
    };
    if (has_resource(start, target)) return std::vector<ActionToken>{};

    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, int>> parent;
    std::deque<std::uint64_t> frontier{start};
    parent.emplace(start, std::make_pair(start, -1));
    while (!frontier.empty()) {
        std::uint64_t cur = frontier.front();
        frontier.pop_front();
        for (std::size_t i = 0; i < spec.tools.size(); ++i) {
            const ToolDef& t = spec.tools[i];
            bool ok = true;
            for (const auto& req : t.requires_resources) {
                if (!has_resource(cur, req)) { ok = false; break; }
            }
            if (!ok) continue;
            std::uint64_t next = cur | (1ull << i);
            if (next == cur || parent.count(next)) continue;
            parent.emplace(next, std::make_pair(cur, static_cast<int>(i)));
            if (t.produces == target) {
                std::vector<ActionToken> plan;
                for (std::uint64_t at = next; at != start;) {
                    auto [prev, act] = parent.at(at);
                    plan.push_back({spec.tools[static_cast<std::size_t>(act)].name, {}});
                    at = prev;
                }
                std::reverse(plan.begin(), plan.end());
                return plan;
            }
            frontier.push_back(next);
        }
    }
    return std::nullopt;
}

std::optional<std::vector<ActionToken>> oracle_solve(const EnvSpec& spec,
                                                     const std::string& goal_id) {
    return oracle_solve_from(spec, {}, goal_id);
}

std::vector<int> executable_tools(const EnvSpec& spec,
                                  const std::set<std::string>& owned) {
    std::vector<int> out;
    for (std::size_t i = 0; i < spec.tools.size(); ++i) {
        bool ok = true;
        for (const auto& req : spec.tools[i].requires_resources) {
            if (!owned.count(req)) { ok = false; break; }
        }
        if (ok) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::string describe_env(const EnvSpec& spec, const std::string& goal_id) {
    auto it = spec.goals.find(goal_id);
    if (it == spec.goals.end()) {
        throw std::domain_error("describe_env: unknown goal " + goal_id);
    }
    std::string out = "Goal: obtain resource '" + it->second + "'.\nTools:\n";
    for (const auto& t : spec.tools) {
        out += "- " + t.name + ": produces '" + t.produces + "'";
        if (t.requires_resources.empty()) {
            out += ", no requirements\n";
        } else {
            out += ", requires";
            for (const auto& r : t.requires_resources) out += " '" + r + "'";
            out += "\n";
        }
    }
    return out;
}

void to_json(json& j, const ToolDef& t) {
    j = json{{"name", t.name},
             {"requires", t.requires_resources},
             {"produces", t.produces}};
}

void from_json(const json& j, ToolDef& t) {
    j.at("name").get_to(t.name);
    j.at("requires").get_to(t.requires_resources);
    j.at("produces").get_to(t.produces);
}

void to_json(json& j, const EnvSpec& spec) {
    j = json{{"seed", spec.seed}, {"tools", spec.tools}, {"goals", spec.goals}};
}

void from_json(const json& j, EnvSpec& spec) {
    j.at("seed").get_to(spec.seed);
    j.at("tools").get_to(spec.tools);
    j.at("goals").get_to(spec.goals);
}

}  // namespace coevolve

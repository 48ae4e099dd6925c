#include "coevolve/explorer.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "coevolve/prompts.hpp"
#include "coevolve/rng.hpp"

namespace coevolve {

namespace {

constexpr std::string_view kUnguidedGuidance =
    "Exploration Goal: Free Exploration\n"
    "Interact with the environment, chain the available tools, and accomplish "
    "any objective you can reach.";

std::string fmt_score(double v) { return json(v).dump(); }

std::string join(const Pattern& pattern, const char* sep) {
    if (pattern.empty()) return "(empty action sequence)";
    std::string out = pattern.front();
    for (std::size_t i = 1; i < pattern.size(); ++i) {
        out += sep;
        out += pattern[i];
    }
    return out;
}

// Owned resources after replaying the history's actions against the spec;
// mirrors env semantics (failed requirements change nothing).
std::set<std::string> replay_owned(const EnvSpec& spec,
                                   const std::vector<Step>& history) {
    std::set<std::string> owned;
    for (const Step& s : history) {
        for (const auto& tool : spec.tools) {
            if (tool.name != s.action.tool) continue;
            bool ok = true;
            for (const auto& req : tool.requires_resources) {
                if (!owned.count(req)) { ok = false; break; }
            }
            if (ok) owned.insert(tool.produces);
            break;
        }
    }
    return owned;
}

}  // namespace

ExplorationContext RuleBasedSummarizer::summarize(const SignalAnnotation& a,
                                                  const Trajectory& t) {
    ExplorationContext c;
    c.source = a;

    c.summary = "Task " + t.task_id + " trajectory " + t.traj_id + " scored " +
                fmt_score(t.score) + " after " +
                std::to_string(t.steps.size()) + " steps, ending by " +
                to_string(t.terminated_by) + "; flagged " + to_string(a.kind) + ".";

    int first_error = -1;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        if (t.steps[i].observation.rfind("error:", 0) == 0) {
            first_error = static_cast<int>(i);
            break;
        }
    }
    if (first_error >= 0) {
        c.failure_cause = "first failing step " + std::to_string(first_error) +
                          ": " + t.steps[static_cast<std::size_t>(first_error)].observation;
    } else if (t.score < 0.5) {
        c.failure_cause = "no explicit tool error; the episode ended by " +
                          std::string(to_string(t.terminated_by)) +
                          " without reaching the goal.";
    } else {
        c.failure_cause =
            "no failing step in this trajectory; the weakness shows as "
            "instability across attempts.";
    }

    std::visit(
        [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, ForgettingEvidence>) {
                c.instability_pattern = "score dropped from " +
                                        fmt_score(e.prior_score) + " to " +
                                        fmt_score(e.current_score) +
                                        " within the recent window.";
            } else if constexpr (std::is_same_v<E, BoundaryEvidence>) {
                c.instability_pattern =
                    "one sampling group split into success (score " +
                    fmt_score(e.success_score) + ") and failure (score " +
                    fmt_score(e.failure_score) + ").";
            } else {
                c.instability_pattern =
                    "pattern [" + join(e.pattern, " -> ") + "] seen " +
                    std::to_string(e.count) + " times in " +
                    std::to_string(e.total) +
                    " observations, below the rarity threshold.";
            }
        },
        a.evidence);

    if (a.kind == SignalKind::rare) {
        c.focus_pattern = {join(std::get<RareEvidence>(a.evidence).pattern, " -> ")};
    } else {
        for (const Step& s : t.steps) {
            if (std::find(c.focus_pattern.begin(), c.focus_pattern.end(),
                          s.action.tool) == c.focus_pattern.end()) {
                c.focus_pattern.push_back(s.action.tool);
            }
        }
        if (c.focus_pattern.empty()) c.focus_pattern = {"(no actions taken)"};
    }

    switch (a.kind) {
        case SignalKind::forgetting:
            c.exploration_objectives = {
                "re-practice the previously successful routine for task " + t.task_id,
                "vary the order of unrelated steps while keeping the core chain intact"};
            break;
        case SignalKind::boundary:
            c.exploration_objectives = {
                "find the minimal difference between succeeding and failing "
                "attempts at task " + t.task_id,
                "collect both succeeding and failing variants of the same plan"};
            break;
        case SignalKind::rare:
            c.exploration_objectives = {
                "reproduce the rare pattern and its variations on task " + t.task_id,
                "document which variations still reach the goal"};
            break;
    }

    for (const Step& s : t.steps) {
        if (s.observation.rfind("error:", 0) != 0) continue;
        std::string entry = "calling '" + s.action.tool +
                            "' before its requirements are met";
        if (std::find(c.do_not_repeat.begin(), c.do_not_repeat.end(), entry) ==
            c.do_not_repeat.end()) {
            c.do_not_repeat.push_back(entry);
        }
    }
    if (c.do_not_repeat.empty()) c.do_not_repeat = {"none observed"};
    return c;
}

ExplorationContext build_context(const SignalAnnotation& annotation,
                                 const Trajectory& trajectory,
                                 ContextSummarizer& summarizer) {
    if (annotation.traj_id != trajectory.traj_id ||
        annotation.task_id != trajectory.task_id) {
        throw std::domain_error("build_context: annotation does not reference trajectory");
    }
    ExplorationContext c = summarizer.summarize(annotation, trajectory);
    c.source = annotation;
    if (c.summary.empty() || c.failure_cause.empty() ||
        c.instability_pattern.empty() || c.focus_pattern.empty() ||
        c.exploration_objectives.empty() || c.do_not_repeat.empty()) {
        throw std::domain_error("build_context: summarizer left a field empty");
    }
    return c;
}

std::string render_guidance(const ExplorationContext& context, SignalKind kind) {
    if (kind != context.source.kind) {
        throw std::domain_error("render_guidance: kind does not match context source");
    }
    json ctx{{"summary", context.summary},
             {"failure_cause", context.failure_cause},
             {"instability_pattern", context.instability_pattern},
             {"focus_pattern", context.focus_pattern},
             {"exploration_objectives", context.exploration_objectives},
             {"do_not_repeat", context.do_not_repeat}};
    std::string_view tmpl;
    switch (kind) {
        case SignalKind::forgetting: tmpl = prompts::guidance_forgetting(); break;
        case SignalKind::boundary: tmpl = prompts::guidance_boundary(); break;
        case SignalKind::rare: tmpl = prompts::guidance_rare(); break;
    }
    return prompts::render_template(tmpl, {{"context", ctx.dump(2)}});
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------
namespace {

class ScriptedBackend final : public ExplorationBackend {
public:
    explicit ScriptedBackend(double noise_rate) : noise_rate_(noise_rate) {
        if (noise_rate < 0.0 || noise_rate > 1.0) {
            throw std::domain_error("scripted_backend: noise_rate outside [0, 1]");
        }
    }

    void begin_episode(const EnvSpec& spec, const TaskSpec& task,
                       std::uint64_t seed) override {
        spec_ = &spec;
        goal_ = task.goal_id;
        engine_ = rng::make_engine(rng::derive(seed, "scripted"));
    }

    std::optional<ActionToken> choose_action(
        const std::string&, const std::string&,
        const std::vector<Step>& history) override {
        const EnvSpec& spec = *spec_;
        auto owned = replay_owned(spec, history);
        int next = -1;
        if (auto plan = oracle_solve_from(spec, owned, goal_); plan && !plan->empty()) {
            for (std::size_t i = 0; i < spec.tools.size(); ++i) {
                if (spec.tools[i].name == plan->front().tool) {
                    next = static_cast<int>(i);
                    break;
                }
            }
        }
        bool deviate = rng::uniform01(engine_) < noise_rate_;
        if (!deviate && next >= 0) {
            return ActionToken{spec.tools[static_cast<std::size_t>(next)].name, {}};
        }
        // Off path: prefer executable tools other than the oracle step, fall
        // back to any other tool, then to the oracle step itself.
        std::vector<int> pool;
        for (int i : executable_tools(spec, owned)) {
            if (i != next) pool.push_back(i);
        }
        if (pool.empty()) {
            for (std::size_t i = 0; i < spec.tools.size(); ++i) {
                if (static_cast<int>(i) != next) pool.push_back(static_cast<int>(i));
            }
        }
        if (pool.empty()) pool.push_back(next < 0 ? 0 : next);
        int pick = pool[rng::uniform_index(engine_, pool.size())];
        return ActionToken{spec.tools[static_cast<std::size_t>(pick)].name, {}};
    }

private:
    double noise_rate_;
    const EnvSpec* spec_ = nullptr;
    std::string goal_;
    std::mt19937_64 engine_;
};

class RandomWalkBackend final : public ExplorationBackend {
public:
    void begin_episode(const EnvSpec& spec, const TaskSpec&,
                       std::uint64_t seed) override {
        spec_ = &spec;
        engine_ = rng::make_engine(rng::derive(seed, "walk"));
    }

    std::optional<ActionToken> choose_action(
        const std::string&, const std::string&,
        const std::vector<Step>& history) override {
        const EnvSpec& spec = *spec_;
        auto owned = replay_owned(spec, history);
        auto pool = executable_tools(spec, owned);
        if (pool.empty()) {
            pool.resize(spec.tools.size());
            for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
        }
        int pick = pool[rng::uniform_index(engine_, pool.size())];
        return ActionToken{spec.tools[static_cast<std::size_t>(pick)].name, {}};
    }

private:
    const EnvSpec* spec_ = nullptr;
    std::mt19937_64 engine_;
};

}  // namespace

std::unique_ptr<ExplorationBackend> scripted_backend(double noise_rate) {
    return std::make_unique<ScriptedBackend>(noise_rate);
}

std::unique_ptr<ExplorationBackend> random_walk_backend() {
    return std::make_unique<RandomWalkBackend>();
}

// ---------------------------------------------------------------------------
// Exploration loop
// ---------------------------------------------------------------------------
ExplorationRun explore(const std::optional<ExplorationContext>& context,
                       const EnvSpec& spec, const TaskSpec& task, int rounds,
                       int steps, ExplorationBackend& backend,
                       std::uint64_t seed) {
    if (rounds < 1 || steps < 1) {
        throw std::domain_error("explore: rounds and steps must be >= 1");
    }
    std::string guidance = context
                               ? render_guidance(*context, context->source.kind)
                               : std::string(kUnguidedGuidance);
    std::string description = describe_env(spec, task.goal_id);

    ExplorationRun run;
    for (int r = 0; r < rounds; ++r) {
        std::uint64_t round_seed =
            rng::derive(seed, "explore-round", static_cast<std::uint64_t>(r));
        backend.begin_episode(spec, task, round_seed);
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "#%016llx",
                      static_cast<unsigned long long>(round_seed));
        std::string rollout_id = task.task_id + idbuf;

        EnvState state = reset(spec, task.goal_id);
        std::vector<Step> history;
        std::vector<ExplorationTriplet> triplets;
        bool aborted = false;
        for (int s = 0; s < steps && !state.done; ++s) {
            auto action = backend.choose_action(guidance, description, history);
            if (!action) { aborted = true; break; }
            StepResult res;
            try {
                res = step(spec, state, *action, steps);
            } catch (const std::domain_error&) {
                aborted = true;  // backend emitted a token outside the env
                break;
            }
            history.push_back({*action, res.observation, s});
            triplets.push_back({*action, res.observation, rollout_id,
                                task.task_id, s});
        }
        if (aborted) {
            run.aborted_rounds += 1;
            continue;
        }
        run.triplets.insert(run.triplets.end(), triplets.begin(), triplets.end());
    }
    return run;
}

// ---------------------------------------------------------------------------
// Remote plumbing
// ---------------------------------------------------------------------------
namespace {

// Splits "http://host:port/path" into client base and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::domain_error("remote endpoint: url must include a scheme");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ChatClient::ChatClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::optional<std::string> ChatClient::complete(
    const std::vector<ChatMessage>& messages) const {
    auto [base, path] = split_url(endpoint_.url);
    httplib::Client client(base);
    client.set_connection_timeout(endpoint_.timeout_seconds);
    client.set_read_timeout(endpoint_.timeout_seconds);

    httplib::Headers headers;
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str());
        key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body{{"model", endpoint_.model}, {"messages", json::array()}};
    for (const auto& m : messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    try {
        json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::optional<ActionToken> parse_action_reply(const std::string& reply) {
    const std::string open = "<action>";
    const std::string close = "</action>";
    auto start = reply.find(open);
    if (start == std::string::npos) return std::nullopt;
    start += open.size();
    auto end = reply.find(close, start);
    if (end == std::string::npos) return std::nullopt;

    std::istringstream in(reply.substr(start, end - start));
    std::string tool;
    if (!(in >> tool)) return std::nullopt;
    ActionToken token{tool, {}};
    std::string arg;
    while (in >> arg) token.args.push_back(arg);
    return token;
}

RemoteBackend::RemoteBackend(RemoteEndpoint endpoint)
    : client_(std::move(endpoint)) {}

void RemoteBackend::begin_episode(const EnvSpec& spec, const TaskSpec&,
                                  std::uint64_t) {
    spec_ = &spec;
}

std::optional<ActionToken> RemoteBackend::choose_action(
    const std::string& guidance, const std::string& env_description,
    const std::vector<Step>& history) {
    if (!spec_) throw std::domain_error("RemoteBackend: begin_episode not called");

    std::string system = prompts::render_template(
        prompts::exploration_system(),
        {{"action_format", std::string(prompts::action_format())}});
    std::string history_text;
    if (history.empty()) {
        history_text = "(no steps taken yet)";
    } else {
        for (const Step& s : history) {
            history_text += "step " + std::to_string(s.step_index) + ": " +
                            s.action.tool + " -> " + s.observation + "\n";
        }
    }
    std::string user = prompts::render_template(
        prompts::exploration_user(), {{"exploration_guidance", guidance},
                                      {"initial_obs", env_description},
                                      {"history_text", history_text}});

    std::vector<ChatMessage> messages{{"system", system}, {"user", user}};
    for (int attempt = 0; attempt < client_.endpoint().max_attempts; ++attempt) {
        auto reply = client_.complete(messages);
        if (reply) {
            if (auto token = parse_action_reply(*reply)) {
                bool known = std::any_of(
                    spec_->tools.begin(), spec_->tools.end(),
                    [&](const ToolDef& t) { return t.name == token->tool; });
                if (known) return token;
            }
            messages.push_back({"assistant", *reply});
        }
        retries_ += 1;
        messages.push_back(
            {"user", "Your previous reply did not contain a valid action. " +
                         std::string(prompts::action_format())});
    }
    return std::nullopt;
}

RemoteSummarizer::RemoteSummarizer(RemoteEndpoint endpoint)
    : client_(std::move(endpoint)) {}

ExplorationContext RemoteSummarizer::summarize(const SignalAnnotation& annotation,
                                               const Trajectory& trajectory) {
    std::string prompt = prompts::render_template(
        prompts::context_summary(),
        {{"signal", json(annotation).dump()},
         {"trajectory_context", json(trajectory).dump(2)}});

    for (int attempt = 0; attempt < client_.endpoint().max_attempts; ++attempt) {
        auto reply = client_.complete({{"user", prompt}});
        if (!reply) continue;
        auto open = reply->find('{');
        auto close = reply->rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) {
            continue;
        }
        try {
            json j = json::parse(reply->substr(open, close - open + 1));
            ExplorationContext c;
            c.summary = j.at("summary").get<std::string>();
            c.failure_cause = j.at("failure_cause").get<std::string>();
            c.instability_pattern = j.at("instability_pattern").get<std::string>();
            c.focus_pattern = j.at("focus_pattern").get<std::vector<std::string>>();
            c.exploration_objectives =
                j.at("exploration_objectives").get<std::vector<std::string>>();
            c.do_not_repeat = j.at("do_not_repeat").get<std::vector<std::string>>();
            c.source = annotation;
            if (c.summary.empty() || c.failure_cause.empty() ||
                c.instability_pattern.empty() || c.focus_pattern.empty() ||
                c.exploration_objectives.empty() || c.do_not_repeat.empty()) {
                continue;
            }
            return c;
        } catch (const json::exception&) {
            continue;
        }
    }
    fallbacks_ += 1;
    return fallback_.summarize(annotation, trajectory);
}

}  // namespace coevolve

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coevolve/core.hpp"
#include "coevolve/env.hpp"

namespace coevolve {

// Structured exploration context distilled from a signal annotation plus its
// trajectory; the fields mirror the summarization template's JSON schema.
struct ExplorationContext {
    std::string summary;
    std::string failure_cause;
    std::string instability_pattern;
    std::vector<std::string> focus_pattern;
    std::vector<std::string> exploration_objectives;
    std::vector<std::string> do_not_repeat;
    SignalAnnotation source;
};

class ContextSummarizer {
public:
    virtual ~ContextSummarizer() = default;
    virtual ExplorationContext summarize(const SignalAnnotation& annotation,
                                         const Trajectory& trajectory) = 0;
};

// Deterministic field mapping from the annotation evidence and trajectory.
class RuleBasedSummarizer final : public ContextSummarizer {
public:
    ExplorationContext summarize(const SignalAnnotation& annotation,
                                 const Trajectory& trajectory) override;
};

// Validates that the annotation references the trajectory, runs the
// summarizer, stamps the source annotation, and rejects empty fields.
ExplorationContext build_context(const SignalAnnotation& annotation,
                                 const Trajectory& trajectory,
                                 ContextSummarizer& summarizer);

// Renders the signal kind's guidance template with {context} filled by the
// context's canonical JSON rendering. kind must match context.source.kind.
std::string render_guidance(const ExplorationContext& context, SignalKind kind);

// Action supplier for exploration rollouts. begin_episode reseeds stateful
// backends so rounds stay independent; choose_action returns an empty
// optional only after the backend's own retry budget is exhausted, and any
// returned token names a tool of the episode's environment.
class ExplorationBackend {
public:
    virtual ~ExplorationBackend() = default;
    virtual void begin_episode(const EnvSpec& spec, const TaskSpec& task,
                               std::uint64_t seed) = 0;
    virtual std::optional<ActionToken> choose_action(
        const std::string& guidance, const std::string& env_description,
        const std::vector<Step>& history) = 0;
};

// Follows the shortest path to the episode goal, deviating to a valid
// off-path tool with probability noise_rate (never the oracle's next step at
// noise_rate 1 while an alternative exists).
std::unique_ptr<ExplorationBackend> scripted_backend(double noise_rate);

// Uniform choice among currently executable tools; the unguided pool-seeding
// explorer.
std::unique_ptr<ExplorationBackend> random_walk_backend();

struct ExplorationRun {
    std::vector<ExplorationTriplet> triplets;
    int aborted_rounds = 0;
};

// Runs `rounds` rollouts of at most `steps` env interactions, each a fresh
// episode with an independent per-round seed and a fresh rollout_id. Guided
// exploration renders the context's guidance; an absent context uses a
// generic free-exploration goal. A backend failure (or invalid action)
// discards that round only.
ExplorationRun explore(const std::optional<ExplorationContext>& context,
                       const EnvSpec& spec, const TaskSpec& task, int rounds,
                       int steps, ExplorationBackend& backend,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Remote chat-completion plumbing
// ---------------------------------------------------------------------------
struct RemoteEndpoint {
    std::string url;  // e.g. http://127.0.0.1:8089/v1/chat/completions
    std::string model = "explorer";
    std::string api_key_env = "COEVOLVE_API_KEY";  // bearer token env var
    int max_attempts = 3;
    int timeout_seconds = 30;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

class ChatClient {
public:
    explicit ChatClient(RemoteEndpoint endpoint);
    // One completion call; empty optional on transport or schema failure.
    std::optional<std::string> complete(const std::vector<ChatMessage>& messages) const;
    const RemoteEndpoint& endpoint() const { return endpoint_; }

private:
    RemoteEndpoint endpoint_;
};

// Prompts a chat endpoint with the exploration templates and parses the
// <action>...</action> reply; malformed or unknown-tool replies are retried
// with corrective feedback up to max_attempts before the round gives up.
class RemoteBackend final : public ExplorationBackend {
public:
    explicit RemoteBackend(RemoteEndpoint endpoint);
    void begin_episode(const EnvSpec& spec, const TaskSpec& task,
                       std::uint64_t seed) override;
    std::optional<ActionToken> choose_action(
        const std::string& guidance, const std::string& env_description,
        const std::vector<Step>& history) override;
    long long total_retries() const { return retries_; }

private:
    ChatClient client_;
    const EnvSpec* spec_ = nullptr;
    long long retries_ = 0;
};

// Renders the summarization template for the remote path and parses the JSON
// reply; falls back to the rule-based mapping after max_attempts failures.
class RemoteSummarizer final : public ContextSummarizer {
public:
    explicit RemoteSummarizer(RemoteEndpoint endpoint);
    ExplorationContext summarize(const SignalAnnotation& annotation,
                                 const Trajectory& trajectory) override;
    long long fallback_count() const { return fallbacks_; }

private:
    ChatClient client_;
    RuleBasedSummarizer fallback_;
    long long fallbacks_ = 0;
};

// First <action>...</action> span of a reply parsed into a token
// (whitespace-separated tool name and arguments); empty when absent.
std::optional<ActionToken> parse_action_reply(const std::string& reply);

}  // namespace coevolve

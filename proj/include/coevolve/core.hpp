#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace coevolve {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration. Defaults mirror the project's reference hyperparameters;
// load_config() in orchestrator.hpp fills these from a key-value file.
// ---------------------------------------------------------------------------
struct RunConfig {
    double learning_rate = 1e-6;
    int group_size = 8;          // trajectories sampled per task
    int batch_size = 32;         // tasks per training iteration
    double clip_low = 0.20;      // ratio clipped to [1 - clip_low, 1 + clip_high]
    double clip_high = 0.28;
    double kl_coeff = 1e-3;
    double rollout_temperature = 0.9;
    int max_steps = 30;          // env interaction cap; exceeding it is failure
    int window_size = 10;        // W, score history window
    double rare_threshold = 5.0; // theta, percent
    long long rare_min_total = 100; // N_min, pattern observations before rare fires
    int init_pool_size = 100;    // N
    int gen_frequency = 10;      // F, iterations between pool evolutions
    int total_steps = 120;
    std::uint64_t seed = 0;
    double dedup_threshold = 0.95;
    double adv_epsilon = 1e-8;

    // Artifact plumbing (environment shape, exploration budgets, policy table).
    int env_tools = 12;
    int env_depth = 4;
    int pattern_length = 3;      // n-gram length for rare-pattern mining
    int explore_rounds = 3;      // R, rollouts per exploration phase entry
    int explore_steps = 0;       // S; 0 means max_steps
    double explore_noise = 0.25; // scripted backend off-path probability
    int init_explore_steps = 12; // step cap for unguided pool-seeding walks
    int init_round_budget = 50000;
    int signal_budget = 16;      // annotations acted on per evolution phase
    int eval_tasks = 48;
    int policy_buckets = 65536;
    int embed_dim = 32;
    int sr_k = 3;
    int hist_bins = 10;
};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------
enum class TaskOrigin { initial, synthesized };
enum class SignalKind { forgetting, boundary, rare };

struct TaskSpec {
    std::string task_id;
    std::string query;
    std::uint64_t env_seed = 0;
    std::string goal_id;
    TaskOrigin origin = TaskOrigin::initial;
    // Present for signal-conditioned synthesis; absent means unguided.
    std::optional<SignalKind> source_signal;
    int created_at_step = 0;

    bool operator==(const TaskSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------
struct ActionToken {
    std::string tool;
    std::vector<std::string> args;

    bool operator==(const ActionToken&) const = default;
};

struct Step {
    ActionToken action;
    std::string observation;
    int step_index = 0;

    bool operator==(const Step&) const = default;
};

enum class Termination { goal, step_limit, invalid };

struct Trajectory {
    std::string traj_id;
    std::string task_id;
    std::vector<Step> steps;
    double raw_reward = 0.0;
    double score = 0.0;      // normalized to [0, 1]
    int group_index = 0;     // position within the K-trajectory group
    int train_step = 0;
    Termination terminated_by = Termination::step_limit;

    bool operator==(const Trajectory&) const = default;
};

// ---------------------------------------------------------------------------
// Weakness signals
// ---------------------------------------------------------------------------
struct ForgettingEvidence {
    double prior_score = 0.0;   // witnessing s_i >= 0.5 from the window
    double current_score = 0.0; // s_now < 0.5

    bool operator==(const ForgettingEvidence&) const = default;
};

struct BoundaryEvidence {
    int success_index = 0;  // group indices of one success/failure witness pair
    int failure_index = 0;
    double success_score = 0.0;
    double failure_score = 0.0;

    bool operator==(const BoundaryEvidence&) const = default;
};

using Pattern = std::vector<std::string>;  // contiguous tool-name n-gram

struct RareEvidence {
    Pattern pattern;
    long long count = 0;  // occurrences of the pattern, this trajectory included
    long long total = 0;  // total pattern observations N

    bool operator==(const RareEvidence&) const = default;
};

using SignalEvidence =
    std::variant<ForgettingEvidence, BoundaryEvidence, RareEvidence>;

struct SignalAnnotation {
    SignalKind kind = SignalKind::forgetting;
    std::string traj_id;
    std::string task_id;
    SignalEvidence evidence;
    int detected_at_step = 0;

    bool operator==(const SignalAnnotation&) const = default;
};

// ---------------------------------------------------------------------------
// Exploration and synthesis carriers
// ---------------------------------------------------------------------------
struct ExplorationTriplet {
    ActionToken action;
    std::string observation;
    std::string rollout_id;
    std::string source_task_id;
    int step_index = 0;

    bool operator==(const ExplorationTriplet&) const = default;
};

struct TaskSolutionPair {
    std::string query;
    std::vector<ActionToken> action_sequence;
    std::string source_task_id;
    // Absent means the pair came from unguided exploration.
    std::optional<SignalKind> source_signal;
    std::string goal_id;

    bool operator==(const TaskSolutionPair&) const = default;
};

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Clamps raw env reward into [0, 1]. Non-finite rewards are a domain error.
double normalize_score(double raw_reward);

// Contract checks used by tests and by the serialization layer. Throws
// std::domain_error on violation.
void validate_trajectory(const Trajectory& t);

const char* to_string(SignalKind k);
const char* to_string(TaskOrigin o);
const char* to_string(Termination t);
SignalKind signal_kind_from_string(const std::string& s);
TaskOrigin task_origin_from_string(const std::string& s);
Termination termination_from_string(const std::string& s);

// JSON codecs. encode_trajectory emits a single line (no interior newlines)
// suitable for newline-delimited logs; decode_trajectory accepts exactly that.
void to_json(json& j, const ActionToken& a);
void from_json(const json& j, ActionToken& a);
void to_json(json& j, const Step& s);
void from_json(const json& j, Step& s);
void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);
void to_json(json& j, const TaskSpec& t);
void from_json(const json& j, TaskSpec& t);
void to_json(json& j, const SignalAnnotation& a);
void from_json(const json& j, SignalAnnotation& a);
void to_json(json& j, const ExplorationTriplet& t);
void from_json(const json& j, ExplorationTriplet& t);
void to_json(json& j, const TaskSolutionPair& p);
void from_json(const json& j, TaskSolutionPair& p);
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

std::string encode_trajectory(const Trajectory& t);
Trajectory decode_trajectory(const std::string& line);

}  // namespace coevolve

#include "coevolve/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coevolve {

double normalize_score(double raw_reward) {
    if (!std::isfinite(raw_reward)) {
        throw std::domain_error("normalize_score: reward must be finite");
    }
    return std::clamp(raw_reward, 0.0, 1.0);
}

void validate_trajectory(const Trajectory& t) {
    if (t.score < 0.0 || t.score > 1.0) {
        throw std::domain_error("trajectory " + t.traj_id + ": score outside [0, 1]");
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        if (t.steps[i].step_index != static_cast<int>(i)) {
            throw std::domain_error("trajectory " + t.traj_id +
                                    ": step_index not consecutive from 0");
        }
    }
    if (t.terminated_by == Termination::step_limit && t.raw_reward != 0.0) {
        throw std::domain_error("trajectory " + t.traj_id +
                                ": step_limit termination requires zero reward");
    }
}

const char* to_string(SignalKind k) {
    switch (k) {
        case SignalKind::forgetting: return "forgetting";
        case SignalKind::boundary: return "boundary";
        case SignalKind::rare: return "rare";
    }
    throw std::domain_error("unknown SignalKind");
}

const char* to_string(TaskOrigin o) {
    switch (o) {
        case TaskOrigin::initial: return "initial";
        case TaskOrigin::synthesized: return "synthesized";
    }
    throw std::domain_error("unknown TaskOrigin");
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::goal: return "goal";
        case Termination::step_limit: return "step_limit";
        case Termination::invalid: return "invalid";
    }
    throw std::domain_error("unknown Termination");
}

SignalKind signal_kind_from_string(const std::string& s) {
    if (s == "forgetting") return SignalKind::forgetting;
    if (s == "boundary") return SignalKind::boundary;
    if (s == "rare") return SignalKind::rare;
    throw std::domain_error("unknown signal kind: " + s);
}

TaskOrigin task_origin_from_string(const std::string& s) {
    if (s == "initial") return TaskOrigin::initial;
    if (s == "synthesized") return TaskOrigin::synthesized;
    throw std::domain_error("unknown task origin: " + s);
}

Termination termination_from_string(const std::string& s) {
    if (s == "goal") return Termination::goal;
    if (s == "step_limit") return Termination::step_limit;
    if (s == "invalid") return Termination::invalid;
    throw std::domain_error("unknown termination: " + s);
}

void to_json(json& j, const ActionToken& a) {
    j = json{{"tool", a.tool}, {"args", a.args}};
}

void from_json(const json& j, ActionToken& a) {
    j.at("tool").get_to(a.tool);
    j.at("args").get_to(a.args);
}

void to_json(json& j, const Step& s) {
    j = json{{"action", s.action},
             {"observation", s.observation},
             {"step_index", s.step_index}};
}

void from_json(const json& j, Step& s) {
    j.at("action").get_to(s.action);
    j.at("observation").get_to(s.observation);
    j.at("step_index").get_to(s.step_index);
}

void to_json(json& j, const Trajectory& t) {
    j = json{{"traj_id", t.traj_id},
             {"task_id", t.task_id},
             {"steps", t.steps},
             {"raw_reward", t.raw_reward},
             {"score", t.score},
             {"group_index", t.group_index},
             {"train_step", t.train_step},
             {"terminated_by", to_string(t.terminated_by)}};
}

void from_json(const json& j, Trajectory& t) {
    j.at("traj_id").get_to(t.traj_id);
    j.at("task_id").get_to(t.task_id);
    j.at("steps").get_to(t.steps);
    j.at("raw_reward").get_to(t.raw_reward);
    j.at("score").get_to(t.score);
    j.at("group_index").get_to(t.group_index);
    j.at("train_step").get_to(t.train_step);
    t.terminated_by = termination_from_string(j.at("terminated_by").get<std::string>());
}

void to_json(json& j, const TaskSpec& t) {
    j = json{{"task_id", t.task_id},
             {"query", t.query},
             {"env_seed", t.env_seed},
             {"goal_id", t.goal_id},
             {"origin", to_string(t.origin)},
             {"created_at_step", t.created_at_step}};
    j["source_signal"] =
        t.source_signal ? json(to_string(*t.source_signal)) : json(nullptr);
}

void from_json(const json& j, TaskSpec& t) {
    j.at("task_id").get_to(t.task_id);
    j.at("query").get_to(t.query);
    j.at("env_seed").get_to(t.env_seed);
    j.at("goal_id").get_to(t.goal_id);
    t.origin = task_origin_from_string(j.at("origin").get<std::string>());
    const auto& sig = j.at("source_signal");
    t.source_signal = sig.is_null()
                          ? std::nullopt
                          : std::optional(signal_kind_from_string(sig.get<std::string>()));
    j.at("created_at_step").get_to(t.created_at_step);
}

void to_json(json& j, const SignalAnnotation& a) {
    json evidence;
    std::visit(
        [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, ForgettingEvidence>) {
                evidence = json{{"prior_score", e.prior_score},
                                {"current_score", e.current_score}};
            } else if constexpr (std::is_same_v<E, BoundaryEvidence>) {
                evidence = json{{"success_index", e.success_index},
                                {"failure_index", e.failure_index},
                                {"success_score", e.success_score},
                                {"failure_score", e.failure_score}};
            } else {
                evidence = json{{"pattern", e.pattern},
                                {"count", e.count},
                                {"total", e.total}};
            }
        },
        a.evidence);
    j = json{{"kind", to_string(a.kind)},
             {"traj_id", a.traj_id},
             {"task_id", a.task_id},
             {"evidence", evidence},
             {"detected_at_step", a.detected_at_step}};
}

void from_json(const json& j, SignalAnnotation& a) {
    a.kind = signal_kind_from_string(j.at("kind").get<std::string>());
    j.at("traj_id").get_to(a.traj_id);
    j.at("task_id").get_to(a.task_id);
    const auto& e = j.at("evidence");
    switch (a.kind) {
        case SignalKind::forgetting:
            a.evidence = ForgettingEvidence{e.at("prior_score").get<double>(),
                                            e.at("current_score").get<double>()};
            break;
        case SignalKind::boundary:
            a.evidence = BoundaryEvidence{e.at("success_index").get<int>(),
                                          e.at("failure_index").get<int>(),
                                          e.at("success_score").get<double>(),
                                          e.at("failure_score").get<double>()};
            break;
        case SignalKind::rare:
            a.evidence = RareEvidence{e.at("pattern").get<Pattern>(),
                                      e.at("count").get<long long>(),
                                      e.at("total").get<long long>()};
            break;
    }
    j.at("detected_at_step").get_to(a.detected_at_step);
}

void to_json(json& j, const ExplorationTriplet& t) {
    j = json{{"action", t.action},
             {"observation", t.observation},
             {"rollout_id", t.rollout_id},
             {"source_task_id", t.source_task_id},
             {"step_index", t.step_index}};
}

void from_json(const json& j, ExplorationTriplet& t) {
    j.at("action").get_to(t.action);
    j.at("observation").get_to(t.observation);
    j.at("rollout_id").get_to(t.rollout_id);
    j.at("source_task_id").get_to(t.source_task_id);
    j.at("step_index").get_to(t.step_index);
}

void to_json(json& j, const TaskSolutionPair& p) {
    j = json{{"query", p.query},
             {"action_sequence", p.action_sequence},
             {"source_task_id", p.source_task_id},
             {"goal_id", p.goal_id}};
    j["source_signal"] =
        p.source_signal ? json(to_string(*p.source_signal)) : json(nullptr);
}

void from_json(const json& j, TaskSolutionPair& p) {
    j.at("query").get_to(p.query);
    j.at("action_sequence").get_to(p.action_sequence);
    j.at("source_task_id").get_to(p.source_task_id);
    const auto& sig = j.at("source_signal");
    p.source_signal = sig.is_null()
                          ? std::nullopt
                          : std::optional(signal_kind_from_string(sig.get<std::string>()));
    j.at("goal_id").get_to(p.goal_id);
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"learning_rate", c.learning_rate},
             {"group_size", c.group_size},
             {"batch_size", c.batch_size},
             {"clip_low", c.clip_low},
             {"clip_high", c.clip_high},
             {"kl_coeff", c.kl_coeff},
             {"rollout_temperature", c.rollout_temperature},
             {"max_steps", c.max_steps},
             {"window_size", c.window_size},
             {"rare_threshold", c.rare_threshold},
             {"rare_min_total", c.rare_min_total},
             {"init_pool_size", c.init_pool_size},
             {"gen_frequency", c.gen_frequency},
             {"total_steps", c.total_steps},
             {"seed", c.seed},
             {"dedup_threshold", c.dedup_threshold},
             {"adv_epsilon", c.adv_epsilon},
             {"env_tools", c.env_tools},
             {"env_depth", c.env_depth},
             {"pattern_length", c.pattern_length},
             {"explore_rounds", c.explore_rounds},
             {"explore_steps", c.explore_steps},
             {"explore_noise", c.explore_noise},
             {"init_explore_steps", c.init_explore_steps},
             {"init_round_budget", c.init_round_budget},
             {"signal_budget", c.signal_budget},
             {"eval_tasks", c.eval_tasks},
             {"policy_buckets", c.policy_buckets},
             {"embed_dim", c.embed_dim},
             {"sr_k", c.sr_k},
             {"hist_bins", c.hist_bins}};
}

void from_json(const json& j, RunConfig& c) {
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("group_size").get_to(c.group_size);
    j.at("batch_size").get_to(c.batch_size);
    j.at("clip_low").get_to(c.clip_low);
    j.at("clip_high").get_to(c.clip_high);
    j.at("kl_coeff").get_to(c.kl_coeff);
    j.at("rollout_temperature").get_to(c.rollout_temperature);
    j.at("max_steps").get_to(c.max_steps);
    j.at("window_size").get_to(c.window_size);
    j.at("rare_threshold").get_to(c.rare_threshold);
    j.at("rare_min_total").get_to(c.rare_min_total);
    j.at("init_pool_size").get_to(c.init_pool_size);
    j.at("gen_frequency").get_to(c.gen_frequency);
    j.at("total_steps").get_to(c.total_steps);
    j.at("seed").get_to(c.seed);
    j.at("dedup_threshold").get_to(c.dedup_threshold);
    j.at("adv_epsilon").get_to(c.adv_epsilon);
    j.at("env_tools").get_to(c.env_tools);
    j.at("env_depth").get_to(c.env_depth);
    j.at("pattern_length").get_to(c.pattern_length);
    j.at("explore_rounds").get_to(c.explore_rounds);
    j.at("explore_steps").get_to(c.explore_steps);
    j.at("explore_noise").get_to(c.explore_noise);
    j.at("init_explore_steps").get_to(c.init_explore_steps);
    j.at("init_round_budget").get_to(c.init_round_budget);
    j.at("signal_budget").get_to(c.signal_budget);
    j.at("eval_tasks").get_to(c.eval_tasks);
    j.at("policy_buckets").get_to(c.policy_buckets);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("sr_k").get_to(c.sr_k);
    j.at("hist_bins").get_to(c.hist_bins);
}

std::string encode_trajectory(const Trajectory& t) {
    validate_trajectory(t);
    return json(t).dump();
}

Trajectory decode_trajectory(const std::string& line) {
    Trajectory t;
    try {
        json::parse(line).get_to(t);
    } catch (const json::exception& e) {
        throw std::domain_error(std::string("decode_trajectory: malformed record: ") +
                                e.what());
    }
    validate_trajectory(t);
    return t;
}

}  // namespace coevolve

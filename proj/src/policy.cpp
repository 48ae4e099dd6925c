#include "coevolve/policy.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "coevolve/rng.hpp"

namespace coevolve {

Policy Policy::make(std::size_t buckets, std::size_t actions, double temperature) {
    if (buckets < 1 || actions < 1) {
        throw std::domain_error("Policy: bucket and action counts must be >= 1");
    }
    if (!(temperature > 0.0)) {
        throw std::domain_error("Policy: temperature must be positive");
    }
    Policy p;
    p.bucket_count = buckets;
    p.action_count = actions;
    p.temperature = temperature;
    p.logits.assign(buckets * actions, 0.0);
    return p;
}

double& Policy::at(std::size_t bucket, std::size_t action) {
    return logits[bucket * action_count + action];
}

double Policy::at(std::size_t bucket, std::size_t action) const {
    return logits[bucket * action_count + action];
}

std::vector<double> Policy::probs(std::size_t bucket, double temperature) const {
    if (!(temperature > 0.0)) {
        throw std::domain_error("Policy::probs: temperature must be positive");
    }
    std::vector<double> out(action_count);
    const double* row = logits.data() + bucket * action_count;
    double hi = *std::max_element(row, row + action_count);
    double z = 0.0;
    for (std::size_t a = 0; a < action_count; ++a) {
        out[a] = std::exp((row[a] - hi) / temperature);
        z += out[a];
    }
    for (auto& p : out) p /= z;
    return out;
}

double Policy::log_prob(std::size_t bucket, std::size_t action,
                        double temperature) const {
    const double* row = logits.data() + bucket * action_count;
    double hi = *std::max_element(row, row + action_count);
    double z = 0.0;
    for (std::size_t a = 0; a < action_count; ++a) {
        z += std::exp((row[a] - hi) / temperature);
    }
    return (row[action] - hi) / temperature - std::log(z);
}

std::size_t Policy::greedy_action(std::size_t bucket) const {
    const double* row = logits.data() + bucket * action_count;
    std::size_t best = 0;
    for (std::size_t a = 1; a < action_count; ++a) {
        if (row[a] > row[best]) best = a;
    }
    return best;
}

std::size_t state_bucket(const Policy& policy, const std::string& goal_id,
                         const std::set<std::string>& owned) {
    std::uint64_t h = rng::fnv1a(goal_id);
    for (const auto& r : owned) {
        h = rng::fnv1a("\x1f", h);
        h = rng::fnv1a(r, h);
    }
    return static_cast<std::size_t>(h % policy.bucket_count);
}

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double epsilon) {
    if (rewards.size() < 2) {
        throw std::domain_error("group_advantages: need at least two rewards");
    }
    double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                  static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    double denom = std::sqrt(var) + epsilon;
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        out[i] = (rewards[i] - mean) / denom;
    }
    return out;
}

namespace {

std::size_t sample_action(const std::vector<double>& probs, std::mt19937_64& g) {
    double u = rng::uniform01(g);
    double acc = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
        acc += probs[a];
        if (u < acc) return a;
    }
    return probs.size() - 1;
}

}  // namespace

GroupBatch sample_group(const PolicySnapshot& policy, const EnvSpec& spec,
                        const TaskSpec& task, int k, double temperature,
                        int max_steps, std::uint64_t seed, int train_step) {
    if (k < 1) throw std::domain_error("sample_group: k must be >= 1");
    if (max_steps < 1) throw std::domain_error("sample_group: max_steps must be >= 1");
    if (policy.action_count != spec.tools.size()) {
        throw std::domain_error("sample_group: policy action count != tool count");
    }

    GroupBatch batch;
    batch.task = task;
    for (int i = 0; i < k; ++i) {
        auto g = rng::make_engine(rng::derive(seed, "rollout", static_cast<std::uint64_t>(i)));
        EnvState state = reset(spec, task.goal_id);
        Trajectory traj;
        traj.traj_id = task.task_id + "@s" + std::to_string(train_step) + "g" +
                       std::to_string(i);
        traj.task_id = task.task_id;
        traj.group_index = i;
        traj.train_step = train_step;
        std::vector<StepStat> stats;

        double reward = 0.0;
        while (!state.done) {
            std::size_t bucket = state_bucket(policy, task.goal_id, state.owned);
            auto probs = policy.probs(bucket, temperature);
            std::size_t action = sample_action(probs, g);
            // Same code path as the objective's log-probs, so identical
            // parameters give a ratio of exactly 1.
            double logp = policy.log_prob(bucket, action, temperature);
            ActionToken token{spec.tools[action].name, {}};
            StepResult res = step(spec, state, token, max_steps);
            traj.steps.push_back(
                {token, res.observation, static_cast<int>(traj.steps.size())});
            stats.push_back({bucket, action, logp});
            reward += res.reward;
        }
        traj.raw_reward = reward;
        traj.score = normalize_score(reward);
        traj.terminated_by = state.succeeded ? Termination::goal : Termination::step_limit;
        batch.rewards.push_back(reward);
        batch.trajectories.push_back(std::move(traj));
        batch.step_stats.push_back(std::move(stats));
    }
    return batch;
}

Trajectory greedy_rollout(const Policy& policy, const EnvSpec& spec,
                          const TaskSpec& task, int max_steps) {
    if (policy.action_count != spec.tools.size()) {
        throw std::domain_error("greedy_rollout: policy action count != tool count");
    }
    EnvState state = reset(spec, task.goal_id);
    Trajectory traj;
    traj.traj_id = task.task_id + "@eval";
    traj.task_id = task.task_id;
    double reward = 0.0;
    while (!state.done) {
        std::size_t bucket = state_bucket(policy, task.goal_id, state.owned);
        std::size_t action = policy.greedy_action(bucket);
        ActionToken token{spec.tools[action].name, {}};
        StepResult res = step(spec, state, token, max_steps);
        traj.steps.push_back(
            {token, res.observation, static_cast<int>(traj.steps.size())});
        reward += res.reward;
    }
    traj.raw_reward = reward;
    traj.score = normalize_score(reward);
    traj.terminated_by = state.succeeded ? Termination::goal : Termination::step_limit;
    return traj;
}

namespace {

// Shared walk over the batch's steps. f(stat, advantage, l_cur, l_ref) is
// invoked once per step; returns total step count.
template <typename F>
std::size_t for_each_step(const GroupBatch& batch, const Policy& current,
                          const PolicySnapshot& ref, const RunConfig& cfg, F&& f) {
    if (batch.advantages.size() != batch.trajectories.size()) {
        throw std::domain_error("grpo: advantages not computed for this batch");
    }
    std::size_t total = 0;
    for (std::size_t k = 0; k < batch.trajectories.size(); ++k) {
        total += batch.step_stats[k].size();
    }
    if (total == 0) throw std::domain_error("grpo: batch has zero total steps");
    double temp = cfg.rollout_temperature;
    for (std::size_t k = 0; k < batch.trajectories.size(); ++k) {
        double adv = batch.advantages[k];
        for (const StepStat& st : batch.step_stats[k]) {
            double l_cur = current.log_prob(st.bucket, st.action, temp);
            double l_ref = ref.log_prob(st.bucket, st.action, temp);
            f(st, adv, l_cur, l_ref);
        }
    }
    return total;
}

}  // namespace

double grpo_objective(const GroupBatch& batch, const Policy& current,
                      const PolicySnapshot& ref, const RunConfig& cfg) {
    double sum = 0.0;
    std::size_t total = for_each_step(
        batch, current, ref, cfg,
        [&](const StepStat& st, double adv, double l_cur, double l_ref) {
            double ratio = std::exp(l_cur - st.logp_old);
            double clipped =
                std::clamp(ratio, 1.0 - cfg.clip_low, 1.0 + cfg.clip_high);
            double surrogate = std::min(ratio * adv, clipped * adv);
            double delta = l_ref - l_cur;
            double kl = std::exp(delta) - delta - 1.0;
            sum += surrogate - cfg.kl_coeff * kl;
        });
    return sum / static_cast<double>(total);
}

GradientMap grpo_gradient(const GroupBatch& batch, const Policy& current,
                          const PolicySnapshot& ref, const RunConfig& cfg) {
    GradientMap grad;
    double temp = cfg.rollout_temperature;
    std::size_t total = for_each_step(
        batch, current, ref, cfg,
        [&](const StepStat& st, double adv, double l_cur, double l_ref) {
            double ratio = std::exp(l_cur - st.logp_old);
            double clipped =
                std::clamp(ratio, 1.0 - cfg.clip_low, 1.0 + cfg.clip_high);
            // min() takes the unclipped arm on ties, so the clipped arm only
            // wins while the clamp is active, where its derivative is zero.
            double factor =
                ratio * adv <= clipped * adv ? adv * ratio : 0.0;
            factor += cfg.kl_coeff * (std::exp(l_ref - l_cur) - 1.0);
            auto probs = current.probs(st.bucket, temp);
            for (std::size_t a = 0; a < probs.size(); ++a) {
                double indicator = a == st.action ? 1.0 : 0.0;
                grad[{st.bucket, a}] += factor * (indicator - probs[a]) / temp;
            }
        });
    for (auto& [coord, v] : grad) v /= static_cast<double>(total);
    return grad;
}

void accumulate(GradientMap& into, const GradientMap& from, double scale) {
    for (const auto& [coord, v] : from) into[coord] += v * scale;
}

void apply_gradient(Policy& policy, const GradientMap& grad, double learning_rate) {
    for (const auto& [coord, v] : grad) {
        policy.at(coord.first, coord.second) += learning_rate * v;
    }
}

IterationResult train_iteration(Policy& policy, const PolicySnapshot& ref,
                                const EnvSpec& spec,
                                const std::vector<TaskSpec>& tasks,
                                const RunConfig& cfg, std::uint64_t seed,
                                int train_step) {
    if (tasks.empty()) throw std::domain_error("train_iteration: no tasks");
    const PolicySnapshot old = policy;

    std::vector<std::future<GroupBatch>> pending;
    pending.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        std::uint64_t group_seed = rng::derive(seed, "group", i);
        pending.push_back(std::async(std::launch::async, [&, i, group_seed] {
            return sample_group(old, spec, tasks[i], cfg.group_size,
                                cfg.rollout_temperature, cfg.max_steps, group_seed,
                                train_step);
        }));
    }

    IterationResult result;
    GradientMap batch_grad;
    double scale = 1.0 / static_cast<double>(tasks.size());
    for (auto& fut : pending) {
        GroupBatch batch = fut.get();
        batch.advantages = group_advantages(batch.rewards, cfg.adv_epsilon);
        result.objective += grpo_objective(batch, policy, ref, cfg) * scale;
        accumulate(batch_grad, grpo_gradient(batch, policy, ref, cfg), scale);
        result.groups.push_back(std::move(batch));
    }
    apply_gradient(policy, batch_grad, cfg.learning_rate);
    return result;
}

std::string save_policy(const Policy& policy) {
    json rows = json::object();
    for (std::size_t b = 0; b < policy.bucket_count; ++b) {
        const double* row = policy.logits.data() + b * policy.action_count;
        bool nonzero = std::any_of(row, row + policy.action_count,
                                   [](double v) { return v != 0.0; });
        if (!nonzero) continue;
        rows[std::to_string(b)] = std::vector<double>(row, row + policy.action_count);
    }
    json j{{"bucket_count", policy.bucket_count},
           {"action_count", policy.action_count},
           {"temperature", policy.temperature},
           {"rows", rows}};
    return j.dump();
}

Policy load_policy(const std::string& text) {
    json j = json::parse(text);
    Policy p = Policy::make(j.at("bucket_count").get<std::size_t>(),
                            j.at("action_count").get<std::size_t>(),
                            j.at("temperature").get<double>());
    for (const auto& [key, row] : j.at("rows").items()) {
        std::size_t b = std::stoull(key);
        if (b >= p.bucket_count) throw std::domain_error("load_policy: bucket out of range");
        auto values = row.get<std::vector<double>>();
        if (values.size() != p.action_count) {
            throw std::domain_error("load_policy: row width mismatch");
        }
        std::copy(values.begin(), values.end(),
                  p.logits.begin() + static_cast<std::ptrdiff_t>(b * p.action_count));
    }
    return p;
}

}  // namespace coevolve

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coevolve/core.hpp"
#include "coevolve/env.hpp"

namespace coevolve {

// Tabular softmax policy over hashed observation buckets. A bucket is the
// FNV-1a hash of (goal id, sorted owned resources) modulo bucket_count;
// actions index the environment's tools in spec order. Logits start at zero,
// i.e. uniform.
struct Policy {
    std::size_t bucket_count = 0;
    std::size_t action_count = 0;
    double temperature = 0.9;  // default rollout temperature
    std::vector<double> logits;  // bucket_count * action_count, row-major

    static Policy make(std::size_t buckets, std::size_t actions, double temperature);

    double& at(std::size_t bucket, std::size_t action);
    double at(std::size_t bucket, std::size_t action) const;

    // Softmax over the bucket's row at the given temperature.
    std::vector<double> probs(std::size_t bucket, double temperature) const;
    double log_prob(std::size_t bucket, std::size_t action, double temperature) const;
    // Argmax action, lowest index on ties (the zero-temperature limit).
    std::size_t greedy_action(std::size_t bucket) const;
};

// Frozen parameter copies serve as both the sampling policy and the KL
// reference; nothing mutates them after capture.
using PolicySnapshot = Policy;

std::size_t state_bucket(const Policy& policy, const std::string& goal_id,
                         const std::set<std::string>& owned);

// Sampling-time record for one step: where the policy was and what it chose,
// with the log-probability under the sampling snapshot.
struct StepStat {
    std::size_t bucket = 0;
    std::size_t action = 0;
    double logp_old = 0.0;
};

struct GroupBatch {
    TaskSpec task;
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<StepStat>> step_stats;  // parallel to trajectories
    std::vector<double> rewards;                    // R(tau_k)
    std::vector<double> advantages;                 // filled by group_advantages
};

// Group-relative z-scores: (R_k - mean) / (population std + epsilon).
// Fewer than two rewards is a domain error.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double epsilon);

// K rollouts of the task under the snapshot at the given temperature.
// Trajectory ids are "<task_id>@s<train_step>g<k>"; group_index is k.
GroupBatch sample_group(const PolicySnapshot& policy, const EnvSpec& spec,
                        const TaskSpec& task, int k, double temperature,
                        int max_steps, std::uint64_t seed, int train_step);

// Greedy episode for held-out evaluation; returns the trajectory.
Trajectory greedy_rollout(const Policy& policy, const EnvSpec& spec,
                          const TaskSpec& task, int max_steps);

// Clipped-ratio surrogate with a per-step KL penalty toward ref, averaged
// over the batch's total step count:
//   (1/sum|tau_k|) sum_k sum_t [ min(r*A, clip(r, 1-clip_low, 1+clip_high)*A)
//                                - kl_coeff * k_t ]
// where r is the current/old probability ratio and
// k_t = ref/cur - log(ref/cur) - 1 (nonnegative). Advantages must be filled;
// zero total steps is a domain error.
double grpo_objective(const GroupBatch& batch, const Policy& current,
                      const PolicySnapshot& ref, const RunConfig& cfg);

// Sparse gradient of grpo_objective with respect to current's logits.
using GradientMap = std::map<std::pair<std::size_t, std::size_t>, double>;
GradientMap grpo_gradient(const GroupBatch& batch, const Policy& current,
                          const PolicySnapshot& ref, const RunConfig& cfg);

void accumulate(GradientMap& into, const GradientMap& from, double scale);
void apply_gradient(Policy& policy, const GradientMap& grad, double learning_rate);

struct IterationResult {
    std::vector<GroupBatch> groups;
    double objective = 0.0;  // batch-mean objective at the pre-update params
};

// One training iteration: snapshot the policy, sample a group per task
// (concurrently; merged in task order), compute group advantages from raw
// rewards, and take a single ascent step on the batch-mean gradient.
IterationResult train_iteration(Policy& policy, const PolicySnapshot& ref,
                                const EnvSpec& spec,
                                const std::vector<TaskSpec>& tasks,
                                const RunConfig& cfg, std::uint64_t seed,
                                int train_step);

// Checkpoint format: JSON with dimensions, temperature, and non-zero rows
// keyed by bucket index.
std::string save_policy(const Policy& policy);
Policy load_policy(const std::string& text);

}  // namespace coevolve

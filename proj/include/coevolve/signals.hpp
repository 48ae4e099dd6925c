#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coevolve/core.hpp"

namespace coevolve {

// Rolling per-task score window (most recent last, at most `window` entries).
struct ScoreHistory {
    std::string task_id;
    int window = 10;
    std::deque<double> scores;

    void append(double score);
};

// Frequency table over contiguous tool-name n-grams, accumulated across every
// trajectory ever observed. `total` counts pattern observations, not distinct
// patterns.
struct PatternStats {
    std::map<Pattern, long long> counts;
    long long total = 0;

    void add(const std::vector<Pattern>& patterns);
};

// Incremental detector state threaded through training. Mutated exactly once
// per trajectory by extract_signals.
struct SignalState {
    int window = 10;
    int pattern_length = 3;
    double rare_threshold = 5.0;   // theta, percent
    long long rare_min_total = 100; // N_min
    std::map<std::string, ScoreHistory> histories;
    PatternStats patterns;

    ScoreHistory& history_for(const std::string& task_id);
};

// Fires when some window score reached 0.5 but the trajectory's score fell
// below it. The witness is the highest prior score (earliest on ties). The
// trajectory's score must not already be in the history; mismatched task ids
// are a domain error.
std::optional<SignalAnnotation> detect_forgetting(const ScoreHistory& history,
                                                  const Trajectory& trajectory);

// Fires when one sampling group holds both a score above and a score below
// 0.5; every trajectory in the group is annotated with the same witness pair
// (first success, first failure, by position). Empty groups are a domain
// error. Exact 0.5 scores witness neither side.
std::vector<SignalAnnotation> detect_boundary(const std::vector<Trajectory>& group);

// Contiguous tool-name n-grams; trajectories shorter than n yield their full
// tool sequence as the single pattern. n < 1 is a domain error.
std::vector<Pattern> extract_pattern(const Trajectory& trajectory, int n);

// Fires when stats hold at least n_min observations and some pattern of this
// trajectory has frequency below theta percent (with a nonzero count). The
// annotation carries the rarest such pattern (lowest count, lexicographically
// smallest on ties). stats must already include this trajectory's patterns.
std::optional<SignalAnnotation> detect_rare(const PatternStats& stats,
                                            const std::vector<Pattern>& trajectory_patterns,
                                            const Trajectory& trajectory,
                                            double theta, long long n_min);

// Runs all three detectors over one iteration's groups and mutates state
// exactly once per trajectory. Per group: forgetting is checked for every
// trajectory against the history as it stood before the group, then scores
// are appended in order, then boundary, then per-trajectory pattern counting
// followed by the rare check. Annotation order follows that sequence.
std::vector<SignalAnnotation> extract_signals(
    const std::vector<std::vector<Trajectory>>& groups, SignalState& state);

}  // namespace coevolve

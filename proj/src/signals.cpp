#include "coevolve/signals.hpp"

#include <algorithm>
#include <stdexcept>

namespace coevolve {

void ScoreHistory::append(double score) {
    if (window < 1) throw std::domain_error("ScoreHistory: window must be >= 1");
    scores.push_back(score);
    while (static_cast<int>(scores.size()) > window) scores.pop_front();
}

void PatternStats::add(const std::vector<Pattern>& patterns) {
    for (const auto& p : patterns) {
        counts[p] += 1;
        total += 1;
    }
}

ScoreHistory& SignalState::history_for(const std::string& task_id) {
    auto it = histories.find(task_id);
    if (it == histories.end()) {
        it = histories.emplace(task_id, ScoreHistory{task_id, window, {}}).first;
    }
    return it->second;
}

std::optional<SignalAnnotation> detect_forgetting(const ScoreHistory& history,
                                                  const Trajectory& trajectory) {
    if (history.task_id != trajectory.task_id) {
        throw std::domain_error("detect_forgetting: history is for task " +
                                history.task_id + ", trajectory is for " +
                                trajectory.task_id);
    }
    double s_now = trajectory.score;
    if (s_now < 0.0 || s_now > 1.0) {
        throw std::domain_error("detect_forgetting: score outside [0, 1]");
    }
    if (s_now >= 0.5) return std::nullopt;
    double best = -1.0;
    for (double s : history.scores) {
        if (s >= 0.5 && s > best) best = s;
    }
    if (best < 0.0) return std::nullopt;
    SignalAnnotation a;
    a.kind = SignalKind::forgetting;
    a.traj_id = trajectory.traj_id;
    a.task_id = trajectory.task_id;
    a.evidence = ForgettingEvidence{best, s_now};
    a.detected_at_step = trajectory.train_step;
    return a;
}

std::vector<SignalAnnotation> detect_boundary(const std::vector<Trajectory>& group) {
    if (group.empty()) throw std::domain_error("detect_boundary: empty group");
    int success = -1;
    int failure = -1;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (success < 0 && group[i].score > 0.5) success = static_cast<int>(i);
        if (failure < 0 && group[i].score < 0.5) failure = static_cast<int>(i);
    }
    if (success < 0 || failure < 0) return {};
    BoundaryEvidence ev{success, failure,
                        group[static_cast<std::size_t>(success)].score,
                        group[static_cast<std::size_t>(failure)].score};
    std::vector<SignalAnnotation> out;
    out.reserve(group.size());
    for (const auto& t : group) {
        SignalAnnotation a;
        a.kind = SignalKind::boundary;
        a.traj_id = t.traj_id;
        a.task_id = t.task_id;
        a.evidence = ev;
        a.detected_at_step = t.train_step;
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<Pattern> extract_pattern(const Trajectory& trajectory, int n) {
    if (n < 1) throw std::domain_error("extract_pattern: n must be >= 1");
    std::vector<std::string> tools;
    tools.reserve(trajectory.steps.size());
    for (const auto& s : trajectory.steps) tools.push_back(s.action.tool);

    std::vector<Pattern> out;
    if (static_cast<int>(tools.size()) < n) {
        out.push_back(tools);  // full sequence, possibly empty
        return out;
    }
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tools.size(); ++i) {
        out.emplace_back(tools.begin() + static_cast<std::ptrdiff_t>(i),
                         tools.begin() + static_cast<std::ptrdiff_t>(i) + n);
    }
    return out;
}

std::optional<SignalAnnotation> detect_rare(const PatternStats& stats,
                                            const std::vector<Pattern>& trajectory_patterns,
                                            const Trajectory& trajectory,
                                            double theta, long long n_min) {
    if (stats.total < n_min) return std::nullopt;
    const Pattern* rarest = nullptr;
    long long rarest_count = 0;
    for (const auto& p : trajectory_patterns) {
        auto it = stats.counts.find(p);
        long long c = it == stats.counts.end() ? 0 : it->second;
        if (c <= 0) continue;
        double freq = 100.0 * static_cast<double>(c) / static_cast<double>(stats.total);
        if (freq >= theta) continue;
        if (!rarest || c < rarest_count || (c == rarest_count && p < *rarest)) {
            rarest = &p;
            rarest_count = c;
        }
    }
    if (!rarest) return std::nullopt;
    SignalAnnotation a;
    a.kind = SignalKind::rare;
    a.traj_id = trajectory.traj_id;
    a.task_id = trajectory.task_id;
    a.evidence = RareEvidence{*rarest, rarest_count, stats.total};
    a.detected_at_step = trajectory.train_step;
    return a;
}

std::vector<SignalAnnotation> extract_signals(
    const std::vector<std::vector<Trajectory>>& groups, SignalState& state) {
    std::vector<SignalAnnotation> out;
    for (const auto& group : groups) {
        if (group.empty()) throw std::domain_error("extract_signals: empty group");

        // Forgetting first, against the pre-group history: within-group score
        // spread belongs to the boundary detector, not this one.
        for (const auto& t : group) {
            if (auto a = detect_forgetting(state.history_for(t.task_id), t)) {
                out.push_back(std::move(*a));
            }
        }
        for (const auto& t : group) state.history_for(t.task_id).append(t.score);

        auto boundary = detect_boundary(group);
        out.insert(out.end(), boundary.begin(), boundary.end());

        for (const auto& t : group) {
            auto patterns = extract_pattern(t, state.pattern_length);
            state.patterns.add(patterns);
            if (auto a = detect_rare(state.patterns, patterns, t,
                                     state.rare_threshold, state.rare_min_total)) {
                out.push_back(std::move(*a));
            }
        }
    }
    return out;
}

}  // namespace coevolve

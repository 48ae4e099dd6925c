#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coevolve/core.hpp"
#include "coevolve/explorer.hpp"

namespace coevolve {

enum class RunMode { coevolve, grpo_static, random_explore };

const char* to_string(RunMode m);
// Accepts both CLI spellings ("grpo-static") and identifier spellings
// ("grpo_static").
RunMode run_mode_from_string(const std::string& s);

// Key-value config file: one "key = value" per line, '#' comments, blank
// lines ignored. Unknown keys and malformed values are domain errors naming
// the key; missing keys keep their defaults. The parsed config is validated.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

// Range checks for every field; throws std::domain_error naming the key and
// the violated constraint.
void validate_config(const RunConfig& cfg);

struct RunOptions {
    enum class Backend { scripted, remote };
    Backend backend = Backend::scripted;
    RemoteEndpoint endpoint;  // used when backend == remote
};

struct SignalCounts {
    int step = 0;
    long long forgetting = 0;
    long long boundary = 0;
    long long rare = 0;

    long long total() const { return forgetting + boundary + rare; }
};

struct RunReport {
    double final_success = 0.0;
    std::vector<std::pair<int, double>> eval_series;  // (step, greedy success)
    std::vector<SignalCounts> signal_series;           // one entry per iteration
    std::vector<std::pair<int, std::size_t>> pool_series;  // at evolution steps
    long long verdicts_accepted = 0;
    long long verdicts_retained = 0;
    long long verdicts_rejected = 0;
    int evolution_phases = 0;
};

// Executes one full run and writes its artifacts under out_dir:
//   run.log            newline-delimited JSON event records
//   trajectories.log   one encoded trajectory per line
//   env.json           the generated environment
//   pool_step_*.json   pool snapshots (initial and per evolution phase)
//   policy_step_*.json / policy_final.json   checkpoints
// The three modes share seeding: identical (config, seed) gives identical
// training until their pools first diverge. grpo_static never evolves the
// pool; random_explore explores randomly chosen pool tasks unguided;
// coevolve explores signal-conditioned.
RunReport run(const RunConfig& cfg, RunMode mode, const std::filesystem::path& out_dir,
              const RunOptions& options = {});

// Builds the plot-ready report bundle from a run log: success-vs-step,
// signal counts per step, pool embedding snapshots and validation pass rate
// per evolution step (recomputed from the verdict records), and the final
// max-similarity histogram. Truncated logs yield a partial report with a
// warning. Writes JSON to out_path (default: report.json beside the log) and
// returns it.
json emit_report(const std::filesystem::path& log_path,
                 const std::filesystem::path& out_path = {});

}  // namespace coevolve

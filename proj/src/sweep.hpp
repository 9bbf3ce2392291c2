#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"

namespace gcrl::sweep {

// One categorical search dimension. `path` keeps the raw key from the study
// file, including a leading "++" when the parameter must be added to the
// config rather than replace an existing key.
struct SearchSpaceEntry {
    std::string path;
    std::vector<config::ConfigTree> choices;
};

struct SearchSpace {
    std::vector<SearchSpaceEntry> entries;

    // Full categorical product, last entry fastest. For a single dimension
    // the configuration index equals the choice index.
    std::vector<std::vector<config::ConfigTree>> enumerate() const;
    static SearchSpace from_tree(const config::ConfigTree& tree);
};

enum class Direction { Maximize, Minimize };

struct StudyConfig {
    std::string study_name;
    std::size_t max_trials = 0;
    std::size_t n_jobs = 1;
    Direction direction = Direction::Maximize;
    std::size_t min_trials_per_param = 1;
    std::size_t max_trials_per_param = 1;
    std::string objective_metric = "success_rate";

    void validate() const;
    static StudyConfig from_tree(const config::ConfigTree& tree);
};

enum class TrialStatus { Running, Complete, Failed };

struct Trial {
    std::size_t trial_id = 0;
    std::size_t config_index = 0;
    std::vector<config::OverrideDirective> assignment;
    TrialStatus status = TrialStatus::Running;
    std::optional<double> objective;
    std::string run_id;
};

struct ConfigStats {
    std::size_t planned = 0;  // running + complete + failed
    std::size_t completed = 0;
    std::size_t failed = 0;
    double objective_sum = 0.0;

    bool has_mean() const { return completed > 0; }
    double mean() const { return objective_sum / static_cast<double>(completed); }
};

struct StudyReport {
    std::string study_name;
    Direction direction = Direction::Maximize;
    std::vector<ConfigStats> per_config;
    std::vector<std::vector<config::ConfigTree>> configurations;
    std::vector<std::string> parameter_paths;
    std::optional<std::size_t> best_index;
    std::vector<Trial> trials;

    std::string to_table() const;
    config::ConfigTree to_json() const;
};

// Repeat-and-prune study bookkeeping. Phase 1 gives every configuration
// min_trials_per_param trials round-robin; phase 2 spends the remaining
// budget on the configuration with the best current mean, capped at
// max_trials_per_param each. Every state change is appended to the NDJSON
// journal before the call returns, so a crashed study reloads exactly.
class StudyState {
public:
    StudyState(StudyConfig cfg, SearchSpace space,
               std::filesystem::path journal_path, bool journaling = true);

    // Returns the next trial to run, or nullopt when the budget is exhausted
    // or every configuration is capped.
    std::optional<Trial> plan_next_trial();

    void record_result(std::size_t trial_id, double objective);
    void record_failure(std::size_t trial_id, const std::string& message);
    void set_run_id(std::size_t trial_id, const std::string& run_id);

    std::size_t planned_total() const { return trials_.size(); }
    const std::vector<Trial>& trials() const { return trials_; }
    const std::vector<ConfigStats>& stats() const { return stats_; }
    const StudyConfig& config() const { return cfg_; }

    StudyReport report() const;

    // Rebuilds the in-memory state by replaying a journal.
    static StudyState replay_journal(const std::filesystem::path& journal_path);

private:
    void append_event(const config::ConfigTree& event);
    bool better(double a, double b) const;
    Trial& find_running(std::size_t trial_id);

    StudyConfig cfg_;
    SearchSpace space_;
    std::vector<std::vector<config::ConfigTree>> configurations_;
    std::vector<ConfigStats> stats_;
    std::vector<Trial> trials_;
    std::filesystem::path journal_path_;
    bool journaling_ = true;
};

// Runs a trial given its override directives; returns the objective value and
// optionally reports the tracker run id. Throwing marks the trial failed.
struct TrialOutcome {
    double objective = 0.0;
    std::string run_id;
};
using TrialLauncher = std::function<TrialOutcome(const Trial&)>;

// Executes the whole study with up to n_jobs concurrent launcher calls.
// Launcher failures are recorded per trial and never abort the study.
StudyReport run_study(const StudyConfig& cfg, const SearchSpace& space,
                      const TrialLauncher& launcher,
                      const std::filesystem::path& journal_path);

}  // namespace gcrl::sweep

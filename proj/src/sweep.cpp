#include "sweep.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gcrl::sweep {

using config::ConfigTree;

std::vector<std::vector<ConfigTree>> SearchSpace::enumerate() const {
    if (entries.empty()) throw ConfigError("search space is empty");
    std::vector<std::vector<ConfigTree>> out;
    std::vector<std::size_t> idx(entries.size(), 0);
    while (true) {
        std::vector<ConfigTree> assignment;
        assignment.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            assignment.push_back(entries[i].choices[idx[i]]);
        }
        out.push_back(std::move(assignment));
        std::size_t i = entries.size();
        while (i-- > 0) {
            if (++idx[i] < entries[i].choices.size()) break;
            idx[i] = 0;
            if (i == 0) return out;
        }
    }
}

SearchSpace SearchSpace::from_tree(const ConfigTree& tree) {
    SearchSpace space;
    if (!tree.is_object() || tree.empty()) {
        throw ConfigError("search_space must be a non-empty map");
    }
    for (auto it = tree.begin(); it != tree.end(); ++it) {
        const ConfigTree& entry = it.value();
        if (!entry.is_object() || !entry.contains("type") ||
            entry.at("type") != "categorical") {
            throw ConfigError("search_space entry '" + it.key() +
                              "' must have type: categorical");
        }
        if (!entry.contains("choices") || !entry.at("choices").is_array() ||
            entry.at("choices").empty()) {
            throw ConfigError("search_space entry '" + it.key() +
                              "' needs a non-empty choices list");
        }
        SearchSpaceEntry e;
        e.path = it.key();
        for (const auto& c : entry.at("choices")) e.choices.push_back(c);
        space.entries.push_back(std::move(e));
    }
    return space;
}

void StudyConfig::validate() const {
    if (study_name.empty()) throw ConfigError("study_name must be set");
    if (min_trials_per_param < 1 || min_trials_per_param > max_trials_per_param) {
        throw ConfigError("need 1 <= min_trials_per_param <= max_trials_per_param");
    }
    if (n_jobs < 1) throw ConfigError("n_jobs must be >= 1");
    if (max_trials < min_trials_per_param) {
        throw ConfigError("max_trials must be >= min_trials_per_param");
    }
}

StudyConfig StudyConfig::from_tree(const ConfigTree& tree) {
    StudyConfig cfg;
    auto require = [&](const char* key) -> const ConfigTree& {
        if (!tree.contains(key)) {
            throw ConfigError(std::string("study file is missing key '") + key + "'");
        }
        return tree.at(key);
    };
    cfg.study_name = require("study_name").get<std::string>();
    cfg.max_trials = require("max_trials").get<std::size_t>();
    cfg.n_jobs = require("n_jobs").get<std::size_t>();
    const std::string dir = require("direction").get<std::string>();
    if (dir == "maximize") {
        cfg.direction = Direction::Maximize;
    } else if (dir == "minimize") {
        cfg.direction = Direction::Minimize;
    } else {
        throw ConfigError("direction must be maximize or minimize, got '" + dir + "'");
    }
    cfg.min_trials_per_param = require("min_trials_per_param").get<std::size_t>();
    cfg.max_trials_per_param = require("max_trials_per_param").get<std::size_t>();
    if (tree.contains("objective_metric")) {
        cfg.objective_metric = tree.at("objective_metric").get<std::string>();
    }
    cfg.validate();
    return cfg;
}

namespace {

ConfigTree assignment_to_json(const std::vector<config::OverrideDirective>& assignment) {
    ConfigTree j = ConfigTree::object();
    for (const auto& d : assignment) {
        j[d.add_mode ? "++" + d.path : d.path] = d.value;
    }
    return j;
}

std::vector<config::OverrideDirective> directives_for(
    const SearchSpace& space, const std::vector<ConfigTree>& values) {
    std::vector<config::OverrideDirective> out;
    for (std::size_t i = 0; i < space.entries.size(); ++i) {
        config::OverrideDirective d;
        d.path = space.entries[i].path;
        if (d.path.rfind("++", 0) == 0) {
            d.add_mode = true;
            d.path = d.path.substr(2);
        }
        d.value = values[i];
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace

StudyState::StudyState(StudyConfig cfg, SearchSpace space,
                       std::filesystem::path journal_path, bool journaling)
    : cfg_(std::move(cfg)),
      space_(std::move(space)),
      journal_path_(std::move(journal_path)) {
    journaling_ = journaling;
    cfg_.validate();
    configurations_ = space_.enumerate();
    stats_.resize(configurations_.size());
    ConfigTree event = ConfigTree::object();
    event["event"] = "study_start";
    event["study_name"] = cfg_.study_name;
    event["max_trials"] = cfg_.max_trials;
    event["n_jobs"] = cfg_.n_jobs;
    event["direction"] = cfg_.direction == Direction::Maximize ? "maximize" : "minimize";
    event["min_trials_per_param"] = cfg_.min_trials_per_param;
    event["max_trials_per_param"] = cfg_.max_trials_per_param;
    event["objective_metric"] = cfg_.objective_metric;
    ConfigTree sp = ConfigTree::object();
    for (const auto& e : space_.entries) {
        sp[e.path] = ConfigTree{{"type", "categorical"}, {"choices", e.choices}};
    }
    event["search_space"] = sp;
    append_event(event);
}

void StudyState::append_event(const ConfigTree& event) {
    if (!journaling_) return;
    std::ofstream out(journal_path_, std::ios::app);
    if (!out) throw IoError("cannot append to journal " + journal_path_.string());
    out << event.dump() << '\n';
    out.flush();
}

bool StudyState::better(double a, double b) const {
    return cfg_.direction == Direction::Maximize ? a > b : a < b;
}

std::optional<Trial> StudyState::plan_next_trial() {
    if (trials_.size() >= cfg_.max_trials) return std::nullopt;

    std::optional<std::size_t> pick;
    // Phase 1: round-robin coverage until every configuration has
    // min_trials_per_param planned trials.
    std::size_t best_deficit_count = cfg_.min_trials_per_param;
    for (std::size_t i = 0; i < configurations_.size(); ++i) {
        if (stats_[i].planned < best_deficit_count) {
            best_deficit_count = stats_[i].planned;
            pick = i;
        }
    }
    if (!pick) {
        // Phase 2: exploit the best current mean, lowest index on ties;
        // configurations without a mean yet rank last.
        for (std::size_t i = 0; i < configurations_.size(); ++i) {
            if (stats_[i].planned >= cfg_.max_trials_per_param) continue;
            if (!pick) {
                pick = i;
                continue;
            }
            const ConfigStats& cur = stats_[i];
            const ConfigStats& sel = stats_[*pick];
            if (cur.has_mean() && (!sel.has_mean() || better(cur.mean(), sel.mean()))) {
                pick = i;
            }
        }
        if (!pick) return std::nullopt;  // all configurations capped
    }

    Trial t;
    t.trial_id = trials_.size();
    t.config_index = *pick;
    t.assignment = directives_for(space_, configurations_[*pick]);
    trials_.push_back(t);
    stats_[*pick].planned += 1;

    ConfigTree event = ConfigTree::object();
    event["event"] = "plan";
    event["trial_id"] = t.trial_id;
    event["config_index"] = t.config_index;
    event["assignment"] = assignment_to_json(t.assignment);
    append_event(event);
    return t;
}

Trial& StudyState::find_running(std::size_t trial_id) {
    if (trial_id >= trials_.size()) {
        throw StateError("unknown trial_id " + std::to_string(trial_id));
    }
    Trial& t = trials_[trial_id];
    if (t.status != TrialStatus::Running) {
        throw StateError("trial " + std::to_string(trial_id) + " already finished");
    }
    return t;
}

void StudyState::set_run_id(std::size_t trial_id, const std::string& run_id) {
    find_running(trial_id).run_id = run_id;
}

void StudyState::record_result(std::size_t trial_id, double objective) {
    Trial& t = find_running(trial_id);
    t.status = TrialStatus::Complete;
    t.objective = objective;
    stats_[t.config_index].completed += 1;
    stats_[t.config_index].objective_sum += objective;
    ConfigTree event = ConfigTree::object();
    event["event"] = "result";
    event["trial_id"] = trial_id;
    event["status"] = "complete";
    event["objective"] = objective;
    if (!t.run_id.empty()) event["run_id"] = t.run_id;
    append_event(event);
}

void StudyState::record_failure(std::size_t trial_id, const std::string& message) {
    Trial& t = find_running(trial_id);
    t.status = TrialStatus::Failed;
    stats_[t.config_index].failed += 1;
    ConfigTree event = ConfigTree::object();
    event["event"] = "result";
    event["trial_id"] = trial_id;
    event["status"] = "failed";
    event["message"] = message;
    if (!t.run_id.empty()) event["run_id"] = t.run_id;
    append_event(event);
}

StudyReport StudyState::report() const {
    StudyReport rep;
    rep.study_name = cfg_.study_name;
    rep.direction = cfg_.direction;
    rep.per_config = stats_;
    rep.configurations = configurations_;
    for (const auto& e : space_.entries) rep.parameter_paths.push_back(e.path);
    rep.trials = trials_;
    for (std::size_t i = 0; i < stats_.size(); ++i) {
        if (!stats_[i].has_mean()) continue;
        if (!rep.best_index || better(stats_[i].mean(), stats_[*rep.best_index].mean())) {
            rep.best_index = i;
        }
    }
    return rep;
}

StudyState StudyState::replay_journal(const std::filesystem::path& journal_path) {
    std::ifstream in(journal_path);
    if (!in) throw IoError("cannot open journal " + journal_path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("journal is empty");
    ConfigTree start = ConfigTree::parse(line);
    if (start.value("event", "") != "study_start") {
        throw IoError("journal does not start with a study_start event");
    }
    StudyConfig cfg = StudyConfig::from_tree(start);
    SearchSpace space = SearchSpace::from_tree(start.at("search_space"));

    // Replay must not re-append what it reads.
    StudyState state(std::move(cfg), std::move(space), journal_path, false);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ConfigTree event = ConfigTree::parse(line);
        const std::string kind = event.value("event", "");
        if (kind == "plan") {
            auto t = state.plan_next_trial();
            if (!t || t->trial_id != event.at("trial_id").get<std::size_t>() ||
                t->config_index != event.at("config_index").get<std::size_t>()) {
                throw IoError("journal replay diverged at trial plan");
            }
        } else if (kind == "result") {
            const std::size_t id = event.at("trial_id").get<std::size_t>();
            if (event.contains("run_id")) {
                state.set_run_id(id, event.at("run_id").get<std::string>());
            }
            if (event.at("status") == "complete") {
                state.record_result(id, event.at("objective").get<double>());
            } else {
                state.record_failure(id, event.value("message", ""));
            }
        } else {
            throw IoError("unknown journal event '" + kind + "'");
        }
    }
    state.journaling_ = true;
    return state;
}

std::string StudyReport::to_table() const {
    std::ostringstream out;
    out << "study: " << study_name << "  ("
        << (direction == Direction::Maximize ? "maximize" : "minimize") << ")\n";
    out << "  #  ";
    for (const auto& p : parameter_paths) out << p << "  ";
    out << "trials  failed  mean_objective  best\n";
    // Rows sorted by mean objective, best first; configs without a mean last.
    std::vector<std::size_t> order(per_config.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const bool ha = per_config[a].has_mean();
        const bool hb = per_config[b].has_mean();
        if (ha != hb) return ha;
        if (!ha) return false;
        return direction == Direction::Maximize
                   ? per_config[a].mean() > per_config[b].mean()
                   : per_config[a].mean() < per_config[b].mean();
    });
    for (std::size_t i : order) {
        out << "  " << i << "  ";
        for (const auto& v : configurations[i]) out << config::value_to_string(v) << "  ";
        out << per_config[i].completed << "  " << per_config[i].failed << "  ";
        if (per_config[i].has_mean()) {
            out << per_config[i].mean();
        } else {
            out << "-";
        }
        if (best_index && *best_index == i) out << "  <-- best";
        out << '\n';
    }
    return out.str();
}

ConfigTree StudyReport::to_json() const {
    ConfigTree j = ConfigTree::object();
    j["study_name"] = study_name;
    j["direction"] = direction == Direction::Maximize ? "maximize" : "minimize";
    j["parameter_paths"] = parameter_paths;
    ConfigTree configs = ConfigTree::array();
    for (std::size_t i = 0; i < configurations.size(); ++i) {
        ConfigTree row = ConfigTree::object();
        row["config_index"] = i;
        row["values"] = configurations[i];
        row["completed"] = per_config[i].completed;
        row["failed"] = per_config[i].failed;
        if (per_config[i].has_mean()) row["mean_objective"] = per_config[i].mean();
        configs.push_back(row);
    }
    j["configurations"] = configs;
    if (best_index) j["best_config_index"] = *best_index;
    ConfigTree trial_rows = ConfigTree::array();
    for (const auto& t : trials) {
        ConfigTree row = ConfigTree::object();
        row["trial_id"] = t.trial_id;
        row["config_index"] = t.config_index;
        row["status"] = t.status == TrialStatus::Complete ? "complete"
                        : t.status == TrialStatus::Failed ? "failed"
                                                          : "running";
        if (t.objective) row["objective"] = *t.objective;
        if (!t.run_id.empty()) row["run_id"] = t.run_id;
        trial_rows.push_back(row);
    }
    j["trials"] = trial_rows;
    return j;
}

StudyReport run_study(const StudyConfig& cfg, const SearchSpace& space,
                      const TrialLauncher& launcher,
                      const std::filesystem::path& journal_path) {
    StudyState state(cfg, space, journal_path);
    std::mutex mu;
    bool planning_done = false;

    auto worker = [&]() {
        while (true) {
            std::optional<Trial> trial;
            {
                std::unique_lock lock(mu);
                if (!planning_done) {
                    trial = state.plan_next_trial();
                    if (!trial) planning_done = true;
                }
                if (!trial) return;
            }
            try {
                TrialOutcome outcome = launcher(*trial);
                std::unique_lock lock(mu);
                if (!outcome.run_id.empty()) {
                    state.set_run_id(trial->trial_id, outcome.run_id);
                }
                state.record_result(trial->trial_id, outcome.objective);
            } catch (const std::exception& e) {
                std::unique_lock lock(mu);
                state.record_failure(trial->trial_id, e.what());
            }
        }
    };

    if (cfg.n_jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < cfg.n_jobs; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return state.report();
}

}  // namespace gcrl::sweep

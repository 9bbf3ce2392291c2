#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "env.hpp"
#include "livemetrics.hpp"
#include "sacvar.hpp"

namespace gcrl::harness {

namespace fs = std::filesystem;
using config::ConfigTree;

std::vector<std::string> algorithm_names(const fs::path& conf_dir) {
    std::vector<std::string> names;
    const fs::path dir = conf_dir / "algorithm";
    if (fs::is_directory(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string stem = entry.path().stem().string();
            if (entry.path().extension() == ".yaml" && stem.find('@') == std::string::npos) {
                names.push_back(stem);
            }
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

ConfigTree resolve_config(const fs::path& conf_dir,
                          const std::vector<std::string>& override_tokens) {
    std::string algorithm = "sac_var";
    std::string env_name = "PointReach-v0";
    std::vector<std::string> rest;
    for (const auto& token : override_tokens) {
        if (token.rfind("algorithm=", 0) == 0) {
            algorithm = token.substr(10);
        } else if (token.rfind("env=", 0) == 0) {
            env_name = token.substr(4);
        } else {
            rest.push_back(token);
        }
    }
    ConfigTree algo = config::load_defaults(conf_dir, algorithm, env_name);
    algo["name"] = algorithm;

    ConfigTree tree = ConfigTree::object();
    tree["env"] = env_name;
    tree["seed"] = 0;
    tree["experiment_name"] = algorithm + "_" + env_name;
    tree["record_stream"] = false;
    tree["algorithm"] = algo;
    return config::apply_overrides(tree, config::parse_directives(rest));
}

RunResult run_training(const ConfigTree& resolved, const fs::path& track_root) {
    const sacvar::SacConfig cfg = sacvar::SacConfig::from_tree(resolved);
    auto environment = env::make_env(resolved.at("env").get<std::string>());

    std::mt19937_64 id_rng(std::random_device{}());
    auto run = track::start_run(track_root,
                                resolved.at("experiment_name").get<std::string>(),
                                resolved, id_rng);

    std::unique_ptr<livemetrics::StreamWriter> stream;
    if (resolved.value("record_stream", false)) {
        stream = std::make_unique<livemetrics::StreamWriter>(run->dir() / "artifacts" /
                                                             "stream.ndjson");
    }

    sacvar::SacVarAgent agent(cfg, environment->spec());
    const double success =
        agent.train(*environment, run.get(), nullptr, stream.get());

    std::ostringstream checkpoint;
    agent.save(checkpoint);
    // train() already ended the run; the checkpoint goes next to it.
    std::ofstream ck(run->dir() / "artifacts" / "checkpoint.txt");
    ck << checkpoint.str();

    return {success, run->run_id(), run->dir()};
}

RunResult cmd_run(const Paths& paths, const std::vector<std::string>& override_tokens) {
    return run_training(resolve_config(paths.conf_dir, override_tokens),
                        paths.track_root);
}

sweep::StudyReport cmd_sweep(const Paths& paths, const fs::path& study_file,
                             const std::vector<std::string>& override_tokens) {
    const ConfigTree study_tree = config::load_config_file(study_file);
    const sweep::StudyConfig study_cfg = sweep::StudyConfig::from_tree(study_tree);
    const sweep::SearchSpace space =
        sweep::SearchSpace::from_tree(study_tree.contains("search_space")
                                          ? study_tree.at("search_space")
                                          : ConfigTree::object());

    // Base tokens: the study file may pin env/algorithm; CLI tokens follow and
    // win by coming later.
    std::vector<std::string> base_tokens;
    if (study_tree.contains("algorithm")) {
        base_tokens.push_back("algorithm=" + study_tree.at("algorithm").get<std::string>());
    }
    if (study_tree.contains("env")) {
        base_tokens.push_back("env=" + study_tree.at("env").get<std::string>());
    }
    base_tokens.insert(base_tokens.end(), override_tokens.begin(), override_tokens.end());

    const fs::path study_dir = paths.track_root / "sweeps" / study_cfg.study_name;
    fs::create_directories(study_dir);
    const fs::path journal = study_dir / "journal.ndjson";

    auto launcher = [&](const sweep::Trial& trial) -> sweep::TrialOutcome {
        ConfigTree resolved = resolve_config(paths.conf_dir, base_tokens);
        // Per-trial seed keeps repeated trials of one configuration distinct.
        resolved["seed"] = static_cast<std::int64_t>(
            resolved.at("seed").get<std::int64_t>() + trial.trial_id);
        if (study_tree.contains("overrides")) {
            resolved["algorithm"] =
                config::merge(resolved.at("algorithm"), study_tree.at("overrides"));
        }
        resolved = config::apply_overrides(resolved, trial.assignment);
        RunResult res = run_training(resolved, paths.track_root);
        return {res.success_rate, res.run_id};
    };

    sweep::StudyReport report = sweep::run_study(study_cfg, space, launcher, journal);
    std::ofstream rep(study_dir / "report.json");
    rep << report.to_json().dump(2) << '\n';
    std::ofstream table(study_dir / "report.txt");
    table << report.to_table();
    return report;
}

int smoke_test(const Paths& paths, std::ostream& report) {
    const auto algorithms = algorithm_names(paths.conf_dir);
    if (algorithms.empty()) {
        report << "no algorithm configs found under " << paths.conf_dir << "\n";
        return 1;
    }
    const fs::path smoke_file = paths.conf_dir / "test" / "smoke.yaml";
    const ConfigTree smoke_overrides =
        fs::exists(smoke_file) ? config::load_config_file(smoke_file) : ConfigTree::object();

    int failures = 0;
    for (const auto& algorithm : algorithms) {
        for (const auto& env_name : env::env_names()) {
            const auto start = std::chrono::steady_clock::now();
            std::string status = "ok";
            try {
                ConfigTree resolved = resolve_config(
                    paths.conf_dir, {"algorithm=" + algorithm, "env=" + env_name});
                resolved["algorithm"] =
                    config::merge(resolved.at("algorithm"), smoke_overrides);
                resolved["experiment_name"] = "smoke_" + algorithm + "_" + env_name;

                const sacvar::SacConfig cfg = sacvar::SacConfig::from_tree(resolved);
                auto environment = env::make_env(env_name);
                sacvar::SacVarAgent agent(cfg, environment->spec());

                std::mt19937_64 id_rng(std::random_device{}());
                auto run = track::start_run(paths.track_root,
                                            resolved.at("experiment_name").get<std::string>(),
                                            resolved, id_rng);
                livemetrics::MetricChannel channel(64, livemetrics::DropPolicy::DropOldest);
                agent.train(*environment, run.get(), &channel, nullptr);

                // The channel enforced strict step monotonicity on every emit;
                // at least the tail of the stream must still be there.
                if (channel.size() == 0) {
                    throw StateError("no live frames emitted during smoke run");
                }
                auto eval_env = env::make_env(env_name);
                agent.evaluate(*eval_env, 1, 0);
            } catch (const std::exception& e) {
                status = std::string("FAILED: ") + e.what();
                ++failures;
            }
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
            report << "smoke " << algorithm << " x " << env_name << ": " << status
                   << " (" << elapsed << " ms)\n";
        }
    }
    return failures == 0 ? 0 : 1;
}

int perf_test(const Paths& paths, const std::vector<std::string>& extra_overrides,
              std::ostream& report) {
    const fs::path perf_file = paths.conf_dir / "test" / "perf.yaml";
    const ConfigTree perf = config::load_config_file(perf_file);
    const std::string algorithm = perf.value("algorithm", "sac");
    const std::string env_name = perf.value("env", "PointReach-v0");
    const double threshold = perf.value("threshold", 0.9);
    std::vector<std::int64_t> seeds;
    if (perf.contains("seeds")) {
        seeds = perf.at("seeds").get<std::vector<std::int64_t>>();
    } else {
        seeds = {0, 1, 2};
    }

    std::vector<double> finals;
    for (const std::int64_t seed : seeds) {
        ConfigTree resolved = resolve_config(
            paths.conf_dir, {"algorithm=" + algorithm, "env=" + env_name,
                             "seed=" + std::to_string(seed)});
        if (perf.contains("overrides")) {
            resolved["algorithm"] =
                config::merge(resolved.at("algorithm"), perf.at("overrides"));
        }
        // Sabotage / ad-hoc overrides win over the pinned perf config.
        resolved = config::apply_overrides(resolved,
                                           config::parse_directives(extra_overrides));
        resolved["experiment_name"] = "perf_" + algorithm + "_" + env_name;
        const RunResult res = run_training(resolved, paths.track_root);
        finals.push_back(res.success_rate);
        report << "perf seed " << seed << ": final success_rate = " << res.success_rate
               << "\n";
    }
    std::vector<double> sorted = finals;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    report << "perf median success_rate = " << median << " (threshold " << threshold
           << ")\n";
    return median >= threshold ? 0 : 1;
}

}  // namespace gcrl::harness

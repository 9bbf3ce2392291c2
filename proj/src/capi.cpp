#include "gcrl/gcrl.h"

#include <atomic>
#include <csignal>
#include <cstring>
#include <functional>
#include <memory>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <termios.h>
#include <unistd.h>
#include <vector>

#include "env.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "livemetrics.hpp"

namespace {

thread_local std::string g_last_error;

gcrl_status fail(gcrl_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

std::vector<std::string> collect_tokens(int n, const char* const* overrides) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.emplace_back(overrides[i]);
    return out;
}

gcrl_status run_guarded(const std::function<gcrl_status()>& body) {
    try {
        g_last_error.clear();
        return body();
    } catch (const gcrl::ConfigError& e) {
        return fail(GCRL_ERR_CONFIG, e.what());
    } catch (const gcrl::NumericError& e) {
        return fail(GCRL_ERR_NUMERIC, e.what());
    } catch (const gcrl::IoError& e) {
        return fail(GCRL_ERR_IO, e.what());
    } catch (const gcrl::InputError& e) {
        return fail(GCRL_ERR_USAGE, e.what());
    } catch (const gcrl::StateError& e) {
        return fail(GCRL_ERR_USAGE, e.what());
    } catch (const std::exception& e) {
        return fail(GCRL_ERR_RUNTIME, e.what());
    }
}

gcrl::harness::Paths make_paths(const char* conf_dir, const char* track_root) {
    if (!conf_dir || !*conf_dir) throw gcrl::InputError("conf_dir is required");
    if (!track_root || !*track_root) throw gcrl::InputError("track_root is required");
    return {conf_dir, track_root};
}

std::vector<std::string> split_csv(const char* csv) {
    std::vector<std::string> out;
    if (!csv || !*csv) return out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::atomic<bool> g_interrupted{false};
void on_sigint(int) { g_interrupted = true; }

// Raw-mode terminal guard for interactive replay.
struct RawTerm {
    termios saved{};
    bool active = false;
    RawTerm() {
        if (isatty(STDIN_FILENO) && tcgetattr(STDIN_FILENO, &saved) == 0) {
            termios raw = saved;
            raw.c_lflag &= ~static_cast<tcflag_t>(ICANON | ECHO);
            raw.c_cc[VMIN] = 0;
            raw.c_cc[VTIME] = 0;
            if (tcsetattr(STDIN_FILENO, TCSANOW, &raw) == 0) active = true;
        }
    }
    ~RawTerm() {
        if (active) tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    }
    int poll_key() const {
        if (!active) return -1;
        char c = 0;
        return read(STDIN_FILENO, &c, 1) == 1 ? c : -1;
    }
};

void interactive_replay(const std::vector<gcrl::livemetrics::SyncFrame>& frames,
                        const gcrl::livemetrics::DashboardOptions& opts,
                        double speed_hz) {
    namespace lm = gcrl::livemetrics;
    RawTerm term;
    std::map<std::string, std::vector<double>> history;
    auto history_at = [&](std::size_t upto) {
        history.clear();
        const std::size_t begin = upto >= opts.window ? upto - opts.window + 1 : 0;
        for (std::size_t i = begin; i <= upto; ++i) {
            for (const auto& [name, value] : frames[i].metrics) {
                history[name].push_back(value);
            }
        }
    };
    std::size_t pos = 0;
    bool paused = false;
    const double hz = speed_hz > 0.0 ? speed_hz : 20.0;
    while (pos < frames.size()) {
        history_at(pos);
        std::cout << "\033[2J\033[H" << lm::render_dashboard(frames[pos], history, opts)
                  << "\n[space] pause/resume  [n] next  [p] prev  [q] quit"
                  << (paused ? "  -- paused --" : "") << std::endl;
        const int key = term.poll_key();
        if (key == 'q') break;
        if (key == ' ') paused = !paused;
        if (paused) {
            if (key == 'n' && pos + 1 < frames.size()) ++pos;
            if (key == 'p' && pos > 0) --pos;
            usleep(30000);
            continue;
        }
        usleep(static_cast<useconds_t>(1e6 / hz));
        ++pos;
    }
}

}  // namespace

extern "C" {

const char* gcrl_last_error(void) { return g_last_error.c_str(); }

gcrl_status gcrl_run(const char* conf_dir, const char* track_root, int n_overrides,
                     const char* const* overrides, double* final_success_rate) {
    return run_guarded([&] {
        const auto res = gcrl::harness::cmd_run(make_paths(conf_dir, track_root),
                                                collect_tokens(n_overrides, overrides));
        if (final_success_rate) *final_success_rate = res.success_rate;
        std::cout << "run " << res.run_id << " finished; final success_rate = "
                  << res.success_rate << "\n"
                  << "run directory: " << res.run_dir.string() << std::endl;
        return GCRL_OK;
    });
}

gcrl_status gcrl_sweep(const char* conf_dir, const char* track_root,
                       const char* study_file, int n_overrides,
                       const char* const* overrides) {
    return run_guarded([&] {
        if (!study_file || !*study_file) {
            return fail(GCRL_ERR_USAGE, "sweep: study file path is required");
        }
        const auto report = gcrl::harness::cmd_sweep(
            make_paths(conf_dir, track_root), study_file,
            collect_tokens(n_overrides, overrides));
        std::cout << report.to_table() << std::flush;
        return GCRL_OK;
    });
}

gcrl_status gcrl_view_replay(const char* stream_file, const char* metrics_csv,
                             double speed_hz, int interactive) {
    return run_guarded([&] {
        namespace lm = gcrl::livemetrics;
        if (!stream_file) return fail(GCRL_ERR_USAGE, "replay: stream file required");
        const auto frames = lm::read_stream_file(stream_file);
        lm::DashboardOptions opts;
        opts.metric_names = split_csv(metrics_csv);
        if (interactive && isatty(STDIN_FILENO)) {
            interactive_replay(frames, opts, speed_hz);
        } else {
            lm::replay_stream(frames, opts, std::cout, speed_hz > 0.0, speed_hz);
        }
        return GCRL_OK;
    });
}

gcrl_status gcrl_view_follow(const char* run_dir, const char* metrics_csv,
                             double refresh_hz) {
    return run_guarded([&] {
        namespace lm = gcrl::livemetrics;
        if (!run_dir) return fail(GCRL_ERR_USAGE, "follow: run directory required");
        lm::DashboardOptions opts;
        opts.metric_names = split_csv(metrics_csv);
        if (refresh_hz > 0.0) opts.refresh_hz = refresh_hz;
        g_interrupted = false;
        auto* previous = std::signal(SIGINT, on_sigint);
        lm::follow_stream(std::filesystem::path(run_dir) / "artifacts" / "stream.ndjson",
                          opts, std::cout, [] { return !g_interrupted.load(); });
        std::signal(SIGINT, previous);
        return GCRL_OK;
    });
}

gcrl_status gcrl_test_smoke(const char* conf_dir, const char* track_root) {
    return run_guarded([&] {
        const int rc =
            gcrl::harness::smoke_test(make_paths(conf_dir, track_root), std::cout);
        if (rc != 0) return fail(GCRL_TEST_FAILED, "smoke test failed");
        return GCRL_OK;
    });
}

gcrl_status gcrl_test_perf(const char* conf_dir, const char* track_root,
                           int n_overrides, const char* const* overrides) {
    return run_guarded([&] {
        const int rc = gcrl::harness::perf_test(make_paths(conf_dir, track_root),
                                                collect_tokens(n_overrides, overrides),
                                                std::cout);
        if (rc != 0) return fail(GCRL_TEST_FAILED, "perf test below threshold");
        return GCRL_OK;
    });
}

struct gcrl_env {
    std::unique_ptr<gcrl::env::GoalEnv> impl;
};

gcrl_env* gcrl_env_create(const char* name) {
    try {
        g_last_error.clear();
        auto env = std::make_unique<gcrl_env>();
        env->impl = gcrl::env::make_env(name ? name : "");
        return env.release();
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return nullptr;
    }
}

void gcrl_env_destroy(gcrl_env* env) { delete env; }

gcrl_status gcrl_env_spec(const gcrl_env* env, size_t* obs_dim, size_t* goal_dim,
                          size_t* action_dim, size_t* max_episode_steps,
                          double* success_threshold) {
    if (!env) return fail(GCRL_ERR_USAGE, "null environment handle");
    const auto& spec = env->impl->spec();
    if (obs_dim) *obs_dim = spec.obs_dim;
    if (goal_dim) *goal_dim = spec.goal_dim;
    if (action_dim) *action_dim = spec.action_dim;
    if (max_episode_steps) *max_episode_steps = spec.max_episode_steps;
    if (success_threshold) *success_threshold = spec.success_threshold;
    return GCRL_OK;
}

namespace {

void copy_obs(const gcrl::env::GoalObservation& obs, double* observation,
              double* achieved_goal, double* desired_goal) {
    if (observation) {
        std::memcpy(observation, obs.observation.data(),
                    obs.observation.size() * sizeof(double));
    }
    if (achieved_goal) {
        std::memcpy(achieved_goal, obs.achieved_goal.data(),
                    obs.achieved_goal.size() * sizeof(double));
    }
    if (desired_goal) {
        std::memcpy(desired_goal, obs.desired_goal.data(),
                    obs.desired_goal.size() * sizeof(double));
    }
}

}  // namespace

gcrl_status gcrl_env_reset(gcrl_env* env, uint64_t seed, int use_seed,
                           double* observation, double* achieved_goal,
                           double* desired_goal) {
    if (!env) return fail(GCRL_ERR_USAGE, "null environment handle");
    return run_guarded([&] {
        const auto obs = env->impl->reset(
            use_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
        copy_obs(obs, observation, achieved_goal, desired_goal);
        return GCRL_OK;
    });
}

gcrl_status gcrl_env_step(gcrl_env* env, const double* action, double* observation,
                          double* achieved_goal, double* desired_goal, double* reward,
                          int* done, int* is_success) {
    if (!env) return fail(GCRL_ERR_USAGE, "null environment handle");
    if (!action) return fail(GCRL_ERR_USAGE, "null action");
    return run_guarded([&] {
        const auto& spec = env->impl->spec();
        std::vector<double> a(action, action + spec.action_dim);
        const auto res = env->impl->step(a);
        copy_obs(res.obs, observation, achieved_goal, desired_goal);
        if (reward) *reward = res.reward;
        if (done) *done = res.done ? 1 : 0;
        if (is_success) *is_success = res.is_success ? 1 : 0;
        return GCRL_OK;
    });
}

gcrl_status gcrl_env_compute_reward(const gcrl_env* env, const double* achieved,
                                    const double* desired, double* reward) {
    if (!env || !achieved || !desired || !reward) {
        return fail(GCRL_ERR_USAGE, "null argument");
    }
    return run_guarded([&] {
        const auto& spec = env->impl->spec();
        std::vector<double> a(achieved, achieved + spec.goal_dim);
        std::vector<double> d(desired, desired + spec.goal_dim);
        *reward = env->impl->compute_reward(a, d);
        return GCRL_OK;
    });
}

}  // extern "C"

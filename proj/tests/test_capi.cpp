#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "gcrl/gcrl.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gcrl_capi_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// A conf directory with budgets small enough for test-speed training.
void write_tiny_conf(const fs::path& dir) {
    fs::create_directories(dir / "algorithm");
    std::ofstream(dir / "algorithm" / "sac_var.yaml")
        << "name: sac_var\n"
           "use_intrinsic: true\n"
           "weight_critic_var: 0.5\n"
           "n_critics: 2\n"
           "hidden: [16, 16]\n"
           "batch_size: 16\n"
           "buffer_capacity: 2000\n"
           "warmup_steps: 40\n"
           "total_steps: 150\n"
           "eval_every: 75\n"
           "eval_episodes: 2\n";
}

}  // namespace

TEST_CASE("env handle: create, spec, reset, step, destroy") {
    gcrl_env* env = gcrl_env_create("PointReach-v0");
    REQUIRE(env != nullptr);

    size_t obs_dim = 0, goal_dim = 0, act_dim = 0, max_steps = 0;
    double threshold = 0.0;
    REQUIRE(gcrl_env_spec(env, &obs_dim, &goal_dim, &act_dim, &max_steps,
                          &threshold) == GCRL_OK);
    CHECK(obs_dim == 2);
    CHECK(goal_dim == 2);
    CHECK(act_dim == 2);
    CHECK(max_steps == 50);
    CHECK(threshold == 0.05);

    double obs[2], achieved[2], desired[2];
    REQUIRE(gcrl_env_reset(env, 42, 1, obs, achieved, desired) == GCRL_OK);
    CHECK(std::abs(obs[0]) <= 1.0);

    const double action[2] = {0.5, -0.5};
    double reward = 0.0;
    int done = 0, success = 0;
    REQUIRE(gcrl_env_step(env, action, obs, achieved, desired, &reward, &done,
                          &success) == GCRL_OK);
    CHECK((reward == 0.0 || reward == -1.0));

    double r2 = 0.0;
    REQUIRE(gcrl_env_compute_reward(env, achieved, desired, &r2) == GCRL_OK);
    CHECK(r2 == reward);

    gcrl_env_destroy(env);
}

TEST_CASE("seeded env handles replay identically") {
    gcrl_env* a = gcrl_env_create("PlanarPush-v0");
    gcrl_env* b = gcrl_env_create("PlanarPush-v0");
    REQUIRE(a != nullptr);
    REQUIRE(b != nullptr);
    double oa[4], ob[4], ag[2], dg[2];
    REQUIRE(gcrl_env_reset(a, 9, 1, oa, ag, dg) == GCRL_OK);
    REQUIRE(gcrl_env_reset(b, 9, 1, ob, ag, dg) == GCRL_OK);
    CHECK(std::memcmp(oa, ob, sizeof(oa)) == 0);
    gcrl_env_destroy(a);
    gcrl_env_destroy(b);
}

TEST_CASE("unknown env name returns NULL and sets the error message") {
    gcrl_env* env = gcrl_env_create("Missing-v0");
    CHECK(env == nullptr);
    const std::string msg = gcrl_last_error();
    CHECK(msg.find("PointReach-v0") != std::string::npos);
}

TEST_CASE("stepping a finished episode is a usage error") {
    gcrl_env* env = gcrl_env_create("PointReach-v0");
    REQUIRE(env != nullptr);
    double obs[2], ag[2], dg[2], reward;
    int done = 0, success = 0;
    REQUIRE(gcrl_env_reset(env, 1, 1, obs, ag, dg) == GCRL_OK);
    const double action[2] = {0.0, 0.0};
    while (!done) {
        REQUIRE(gcrl_env_step(env, action, obs, ag, dg, &reward, &done,
                              &success) == GCRL_OK);
    }
    CHECK(gcrl_env_step(env, action, obs, ag, dg, &reward, &done, &success) ==
          GCRL_ERR_USAGE);
    gcrl_env_destroy(env);
}

TEST_CASE("gcrl_run trains, tracks and reports the final success rate") {
    TempDir tmp;
    write_tiny_conf(tmp.path / "conf");
    const std::string conf = (tmp.path / "conf").string();
    const std::string root = (tmp.path / "mlruns").string();
    const char* overrides[] = {"env=PointReach-v0", "seed=1"};
    double final_rate = -1.0;
    REQUIRE(gcrl_run(conf.c_str(), root.c_str(), 2, overrides, &final_rate) ==
            GCRL_OK);
    CHECK(final_rate >= 0.0);
    CHECK(final_rate <= 1.0);
    // FileStore layout appeared under the root.
    bool found_meta = false;
    for (const auto& p : fs::recursive_directory_iterator(root)) {
        if (p.path().filename() == "meta.yaml") found_meta = true;
    }
    CHECK(found_meta);
}

TEST_CASE("bad overrides map to the config error code") {
    TempDir tmp;
    write_tiny_conf(tmp.path / "conf");
    const std::string conf = (tmp.path / "conf").string();
    const std::string root = (tmp.path / "mlruns").string();
    const char* overrides[] = {"algorithm.not_a_key=1"};
    CHECK(gcrl_run(conf.c_str(), root.c_str(), 1, overrides, nullptr) ==
          GCRL_ERR_CONFIG);
    const std::string msg = gcrl_last_error();
    CHECK(msg.find("algorithm.not_a_key") != std::string::npos);
}

TEST_CASE("missing conf dir maps to the config error code") {
    TempDir tmp;
    const std::string conf = (tmp.path / "nope").string();
    const std::string root = (tmp.path / "mlruns").string();
    CHECK(gcrl_run(conf.c_str(), root.c_str(), 0, nullptr, nullptr) ==
          GCRL_ERR_CONFIG);
}

TEST_CASE("recorded stream replays through the view entry point") {
    TempDir tmp;
    write_tiny_conf(tmp.path / "conf");
    const std::string conf = (tmp.path / "conf").string();
    const std::string root = (tmp.path / "mlruns").string();
    const char* overrides[] = {"env=PointReach-v0", "record_stream=true"};
    REQUIRE(gcrl_run(conf.c_str(), root.c_str(), 2, overrides, nullptr) == GCRL_OK);

    fs::path stream;
    for (const auto& p : fs::recursive_directory_iterator(root)) {
        if (p.path().filename() == "stream.ndjson") stream = p.path();
    }
    REQUIRE_FALSE(stream.empty());
    // Non-interactive, full speed; must succeed without a terminal.
    CHECK(gcrl_view_replay(stream.string().c_str(), "reward", 0.0, 0) == GCRL_OK);
    CHECK(gcrl_view_replay(stream.string().c_str(), "not_a_metric", 0.0, 0) ==
          GCRL_ERR_CONFIG);
    CHECK(gcrl_view_replay((tmp.path / "missing.ndjson").string().c_str(), "", 0.0,
                           0) == GCRL_ERR_IO);
}

TEST_CASE("null argument handling is defensive") {
    CHECK(gcrl_run(nullptr, "x", 0, nullptr, nullptr) == GCRL_ERR_USAGE);
    CHECK(gcrl_env_spec(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
          GCRL_ERR_USAGE);
    CHECK(gcrl_view_replay(nullptr, "", 0.0, 0) == GCRL_ERR_USAGE);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <list>
#include <random>

#include "replay.hpp"

using namespace gcrl::replay;

namespace {

constexpr double kThreshold = 0.05;

// Episode whose achieved goals are distinct, recognizable markers: step i of
// episode id e has achieved_goal {e + 100, i} and desired goal {e + 100, 999}.
std::vector<Transition> marker_episode(double e, std::size_t len) {
    std::vector<Transition> ep;
    for (std::size_t i = 0; i < len; ++i) {
        Transition t;
        t.obs = {{e, static_cast<double>(i)}, {e + 100, static_cast<double>(i) - 1},
                 {e + 100, 999.0}};
        t.action = {0.0, 0.0};
        t.reward = -1.0;
        t.next_obs = {{e, static_cast<double>(i) + 1},
                      {e + 100, static_cast<double>(i)},
                      {e + 100, 999.0}};
        t.done = i + 1 == len;
        ep.push_back(t);
    }
    return ep;
}

}  // namespace

TEST_CASE("empty or trivial usage raises") {
    ReplayBuffer buf(100, kThreshold);
    Rng rng(1);
    CHECK(buf.empty());
    CHECK_THROWS_AS((void)buf.sample_her(4, 0.5, rng), gcrl::StateError);
    CHECK_THROWS_AS(buf.store_episode({}), gcrl::InputError);
}

TEST_CASE("fifo eviction over whole episodes matches a list simulation") {
    const std::size_t capacity = 50;
    ReplayBuffer buf(capacity, kThreshold);
    // Reference model: a list of episode lengths with the same eviction rule.
    std::list<std::size_t> model;
    std::size_t model_size = 0;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> len_dist(1, 12);
    for (int e = 0; e < 60; ++e) {
        const std::size_t len = len_dist(rng);
        buf.store_episode(marker_episode(static_cast<double>(e), len));
        model.push_back(len);
        model_size += len;
        while (model_size > capacity && model.size() > 1) {
            model_size -= model.front();
            model.pop_front();
        }
        CHECK(buf.size() == model_size);
        CHECK(buf.episode_count() == model.size());
    }
}

TEST_CASE("her ratio over 1e5 sampled rows is within 0.01 of the request") {
    ReplayBuffer buf(100000, kThreshold);
    for (int e = 0; e < 50; ++e) {
        buf.store_episode(marker_episode(static_cast<double>(e), 20));
    }
    Rng rng(3);
    for (const double ratio : {0.0, 0.3, 0.8, 1.0}) {
        std::size_t relabeled = 0, total = 0;
        while (total < 100000) {
            const SampledBatch b = buf.sample_her(1000, ratio, rng);
            relabeled += b.relabeled_count;
            total += b.batch_size;
        }
        const double observed = static_cast<double>(relabeled) / static_cast<double>(total);
        CHECK(std::abs(observed - ratio) <= 0.01);
    }
}

TEST_CASE("relabeled rows use a future achieved goal of the same episode") {
    ReplayBuffer buf(10000, kThreshold);
    for (int e = 0; e < 8; ++e) {
        buf.store_episode(marker_episode(static_cast<double>(e), 15));
    }
    Rng rng(4);
    const SampledBatch b = buf.sample_her(4096, 1.0, rng);
    CHECK(b.relabeled_count == b.batch_size);
    for (std::size_t r = 0; r < b.batch_size; ++r) {
        const Vec& obs = b.observations[r];  // {e, i, goal_x, goal_y}
        REQUIRE(obs.size() == 4);
        const double e = obs[0];
        const double i = obs[1];
        // Goal must be an achieved goal of the same episode...
        CHECK(obs[2] == e + 100);
        // ...from a step index >= the sampled one (next_obs of j >= i carries
        // achieved index j).
        CHECK(obs[3] >= i);
        CHECK(obs[3] <= 14.0);
        // next_observations carry the same relabeled goal.
        CHECK(b.next_observations[r][2] == obs[2]);
        CHECK(b.next_observations[r][3] == obs[3]);
    }
}

TEST_CASE("relabeled rewards and dones are recomputed from the sparse reward") {
    ReplayBuffer buf(10000, kThreshold);
    for (int e = 0; e < 4; ++e) {
        buf.store_episode(marker_episode(static_cast<double>(e), 10));
    }
    Rng rng(5);
    const SampledBatch b = buf.sample_her(2048, 1.0, rng);
    std::size_t successes = 0;
    for (std::size_t r = 0; r < b.batch_size; ++r) {
        // Achieved at next step is {e+100, i}; goal is {e+100, j} with j >= i.
        const double i = b.observations[r][1];
        const double j = b.observations[r][3];
        const double dist = std::abs(j - i);
        const double expected = dist <= kThreshold ? 0.0 : -1.0;
        CHECK(b.rewards[r] == expected);
        CHECK(b.dones[r] == (expected == 0.0 ? 1.0 : 0.0));
        if (expected == 0.0) ++successes;
    }
    // j == i happens with probability 1/(10 - i), so successes must show up.
    CHECK(successes > 0);
    CHECK(successes < b.batch_size);
}

TEST_CASE("unrelabeled rows keep the stored reward, goal and done flag") {
    ReplayBuffer buf(1000, kThreshold);
    auto ep = marker_episode(0.0, 6);
    for (auto& t : ep) t.done = false;
    ep[3].reward = 0.0;
    ep[3].done = true;
    buf.store_episode(ep);
    Rng rng(6);
    const SampledBatch b = buf.sample_her(512, 0.0, rng);
    CHECK(b.relabeled_count == 0);
    for (std::size_t r = 0; r < b.batch_size; ++r) {
        CHECK(b.observations[r][2] == 100.0);
        CHECK(b.observations[r][3] == 999.0);
        const double i = b.observations[r][1];
        if (i == 3.0) {
            CHECK(b.rewards[r] == 0.0);
            CHECK(b.dones[r] == 1.0);
        } else {
            CHECK(b.rewards[r] == -1.0);
            CHECK(b.dones[r] == 0.0);
        }
    }
}

TEST_CASE("sampling is uniform over transitions across episodes") {
    ReplayBuffer buf(10000, kThreshold);
    buf.store_episode(marker_episode(0.0, 30));
    buf.store_episode(marker_episode(1.0, 10));
    Rng rng(7);
    std::size_t from_long = 0, total = 0;
    for (int it = 0; it < 200; ++it) {
        const SampledBatch b = buf.sample_her(256, 0.0, rng);
        for (std::size_t r = 0; r < b.batch_size; ++r) {
            if (b.observations[r][0] == 0.0) ++from_long;
            ++total;
        }
    }
    const double frac = static_cast<double>(from_long) / static_cast<double>(total);
    CHECK(frac == doctest::Approx(0.75).epsilon(0.03));
}

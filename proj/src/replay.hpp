#pragma once

#include <deque>
#include <random>
#include <vector>

#include "env.hpp"
#include "errors.hpp"

namespace gcrl::replay {

using env::GoalObservation;
using Vec = std::vector<double>;
using Rng = std::mt19937_64;

struct Transition {
    GoalObservation obs;
    Vec action;
    double reward = -1.0;  // extrinsic r_e
    GoalObservation next_obs;
    bool done = false;
};

// Columnar batch handed to the learner. Goals are already concatenated:
// each observation row is observation ‖ desired_goal.
struct SampledBatch {
    std::size_t batch_size = 0;
    std::vector<Vec> observations;
    std::vector<Vec> actions;
    Vec rewards;
    std::vector<Vec> next_observations;
    Vec dones;
    std::size_t relabeled_count = 0;  // bookkeeping for ratio checks
};

// Episode-structured ring buffer. Episodes are stored whole so HER can look
// up achieved goals of future steps within the same episode. Eviction is
// FIFO over whole episodes once the transition count exceeds capacity.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity, double success_threshold)
        : capacity_(capacity), success_threshold_(success_threshold) {}

    void store_episode(std::vector<Transition> episode);

    // HER "future" strategy: each sampled transition is relabeled with
    // probability her_ratio; the new desired goal is the achieved goal of a
    // uniformly chosen step at index >= sampled index + 1 in the same
    // episode, and the reward is recomputed with the sparse goal reward.
    SampledBatch sample_her(std::size_t batch_size, double her_ratio, Rng& rng) const;

    std::size_t size() const { return size_; }
    std::size_t episode_count() const { return episodes_.size(); }
    bool empty() const { return episodes_.empty(); }

private:
    std::size_t capacity_;
    double success_threshold_;
    std::deque<std::vector<Transition>> episodes_;
    std::size_t size_ = 0;
};

}  // namespace gcrl::replay

#include "replay.hpp"

#include <algorithm>

namespace gcrl::replay {

namespace {

Vec concat_obs(const Vec& observation, const Vec& goal) {
    Vec out;
    out.reserve(observation.size() + goal.size());
    out.insert(out.end(), observation.begin(), observation.end());
    out.insert(out.end(), goal.begin(), goal.end());
    return out;
}

}  // namespace

void ReplayBuffer::store_episode(std::vector<Transition> episode) {
    if (episode.empty()) throw InputError("store_episode: empty episode");
    size_ += episode.size();
    episodes_.push_back(std::move(episode));
    while (size_ > capacity_ && episodes_.size() > 1) {
        size_ -= episodes_.front().size();
        episodes_.pop_front();
    }
}

SampledBatch ReplayBuffer::sample_her(std::size_t batch_size, double her_ratio,
                                      Rng& rng) const {
    if (episodes_.empty()) throw StateError("sample_her: replay buffer is empty");
    std::vector<std::size_t> cumulative;
    cumulative.reserve(episodes_.size());
    std::size_t total = 0;
    for (const auto& ep : episodes_) {
        total += ep.size();
        cumulative.push_back(total);
    }

    SampledBatch batch;
    batch.batch_size = batch_size;
    batch.observations.reserve(batch_size);
    batch.actions.reserve(batch_size);
    batch.rewards.reserve(batch_size);
    batch.next_observations.reserve(batch_size);
    batch.dones.reserve(batch_size);

    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t flat = pick(rng);
        const std::size_t ep_idx = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), flat) -
            cumulative.begin());
        const auto& ep = episodes_[ep_idx];
        const std::size_t base = ep_idx == 0 ? 0 : cumulative[ep_idx - 1];
        const std::size_t i = flat - base;
        const Transition& tr = ep[i];

        Vec goal = tr.obs.desired_goal;
        double reward = tr.reward;
        double done = tr.done ? 1.0 : 0.0;
        if (coin(rng) < her_ratio) {
            // Future strategy: goal achieved after some step j >= i of the
            // same episode.
            std::uniform_int_distribution<std::size_t> future(i, ep.size() - 1);
            const std::size_t j = future(rng);
            goal = ep[j].next_obs.achieved_goal;
            reward = env::compute_reward(tr.next_obs.achieved_goal, goal,
                                         success_threshold_);
            // The terminal flag must track the relabeled goal, not the
            // original one.
            done = reward == 0.0 ? 1.0 : 0.0;
            batch.relabeled_count += 1;
        }
        batch.observations.push_back(concat_obs(tr.obs.observation, goal));
        batch.actions.push_back(tr.action);
        batch.rewards.push_back(reward);
        batch.next_observations.push_back(concat_obs(tr.next_obs.observation, goal));
        batch.dones.push_back(done);
    }
    return batch;
}

}  // namespace gcrl::replay

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "config.hpp"
#include "env.hpp"
#include "livemetrics.hpp"
#include "nn.hpp"
#include "replay.hpp"
#include "track.hpp"

namespace gcrl::sacvar {

using nn::Matrix;
using nn::Vec;

// Population variance (divide by N) per row of an N-column matrix of ensemble
// Q-values. N must be >= 2.
Vec critic_variance(const Matrix& q_values);

// (v - min) / (max - min) elementwise; all zeros when max == min.
Vec minmax_scale(const Vec& v);

// r = (1 - eta) * r_e + eta * r_i, elementwise.
Vec mix_reward(const Vec& r_e, const Vec& r_i, double eta);

// target <- (1 - tau) * target + tau * live, per parameter.
void polyak_update(Vec& target_params, const Vec& live_params, double tau);

struct SacConfig {
    double weight_critic_var = 0.0;  // eta
    bool use_intrinsic = true;       // false removes the intrinsic-reward branch
    double gamma = 0.95;
    double tau = 0.05;
    std::size_t n_critics = 2;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    bool auto_alpha = true;
    double alpha = 0.2;  // initial value; fixed when auto_alpha is false
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t buffer_capacity = 100000;
    std::size_t warmup_steps = 1000;
    std::size_t train_freq = 1;  // gradient steps per environment step
    double her_ratio = 0.8;
    bool use_her = true;
    std::size_t total_steps = 50000;
    std::size_t eval_every = 2000;
    std::size_t eval_episodes = 20;
    double early_stop_success = 2.0;  // stop when an evaluation reaches this; >1 disables
    std::uint64_t seed = 0;

    void validate() const;
    // Reads the `algorithm` subtree plus the top-level `seed` key.
    static SacConfig from_tree(const config::ConfigTree& resolved);
};

struct TrainStepLog {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double critic_variance_mean = 0.0;
    double critic_variance_max = 0.0;
    double intrinsic_reward_mean = 0.0;
};

// Soft actor-critic with an N-critic ensemble. The per-batch variance of the
// target critics at (s', a') is min-max scaled into an intrinsic reward and
// mixed into the Bellman target with weight eta.
class SacVarAgent {
public:
    SacVarAgent(const SacConfig& cfg, const env::EnvSpec& spec);

    TrainStepLog train_step(const replay::SampledBatch& batch);

    // Stochastic policy action for collection; deterministic = tanh(mean).
    Vec sample_action(const Vec& obs_goal, bool deterministic);

    double evaluate(env::GoalEnv& e, std::size_t n_episodes, std::uint64_t seed);

    // Full training loop: collection with policy noise, HER storage,
    // gradient steps, periodic evaluation, metric emission. Returns the final
    // evaluation success rate.
    double train(env::GoalEnv& e, track::Run* tracker,
                 livemetrics::MetricChannel* channel = nullptr,
                 livemetrics::StreamWriter* stream = nullptr);

    // Ensemble variance of the target critics at one (obs‖goal, action) pair,
    // the quantity streamed as `critic_variance_mean` for scripted episodes.
    double ensemble_variance(const Vec& obs_goal, const Vec& action) const;

    double alpha() const { return std::exp(log_alpha_); }
    const SacConfig& config() const { return cfg_; }
    const nn::Mlp& actor() const { return actor_; }
    const std::vector<nn::Mlp>& critics() const { return critics_; }
    const std::vector<nn::Mlp>& target_critics() const { return targets_; }
    nn::Mlp& actor_mutable() { return actor_; }

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    Matrix stack_rows(const std::vector<Vec>& rows) const;
    Matrix critic_input(const Matrix& obs, const Matrix& actions) const;

    SacConfig cfg_;
    env::EnvSpec spec_;
    std::size_t in_dim_ = 0;   // observation + goal
    std::size_t act_dim_ = 0;
    nn::Mlp actor_;
    std::vector<nn::Mlp> critics_;
    std::vector<nn::Mlp> targets_;
    nn::AdamState actor_opt_;
    std::vector<nn::AdamState> critic_opts_;
    double log_alpha_ = 0.0;
    nn::AdamState alpha_opt_;
    double target_entropy_ = 0.0;
    nn::Rng rng_;
};

}  // namespace gcrl::sacvar

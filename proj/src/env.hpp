#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gcrl::env {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

struct GoalObservation {
    Vec observation;
    Vec achieved_goal;
    Vec desired_goal;
};

struct StepResult {
    GoalObservation obs;
    double reward = -1.0;  // sparse: -1 until success, then 0
    bool done = false;
    bool is_success = false;
};

struct EnvSpec {
    std::string name;
    std::size_t obs_dim = 0;
    std::size_t goal_dim = 0;
    std::size_t action_dim = 0;
    std::size_t max_episode_steps = 0;
    double success_threshold = 0.0;
};

// Serializable snapshot of the scene for rendering / live streams.
struct RenderFrame {
    Vec agent;
    Vec block;  // empty for environments without a block
    Vec goal;
    bool block_fallen = false;

    bool operator==(const RenderFrame& other) const = default;
};

// Sparse goal-distance reward: 0 when within the threshold (inclusive),
// otherwise -1. Pure function shared by the environments and HER relabeling.
double compute_reward(const Vec& achieved_goal, const Vec& desired_goal,
                      double success_threshold);

// Goal-conditioned environment behind a gym-style sense-act interface.
class GoalEnv {
public:
    virtual ~GoalEnv() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual GoalObservation reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
    virtual StepResult step(const Vec& action) = 0;
    virtual RenderFrame render_state() const = 0;

    double compute_reward(const Vec& achieved, const Vec& desired) const {
        return env::compute_reward(achieved, desired, spec().success_threshold);
    }
};

// Point mass on the [-1,1]^2 plane; actions are velocity commands scaled by
// a fixed step size. achieved_goal is the agent position.
//
// Dynamics per tick: pos <- clamp(pos + kStepSize * clip(action, -1, 1)).
class PointReach final : public GoalEnv {
public:
    static constexpr double kStepSize = 0.1;
    PointReach();
    const EnvSpec& spec() const override { return spec_; }
    GoalObservation reset(std::optional<std::uint64_t> seed) override;
    StepResult step(const Vec& action) override;
    RenderFrame render_state() const override;

private:
    GoalObservation observe() const;
    EnvSpec spec_;
    Rng rng_;
    Vec agent_;
    Vec goal_;
    std::size_t steps_ = 0;
    bool episode_over_ = true;
};

// Point agent pushes a block to a goal on the bounded [-1,1]^2 platform.
// achieved_goal is the block position. When agent and block overlap (distance
// < kContactRadius) after the agent moves, the block is displaced along the
// contact normal so the gap returns to kContactRadius, scaled by kPushGain.
// If the block leaves the platform it falls and stays fallen; the episode can
// then no longer succeed.
class PlanarPush final : public GoalEnv {
public:
    static constexpr double kStepSize = 0.08;
    static constexpr double kContactRadius = 0.12;
    static constexpr double kPushGain = 1.0;
    PlanarPush();
    const EnvSpec& spec() const override { return spec_; }
    GoalObservation reset(std::optional<std::uint64_t> seed) override;
    StepResult step(const Vec& action) override;
    RenderFrame render_state() const override;

private:
    GoalObservation observe() const;
    EnvSpec spec_;
    Rng rng_;
    Vec agent_;
    Vec block_;
    Vec goal_;
    bool block_fallen_ = false;
    std::size_t steps_ = 0;
    bool episode_over_ = true;
};

// Factory over the registered environment names ("PointReach-v0",
// "PlanarPush-v0"). Unknown names raise ConfigError listing valid choices.
std::unique_ptr<GoalEnv> make_env(const std::string& name);
std::vector<std::string> env_names();

}  // namespace gcrl::env

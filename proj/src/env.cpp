#include "env.hpp"

#include <algorithm>
#include <cmath>

namespace gcrl::env {

namespace {

constexpr double kArenaLo = -1.0;
constexpr double kArenaHi = 1.0;
constexpr double kSpawnMargin = 0.2;  // blocks and goals spawn inside this margin
constexpr double kPi = 3.14159265358979323846;

double clampd(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

Vec clip_action(const Vec& action, std::size_t dim) {
    if (action.size() != dim) {
        throw InputError("action has length " + std::to_string(action.size()) +
                         ", expected " + std::to_string(dim));
    }
    Vec a(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!std::isfinite(action[i])) throw NumericError("non-finite action component");
        a[i] = clampd(action[i], -1.0, 1.0);
    }
    return a;
}

Vec sample_point(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    double x = dist(rng);
    double y = dist(rng);
    return {x, y};
}

double dist2d(const Vec& a, const Vec& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double compute_reward(const Vec& achieved_goal, const Vec& desired_goal,
                      double success_threshold) {
    if (achieved_goal.size() != desired_goal.size()) {
        throw InputError("compute_reward: goal length mismatch");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < achieved_goal.size(); ++i) {
        const double d = achieved_goal[i] - desired_goal[i];
        sq += d * d;
    }
    return std::sqrt(sq) <= success_threshold ? 0.0 : -1.0;
}

// ---------------------------------------------------------------------------
// PointReach

PointReach::PointReach() {
    spec_ = {"PointReach-v0", 2, 2, 2, 50, 0.05};
}

GoalObservation PointReach::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_.seed(*seed);
    agent_ = sample_point(rng_, kArenaLo, kArenaHi);
    goal_ = sample_point(rng_, kArenaLo, kArenaHi);
    steps_ = 0;
    episode_over_ = false;
    return observe();
}

GoalObservation PointReach::observe() const {
    return {agent_, agent_, goal_};
}

StepResult PointReach::step(const Vec& action) {
    if (episode_over_) throw StateError("step after episode end; call reset first");
    const Vec a = clip_action(action, spec_.action_dim);
    for (std::size_t i = 0; i < 2; ++i) {
        agent_[i] = clampd(agent_[i] + kStepSize * a[i], kArenaLo, kArenaHi);
    }
    steps_ += 1;
    StepResult res;
    res.obs = observe();
    res.reward = env::compute_reward(res.obs.achieved_goal, res.obs.desired_goal,
                                spec_.success_threshold);
    res.is_success = res.reward == 0.0;
    res.done = res.is_success || steps_ >= spec_.max_episode_steps;
    episode_over_ = res.done;
    return res;
}

RenderFrame PointReach::render_state() const {
    return {agent_, {}, goal_, false};
}

// ---------------------------------------------------------------------------
// PlanarPush

PlanarPush::PlanarPush() {
    spec_ = {"PlanarPush-v0", 4, 2, 2, 60, 0.05};
}

GoalObservation PlanarPush::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_.seed(*seed);
    block_ = sample_point(rng_, kArenaLo + kSpawnMargin, kArenaHi - kSpawnMargin);
    // Agent spawns near the block, goal a moderate push away. Without this
    // the contact event is too rare for a sparse reward to be workable.
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> agent_r(kContactRadius, 3.0 * kContactRadius);
    std::uniform_real_distribution<double> goal_r(0.05, 0.35);
    const double ta = angle(rng_);
    const double ra = agent_r(rng_);
    agent_.assign(2, 0.0);
    goal_.assign(2, 0.0);
    agent_[0] = clampd(block_[0] + ra * std::cos(ta), kArenaLo, kArenaHi);
    agent_[1] = clampd(block_[1] + ra * std::sin(ta), kArenaLo, kArenaHi);
    do {
        const double tg = angle(rng_);
        const double rg = goal_r(rng_);
        goal_[0] = block_[0] + rg * std::cos(tg);
        goal_[1] = block_[1] + rg * std::sin(tg);
    } while (goal_[0] < kArenaLo + kSpawnMargin || goal_[0] > kArenaHi - kSpawnMargin ||
             goal_[1] < kArenaLo + kSpawnMargin || goal_[1] > kArenaHi - kSpawnMargin);
    block_fallen_ = false;
    steps_ = 0;
    episode_over_ = false;
    return observe();
}

GoalObservation PlanarPush::observe() const {
    return {{agent_[0], agent_[1], block_[0], block_[1]}, block_, goal_};
}

StepResult PlanarPush::step(const Vec& action) {
    if (episode_over_) throw StateError("step after episode end; call reset first");
    const Vec a = clip_action(action, spec_.action_dim);
    for (std::size_t i = 0; i < 2; ++i) {
        agent_[i] = clampd(agent_[i] + kStepSize * a[i], kArenaLo, kArenaHi);
    }
    if (!block_fallen_) {
        const double d = dist2d(agent_, block_);
        if (d < kContactRadius) {
            // Push the block out along the contact normal.
            double nx, ny;
            if (d > 1e-12) {
                nx = (block_[0] - agent_[0]) / d;
                ny = (block_[1] - agent_[1]) / d;
            } else {
                nx = 1.0;
                ny = 0.0;
            }
            const double push = kPushGain * (kContactRadius - d);
            block_[0] += push * nx;
            block_[1] += push * ny;
            if (block_[0] < kArenaLo || block_[0] > kArenaHi || block_[1] < kArenaLo ||
                block_[1] > kArenaHi) {
                block_fallen_ = true;
            }
        }
    }
    steps_ += 1;
    StepResult res;
    res.obs = observe();
    res.reward = env::compute_reward(res.obs.achieved_goal, res.obs.desired_goal,
                                spec_.success_threshold);
    res.is_success = res.reward == 0.0;
    res.done = res.is_success || steps_ >= spec_.max_episode_steps;
    episode_over_ = res.done;
    return res;
}

RenderFrame PlanarPush::render_state() const {
    return {agent_, block_, goal_, block_fallen_};
}

// ---------------------------------------------------------------------------

std::unique_ptr<GoalEnv> make_env(const std::string& name) {
    if (name == "PointReach-v0") return std::make_unique<PointReach>();
    if (name == "PlanarPush-v0") return std::make_unique<PlanarPush>();
    std::string msg = "unknown environment '" + name + "'; valid choices:";
    for (const auto& n : env_names()) msg += " " + n;
    throw ConfigError(msg);
}

std::vector<std::string> env_names() {
    return {"PointReach-v0", "PlanarPush-v0"};
}

}  // namespace gcrl::env

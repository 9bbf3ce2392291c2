#include "sacvar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gcrl::sacvar {

Vec critic_variance(const Matrix& q_values) {
    if (q_values.cols < 2) {
        throw ConfigError("critic_variance needs at least 2 critics, got " +
                          std::to_string(q_values.cols));
    }
    Vec out(q_values.rows);
    const double n = static_cast<double>(q_values.cols);
    for (std::size_t r = 0; r < q_values.rows; ++r) {
        const double* row = q_values.row(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < q_values.cols; ++c) mean += row[c];
        mean /= n;
        double var = 0.0;
        for (std::size_t c = 0; c < q_values.cols; ++c) {
            const double d = row[c] - mean;
            var += d * d;
        }
        out[r] = var / n;
    }
    return out;
}

Vec minmax_scale(const Vec& v) {
    if (v.empty()) throw InputError("minmax_scale: empty vector");
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    Vec out(v.size(), 0.0);
    if (hi > lo) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
    }
    return out;
}

Vec mix_reward(const Vec& r_e, const Vec& r_i, double eta) {
    if (r_e.size() != r_i.size()) throw InputError("mix_reward: length mismatch");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("mix_reward: eta must be in [0, 1]");
    Vec out(r_e.size());
    for (std::size_t i = 0; i < r_e.size(); ++i) {
        out[i] = (1.0 - eta) * r_e[i] + eta * r_i[i];
    }
    return out;
}

void polyak_update(Vec& target_params, const Vec& live_params, double tau) {
    if (target_params.size() != live_params.size()) {
        throw InputError("polyak_update: parameter shape mismatch");
    }
    for (std::size_t i = 0; i < target_params.size(); ++i) {
        target_params[i] = (1.0 - tau) * target_params[i] + tau * live_params[i];
    }
}

void SacConfig::validate() const {
    if (weight_critic_var < 0.0 || weight_critic_var > 1.0) {
        throw ConfigError("weight_critic_var must be in [0, 1]");
    }
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in (0, 1)");
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must be in (0, 1]");
    if (n_critics < 2) throw ConfigError("n_critics must be >= 2");
    if (n_critics > 8) throw ConfigError("n_critics must be <= 8");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (her_ratio < 0.0 || her_ratio > 1.0) throw ConfigError("her_ratio must be in [0, 1]");
}

SacConfig SacConfig::from_tree(const config::ConfigTree& resolved) {
    SacConfig cfg;
    const config::ConfigTree& a = config::get_path(resolved, "algorithm");
    auto get = [&](const char* key, auto fallback) {
        using T = decltype(fallback);
        if (a.contains(key)) return a.at(key).get<T>();
        return fallback;
    };
    cfg.weight_critic_var = get("weight_critic_var", cfg.weight_critic_var);
    cfg.use_intrinsic = get("use_intrinsic", cfg.use_intrinsic);
    cfg.gamma = get("gamma", cfg.gamma);
    cfg.tau = get("tau", cfg.tau);
    cfg.n_critics = get("n_critics", cfg.n_critics);
    cfg.learning_rate = get("learning_rate", cfg.learning_rate);
    cfg.batch_size = get("batch_size", cfg.batch_size);
    cfg.auto_alpha = get("auto_alpha", cfg.auto_alpha);
    cfg.alpha = get("alpha", cfg.alpha);
    if (a.contains("hidden")) {
        cfg.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    }
    cfg.buffer_capacity = get("buffer_capacity", cfg.buffer_capacity);
    cfg.warmup_steps = get("warmup_steps", cfg.warmup_steps);
    cfg.train_freq = get("train_freq", cfg.train_freq);
    cfg.her_ratio = get("her_ratio", cfg.her_ratio);
    cfg.use_her = get("use_her", cfg.use_her);
    cfg.total_steps = get("total_steps", cfg.total_steps);
    cfg.eval_every = get("eval_every", cfg.eval_every);
    cfg.eval_episodes = get("eval_episodes", cfg.eval_episodes);
    cfg.early_stop_success = get("early_stop_success", cfg.early_stop_success);
    if (resolved.contains("seed")) cfg.seed = resolved.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

SacVarAgent::SacVarAgent(const SacConfig& cfg, const env::EnvSpec& spec)
    : cfg_(cfg), spec_(spec), alpha_opt_(1, cfg.learning_rate) {
    cfg_.validate();
    in_dim_ = spec.obs_dim + spec.goal_dim;
    act_dim_ = spec.action_dim;
    target_entropy_ = -static_cast<double>(act_dim_);
    log_alpha_ = std::log(cfg_.alpha);
    rng_.seed(cfg_.seed);

    std::vector<std::size_t> actor_sizes = {in_dim_};
    std::vector<std::size_t> critic_sizes = {in_dim_ + act_dim_};
    for (std::size_t h : cfg_.hidden) {
        actor_sizes.push_back(h);
        critic_sizes.push_back(h);
    }
    actor_sizes.push_back(2 * act_dim_);
    critic_sizes.push_back(1);

    actor_ = nn::Mlp(actor_sizes, nn::OutputHead::TanhGaussian);
    actor_.init_params(rng_);
    actor_opt_ = nn::AdamState(actor_.param_count(), cfg_.learning_rate);
    for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
        nn::Mlp critic(critic_sizes, nn::OutputHead::Identity);
        critic.init_params(rng_);
        critic_opts_.emplace_back(critic.param_count(), cfg_.learning_rate);
        targets_.push_back(critic);
        critics_.push_back(std::move(critic));
    }
}

Matrix SacVarAgent::stack_rows(const std::vector<Vec>& rows) const {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols) throw InputError("ragged batch rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r));
    }
    return m;
}

Matrix SacVarAgent::critic_input(const Matrix& obs, const Matrix& actions) const {
    Matrix m(obs.rows, obs.cols + actions.cols);
    for (std::size_t r = 0; r < obs.rows; ++r) {
        std::copy(obs.row(r), obs.row(r) + obs.cols, m.row(r));
        std::copy(actions.row(r), actions.row(r) + actions.cols, m.row(r) + obs.cols);
    }
    return m;
}

namespace {

// Batched squashed-Gaussian sample from actor head outputs. Keeps the
// intermediates the backward pass needs.
struct PolicySample {
    Matrix actions;     // tanh(u)
    Vec log_probs;      // per row
    Matrix u;           // mean + std * eps
    Matrix std;         // exp(clamped log_std)
    Matrix eps;         // the noise draw
    Matrix clamp_mask;  // 1 where log_std was inside the clamp range
};

PolicySample sample_policy(const Matrix& head, std::size_t act_dim, nn::Rng& rng) {
    const std::size_t b = head.rows;
    PolicySample s;
    s.actions = Matrix(b, act_dim);
    s.log_probs.assign(b, 0.0);
    s.u = Matrix(b, act_dim);
    s.std = Matrix(b, act_dim);
    s.eps = Matrix(b, act_dim);
    s.clamp_mask = Matrix(b, act_dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    constexpr double kLogTwoPi = 1.8378770664093454836;
    for (std::size_t r = 0; r < b; ++r) {
        const double* h = head.row(r);
        for (std::size_t j = 0; j < act_dim; ++j) {
            const double mean = h[j];
            const double raw_log_std = h[act_dim + j];
            double log_std = raw_log_std;
            double mask = 1.0;
            if (log_std < nn::kLogStdMin) { log_std = nn::kLogStdMin; mask = 0.0; }
            if (log_std > nn::kLogStdMax) { log_std = nn::kLogStdMax; mask = 0.0; }
            const double std = std::exp(log_std);
            const double eps = normal(rng);
            const double u = mean + std * eps;
            const double a = std::tanh(u);
            s.actions.at(r, j) = a;
            s.u.at(r, j) = u;
            s.std.at(r, j) = std;
            s.eps.at(r, j) = eps;
            s.clamp_mask.at(r, j) = mask;
            const double log1m_a2 =
                2.0 * (std::log(2.0) - u - std::log1p(std::exp(-2.0 * u)));
            s.log_probs[r] += -0.5 * eps * eps - 0.5 * kLogTwoPi - log_std - log1m_a2;
        }
    }
    return s;
}

}  // namespace

TrainStepLog SacVarAgent::train_step(const replay::SampledBatch& batch) {
    const std::size_t b = batch.batch_size;
    if (b == 0) throw InputError("train_step: empty batch");
    const Matrix obs = stack_rows(batch.observations);
    const Matrix next_obs = stack_rows(batch.next_observations);
    const Matrix actions = stack_rows(batch.actions);
    const double alpha = std::exp(log_alpha_);
    const std::size_t n = cfg_.n_critics;

    // (1) next actions and log-probs from the current policy.
    const Matrix next_head = actor_.forward(next_obs);
    const PolicySample next_sample = sample_policy(next_head, act_dim_, rng_);

    // (2) all target critics at (s', a'); entropy-regularized min.
    const Matrix next_in = critic_input(next_obs, next_sample.actions);
    Matrix target_q_values(b, n);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix q = targets_[i].forward(next_in);
        for (std::size_t r = 0; r < b; ++r) target_q_values.at(r, i) = q.at(r, 0);
    }
    Vec next_q(b);
    for (std::size_t r = 0; r < b; ++r) {
        double mn = target_q_values.at(r, 0);
        for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, target_q_values.at(r, i));
        next_q[r] = mn - alpha * next_sample.log_probs[r];
    }

    // (3)/(4) intrinsic reward from the ensemble variance, mixed with eta.
    const Vec variance = critic_variance(target_q_values);
    TrainStepLog log;
    log.critic_variance_mean =
        std::accumulate(variance.begin(), variance.end(), 0.0) / static_cast<double>(b);
    log.critic_variance_max = *std::max_element(variance.begin(), variance.end());
    Vec reward_mod;
    if (cfg_.use_intrinsic) {
        const Vec intrinsic = minmax_scale(variance);
        log.intrinsic_reward_mean =
            std::accumulate(intrinsic.begin(), intrinsic.end(), 0.0) /
            static_cast<double>(b);
        reward_mod = mix_reward(batch.rewards, intrinsic, cfg_.weight_critic_var);
    } else {
        reward_mod = batch.rewards;
    }

    // (5) Bellman target, constant w.r.t. the live critics.
    Vec target_q(b);
    for (std::size_t r = 0; r < b; ++r) {
        target_q[r] = reward_mod[r] + (1.0 - batch.dones[r]) * cfg_.gamma * next_q[r];
    }

    // (6) one Adam step per critic on the MSE to the target.
    const Matrix live_in = critic_input(obs, actions);
    double critic_loss_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        nn::ForwardCache cache;
        const Matrix q = critics_[i].forward(live_in, &cache);
        Matrix dq(b, 1);
        double loss = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            const double diff = q.at(r, 0) - target_q[r];
            loss += diff * diff;
            dq.at(r, 0) = 2.0 * diff / static_cast<double>(b);
        }
        loss /= static_cast<double>(b);
        critic_loss_sum += loss;
        const Vec grads = critics_[i].backward(cache, dq);
        critic_opts_[i].apply(critics_[i].params(), grads);
    }
    log.critic_loss = critic_loss_sum / static_cast<double>(n);

    // (7) actor step: maximize min-ensemble Q minus alpha * log pi.
    nn::ForwardCache actor_cache;
    const Matrix head = actor_.forward(obs, &actor_cache);
    const PolicySample pi = sample_policy(head, act_dim_, rng_);
    const Matrix pi_in = critic_input(obs, pi.actions);
    std::vector<nn::ForwardCache> caches(n);
    Matrix live_q(b, n);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix q = critics_[i].forward(pi_in, &caches[i]);
        for (std::size_t r = 0; r < b; ++r) live_q.at(r, i) = q.at(r, 0);
    }
    std::vector<std::size_t> argmin(b, 0);
    Vec min_q(b);
    double actor_loss = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (live_q.at(r, i) < live_q.at(r, best)) best = i;
        }
        argmin[r] = best;
        min_q[r] = live_q.at(r, best);
        actor_loss += alpha * pi.log_probs[r] - min_q[r];
    }
    actor_loss /= static_cast<double>(b);
    log.actor_loss = actor_loss;

    // dQmin/da via the argmin critic's input gradient per row.
    Matrix dq_da(b, act_dim_);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix sel(b, 1);
        bool any = false;
        for (std::size_t r = 0; r < b; ++r) {
            sel.at(r, 0) = argmin[r] == i ? 1.0 : 0.0;
            any = any || argmin[r] == i;
        }
        if (!any) continue;
        Matrix input_grad;
        critics_[i].backward(caches[i], sel, &input_grad);
        for (std::size_t r = 0; r < b; ++r) {
            if (argmin[r] != i) continue;
            for (std::size_t j = 0; j < act_dim_; ++j) {
                dq_da.at(r, j) = input_grad.at(r, in_dim_ + j);
            }
        }
    }

    Matrix head_grad(b, 2 * act_dim_);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t j = 0; j < act_dim_; ++j) {
            const double a = pi.actions.at(r, j);
            const double du = alpha * 2.0 * a - dq_da.at(r, j) * (1.0 - a * a);
            head_grad.at(r, j) = du * inv_b;
            const double dstd_path = du * (pi.std.at(r, j) * pi.eps.at(r, j));
            head_grad.at(r, act_dim_ + j) =
                pi.clamp_mask.at(r, j) * (dstd_path - alpha) * inv_b;
        }
    }
    const Vec actor_grads = actor_.backward(actor_cache, head_grad);
    actor_opt_.apply(actor_.params(), actor_grads);

    // (8) temperature update toward the entropy target.
    if (cfg_.auto_alpha) {
        double g = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            g += -(pi.log_probs[r] + target_entropy_);
        }
        g *= inv_b;
        Vec p = {log_alpha_};
        Vec gv = {g};
        alpha_opt_.apply(p, gv);
        log_alpha_ = p[0];
    }
    log.alpha = std::exp(log_alpha_);

    // (9) Polyak-averaged target update.
    for (std::size_t i = 0; i < n; ++i) {
        polyak_update(targets_[i].params(), critics_[i].params(), cfg_.tau);
    }

    if (!std::isfinite(log.critic_loss) || !std::isfinite(log.actor_loss) ||
        !std::isfinite(log.alpha)) {
        std::ostringstream diag;
        diag << "non-finite loss in train_step: critic_loss=" << log.critic_loss
             << " actor_loss=" << log.actor_loss << " alpha=" << log.alpha
             << " critic_variance_mean=" << log.critic_variance_mean;
        throw NumericError(diag.str());
    }
    return log;
}

Vec SacVarAgent::sample_action(const Vec& obs_goal, bool deterministic) {
    const Vec head = actor_.forward(obs_goal);
    if (deterministic) {
        Vec a(act_dim_);
        for (std::size_t j = 0; j < act_dim_; ++j) a[j] = std::tanh(head[j]);
        return a;
    }
    Vec noise(act_dim_);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : noise) x = normal(rng_);
    return nn::gaussian_tanh_sample(head, noise).action;
}

double SacVarAgent::evaluate(env::GoalEnv& e, std::size_t n_episodes, std::uint64_t seed) {
    if (n_episodes < 1) throw InputError("evaluate: n_episodes must be >= 1");
    std::size_t successes = 0;
    for (std::size_t ep = 0; ep < n_episodes; ++ep) {
        env::GoalObservation obs = e.reset(seed + ep);
        bool success = false;
        while (true) {
            Vec in = obs.observation;
            in.insert(in.end(), obs.desired_goal.begin(), obs.desired_goal.end());
            const env::StepResult res = e.step(sample_action(in, true));
            obs = res.obs;
            if (res.done) {
                success = res.is_success;
                break;
            }
        }
        if (success) ++successes;
    }
    return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

double SacVarAgent::ensemble_variance(const Vec& obs_goal, const Vec& action) const {
    Matrix in(1, obs_goal.size() + action.size());
    std::copy(obs_goal.begin(), obs_goal.end(), in.row(0));
    std::copy(action.begin(), action.end(), in.row(0) + obs_goal.size());
    Matrix q(1, cfg_.n_critics);
    for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
        q.at(0, i) = targets_[i].forward(in).at(0, 0);
    }
    return critic_variance(q)[0];
}

double SacVarAgent::train(env::GoalEnv& e, track::Run* tracker,
                          livemetrics::MetricChannel* channel,
                          livemetrics::StreamWriter* stream) {
    constexpr std::int64_t kLogEvery = 100;
    auto eval_env = env::make_env(spec_.name);
    replay::ReplayBuffer buffer(cfg_.buffer_capacity, spec_.success_threshold);

    auto log_metric = [&](const std::string& name, double value, std::int64_t step) {
        if (tracker) {
            tracker->log_metric({name, value, step, track::now_ms()});
        }
    };

    double final_success = 0.0;
    try {
        final_success = evaluate(*eval_env, cfg_.eval_episodes, cfg_.seed ^ 0x9e3779b9);
        log_metric("success_rate", final_success, 0);

        env::GoalObservation obs = e.reset(cfg_.seed);
        std::vector<replay::Transition> episode;
        std::int64_t episode_idx = 0;
        TrainStepLog last;
        std::uniform_real_distribution<double> uniform(-1.0, 1.0);

        for (std::size_t step = 1; step <= cfg_.total_steps; ++step) {
            Vec action(act_dim_);
            if (step <= cfg_.warmup_steps) {
                for (auto& x : action) x = uniform(rng_);
            } else {
                Vec in = obs.observation;
                in.insert(in.end(), obs.desired_goal.begin(), obs.desired_goal.end());
                action = sample_action(in, false);
            }
            const env::StepResult res = e.step(action);
            // Store only true terminals; a time-limit cutoff still bootstraps.
            episode.push_back({obs, action, res.reward, res.obs, res.is_success});
            obs = res.obs;

            const bool can_train = step >= cfg_.warmup_steps && !buffer.empty();
            if (can_train) {
                for (std::size_t g = 0; g < cfg_.train_freq; ++g) {
                    const replay::SampledBatch batch = buffer.sample_her(
                        cfg_.batch_size, cfg_.use_her ? cfg_.her_ratio : 0.0, rng_);
                    last = train_step(batch);
                }
                if (static_cast<std::int64_t>(step) % kLogEvery == 0) {
                    const auto s = static_cast<std::int64_t>(step);
                    log_metric("critic_loss", last.critic_loss, s);
                    log_metric("actor_loss", last.actor_loss, s);
                    log_metric("alpha", last.alpha, s);
                    log_metric("critic_variance_mean", last.critic_variance_mean, s);
                    log_metric("intrinsic_reward_mean", last.intrinsic_reward_mean, s);
                }
            }

            if (channel || stream) {
                livemetrics::SyncFrame frame;
                frame.step = static_cast<std::int64_t>(step);
                frame.episode = episode_idx;
                frame.env_frame = e.render_state();
                frame.metrics = {{"reward", res.reward},
                                 {"critic_loss", last.critic_loss},
                                 {"actor_loss", last.actor_loss},
                                 {"alpha", last.alpha},
                                 {"critic_variance_mean", last.critic_variance_mean},
                                 {"intrinsic_reward_mean", last.intrinsic_reward_mean}};
                if (channel) channel->emit(frame);
                if (stream) stream->write(frame);
            }

            if (res.done) {
                buffer.store_episode(std::move(episode));
                episode.clear();
                obs = e.reset();
                ++episode_idx;
            }

            const bool at_eval = step % cfg_.eval_every == 0 || step == cfg_.total_steps;
            if (at_eval) {
                final_success = evaluate(*eval_env, cfg_.eval_episodes,
                                         (cfg_.seed ^ 0x9e3779b9) + step);
                log_metric("success_rate", final_success,
                           static_cast<std::int64_t>(step));
                if (final_success >= cfg_.early_stop_success) break;
            }
        }
        if (tracker) tracker->end("FINISHED");
    } catch (...) {
        if (tracker) tracker->end("FAILED");
        throw;
    }
    return final_success;
}

void SacVarAgent::save(std::ostream& out) const {
    out << "gcrl-sacvar " << cfg_.n_critics << ' ';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", log_alpha_);
    out << buf << '\n';
    nn::save_mlp(out, actor_);
    nn::save_adam(out, actor_opt_);
    for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
        nn::save_mlp(out, critics_[i]);
        nn::save_adam(out, critic_opts_[i]);
        nn::save_mlp(out, targets_[i]);
    }
    nn::save_adam(out, alpha_opt_);
}

void SacVarAgent::load(std::istream& in) {
    std::string magic;
    std::size_t n = 0;
    in >> magic >> n >> log_alpha_;
    if (!in || magic != "gcrl-sacvar") throw IoError("invalid agent checkpoint header");
    if (n != cfg_.n_critics) throw IoError("checkpoint critic count mismatch");
    actor_ = nn::load_mlp(in);
    actor_opt_ = nn::load_adam(in);
    for (std::size_t i = 0; i < n; ++i) {
        critics_[i] = nn::load_mlp(in);
        critic_opts_[i] = nn::load_adam(in);
        targets_[i] = nn::load_mlp(in);
    }
    alpha_opt_ = nn::load_adam(in);
}

}  // namespace gcrl::sacvar

#include "coalab/mappo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace coalab {

void MappoConfig::validate() const {
    if (n_agents == 0) {
        throw std::invalid_argument("mappo: n_agents must be positive");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("mappo: gamma must lie in (0, 1]");
    }
    if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) {
        throw std::invalid_argument("mappo: gae_lambda must lie in (0, 1]");
    }
    if (!(clip_epsilon > 0.0)) {
        throw std::invalid_argument("mappo: clip_epsilon must be positive");
    }
    if (epochs_per_batch == 0 || minibatch_count == 0 || batch_episodes == 0 || hidden == 0 ||
        steps_per_episode <= 0) {
        throw std::invalid_argument("mappo: epochs, minibatches, batch episodes, hidden and steps must be positive");
    }
    if (!(popart_beta > 0.0 && popart_beta < 1.0)) {
        throw std::invalid_argument("mappo: popart_beta must lie in (0, 1)");
    }
    if (!(policy_lr > 0.0) || !(value_lr > 0.0)) {
        throw std::invalid_argument("mappo: learning rates must be positive");
    }
    if (value_loss_coeff < 0.0 || entropy_coeff < 0.0) {
        throw std::invalid_argument("mappo: loss coefficients must be non-negative");
    }
}

double PopArtState::mean() const { return debias > 0.0 ? mean_acc / debias : 0.0; }

double PopArtState::variance() const {
    if (debias <= 0.0) {
        return 1.0;
    }
    const double m = mean();
    return std::max(mean_sq_acc / debias - m * m, variance_floor);
}

double PopArtState::stddev() const { return std::sqrt(variance()); }

double PopArtState::normalize(double x) const { return enabled ? (x - mean()) / stddev() : x; }

double PopArtState::denormalize(double x) const { return enabled ? x * stddev() + mean() : x; }

std::vector<double> popart_update_and_normalize(PopArtState& state, std::span<const double> targets) {
    std::vector<double> out(targets.begin(), targets.end());
    if (!state.enabled || targets.empty()) {
        return out;
    }
    double m = 0.0;
    double sq = 0.0;
    for (double t : targets) {
        if (!std::isfinite(t)) {
            throw std::invalid_argument("popart: non-finite target");
        }
        m += t;
        sq += t * t;
    }
    m /= static_cast<double>(targets.size());
    sq /= static_cast<double>(targets.size());
    state.mean_acc = state.beta * state.mean_acc + (1.0 - state.beta) * m;
    state.mean_sq_acc = state.beta * state.mean_sq_acc + (1.0 - state.beta) * sq;
    state.debias = state.beta * state.debias + (1.0 - state.beta);
    for (double& t : out) {
        t = state.normalize(t);
    }
    return out;
}

void popart_preserve_outputs(DenseLayer& head, double old_mean, double old_std, double new_mean, double new_std) {
    if (!(new_std > 0.0) || !(old_std > 0.0)) {
        throw std::invalid_argument("popart: standard deviations must be positive");
    }
    head.weight *= old_std / new_std;
    head.bias = ((old_std * head.bias).array() + old_mean - new_mean) / new_std;
}

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
    }
}

}  // namespace

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                        const std::vector<bool>& dones, double gamma, double lambda) {
    check_lengths(rewards.size(), values.size(), "gae");
    check_lengths(rewards.size(), dones.size(), "gae");
    std::vector<double> adv(rewards.size());
    double next_value = bootstrap_value;
    double next_adv = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        const double live = dones[k] ? 0.0 : 1.0;
        const double delta = rewards[k] + gamma * live * next_value - values[k];
        adv[k] = delta + gamma * lambda * live * next_adv;
        next_value = values[k];
        next_adv = adv[k];
    }
    return adv;
}

std::vector<double> reward_to_go(std::span<const double> rewards, double bootstrap_value, const std::vector<bool>& dones,
                                 double gamma) {
    check_lengths(rewards.size(), dones.size(), "reward_to_go");
    std::vector<double> out(rewards.size());
    double next = bootstrap_value;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        out[k] = rewards[k] + gamma * (dones[k] ? 0.0 : 1.0) * next;
        next = out[k];
    }
    return out;
}

double clipped_objective(double log_ratio, double advantage, double epsilon) {
    const double rho = std::exp(log_ratio);
    return std::min(rho * advantage, std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

double clipped_objective_grad(double log_ratio, double advantage, double epsilon) {
    const double rho = std::exp(log_ratio);
    const double unclipped = rho * advantage;
    const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon) * advantage;
    if (unclipped <= clipped) {
        return unclipped;
    }
    return 0.0;
}

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, const Eigen::VectorXd& x) {
    if (mean.size() != log_std.size() || mean.size() != x.size()) {
        throw std::invalid_argument("gaussian_log_prob: dimension mismatch");
    }
    double lp = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double z = (x[d] - mean[d]) * std::exp(-log_std[d]);
        lp += -0.5 * z * z - log_std[d] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
    return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * (1.0 + std::log(2.0 * std::numbers::pi));
}

MappoModel MappoModel::create(std::size_t obs_size, std::size_t state_size, const MappoConfig& config, Rng& rng) {
    MappoModel m;
    const std::size_t policy_sizes[] = {obs_size, config.hidden, config.hidden, 2};
    const std::size_t value_sizes[] = {state_size, config.hidden, config.hidden, 1};
    m.policy = Mlp::create(policy_sizes, Activation::Tanh, Activation::Identity, config.policy_output_gain, rng);
    m.log_std = Eigen::VectorXd::Constant(2, config.log_std_init);
    m.value = Mlp::create(value_sizes, Activation::Tanh, Activation::Identity, 1.0, rng);
    m.popart.enabled = config.popart_enabled;
    m.popart.beta = config.popart_beta;
    m.policy_opt = AdamState::for_size(m.policy.parameter_count() + 2, config.policy_lr);
    m.value_opt = AdamState::for_size(m.value.parameter_count(), config.value_lr);
    return m;
}

double MappoModel::value_of(const Eigen::VectorXd& state) const { return popart.denormalize(value.forward(state)[0]); }

PolicyLoss policy_loss_and_grad(const Mlp& policy, const Eigen::VectorXd& log_std, const Eigen::MatrixXd& obs,
                                const Eigen::MatrixXd& actions, std::span<const double> old_log_probs,
                                std::span<const double> advantages, double epsilon, double entropy_coeff) {
    const auto m = static_cast<std::size_t>(obs.cols());
    check_lengths(m, static_cast<std::size_t>(actions.cols()), "policy loss actions");
    check_lengths(m, old_log_probs.size(), "policy loss log-probabilities");
    check_lengths(m, advantages.size(), "policy loss advantages");
    if (m == 0) {
        throw std::invalid_argument("policy loss: empty batch");
    }
    MlpTape tape;
    const Eigen::MatrixXd mean = policy.forward_batch(obs, &tape);
    const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
    const double scale = 1.0 / static_cast<double>(m);

    PolicyLoss out;
    Eigen::MatrixXd d_mean(mean.rows(), mean.cols());
    out.grad_log_std = Eigen::VectorXd::Zero(log_std.size());
    double objective = 0.0;
    std::size_t clipped = 0;
    for (std::size_t c = 0; c < m; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const Eigen::VectorXd mu = mean.col(ci);
        const Eigen::VectorXd u = actions.col(ci);
        const double log_ratio = gaussian_log_prob(mu, log_std, u) - old_log_probs[c];
        objective += clipped_objective(log_ratio, advantages[c], epsilon);
        const double g = clipped_objective_grad(log_ratio, advantages[c], epsilon);
        if (g == 0.0 && advantages[c] != 0.0) {
            ++clipped;
        }
        const Eigen::ArrayXd diff = (u - mu).array();
        d_mean.col(ci) = (-scale * g * diff * inv_var).matrix();
        out.grad_log_std.array() -= scale * g * (diff.square() * inv_var - 1.0);
    }
    out.grad_log_std.array() -= entropy_coeff;
    out.loss = -objective * scale - entropy_coeff * gaussian_entropy(log_std);
    out.grad_params = policy.backward_batch(tape, d_mean);
    out.clip_fraction = static_cast<double>(clipped) * scale;
    return out;
}

ValueLoss value_loss_and_grad(const Mlp& value, const Eigen::MatrixXd& states, std::span<const double> targets) {
    const auto m = static_cast<std::size_t>(states.cols());
    check_lengths(m, targets.size(), "value loss");
    if (m == 0) {
        throw std::invalid_argument("value loss: empty batch");
    }
    MlpTape tape;
    const Eigen::RowVectorXd v = value.forward_batch(states, &tape);
    Eigen::RowVectorXd err(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        err(static_cast<Eigen::Index>(c)) = v(static_cast<Eigen::Index>(c)) - targets[c];
    }
    ValueLoss out;
    out.loss = err.squaredNorm() / static_cast<double>(m);
    Eigen::MatrixXd upstream = (2.0 / static_cast<double>(m)) * err;
    out.grad = value.backward_batch(tape, upstream);
    return out;
}

namespace {

Eigen::VectorXd concat(const std::vector<Observation>& obs) {
    Eigen::Index n = 0;
    for (const auto& o : obs) {
        n += o.size();
    }
    Eigen::VectorXd s(n);
    Eigen::Index r = 0;
    for (const auto& o : obs) {
        s.segment(r, o.size()) = o;
        r += o.size();
    }
    return s;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
    }
    return out;
}

std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto k : idx) {
        out.push_back(v[k]);
    }
    return out;
}

struct Sample {
    Eigen::VectorXd state;
    Eigen::VectorXd obs;
    Eigen::VectorXd action;
    double log_prob;
};

PolicySet snapshot_policy(const MultiAgentEnv& env, const MappoModel& model) {
    PolicySet p;
    p.algorithm = Algorithm::Mappo;
    p.kind = env.kind();
    p.layout = env.layout();
    p.max_speed = env.config().max_speed;
    p.actors.push_back(model.policy);
    return p;
}

}  // namespace

void RolloutBuffer::check() const {
    const std::size_t n = size();
    const bool ok = states.size() == n && observations.size() == n && actions.size() == n && rewards.size() == n &&
                    values.size() == n && dones.size() == n && (advantages.empty() || advantages.size() == n) &&
                    (returns.empty() || returns.size() == n);
    if (!ok) {
        throw std::logic_error("rollout buffer columns have different lengths");
    }
}

MappoResult train_mappo(MultiAgentEnv& env, const MappoConfig& config, std::uint64_t seed,
                        const TrainHooks& hooks) {
    config.validate();
    if (env.agent_count() != config.n_agents) {
        throw std::invalid_argument("mappo: config has " + std::to_string(config.n_agents) +
                                    " agents, environment has " + std::to_string(env.agent_count()));
    }
    Rng init_rng = make_rng(seed, 0);
    Rng action_rng = make_rng(seed, 1);
    Rng shuffle_rng = make_rng(seed, 2);

    const std::size_t obs_size = env.layout().size();
    const std::size_t n = config.n_agents;
    MappoResult result;
    result.model = MappoModel::create(obs_size, obs_size * n, config, init_rng);
    MappoModel& model = result.model;
    const double max_speed = env.config().max_speed;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::size_t pending_checkpoint = 0;
    for (std::size_t first = 0; first < config.episodes; first += config.batch_episodes) {
        const std::size_t last = std::min(config.episodes, first + config.batch_episodes);
        RolloutBuffer buf;

        for (std::size_t ep = first; ep < last; ++ep) {
            std::vector<Observation> obs = env.reset(mix_seed(seed, 1000 + ep));
            CurveRow row;
            row.episode = ep;
            std::vector<double> rewards;
            std::vector<double> values;
            std::vector<bool> dones;
            std::vector<Sample> episode_samples;
            double bootstrap = 0.0;
            for (int t = 0; t < config.steps_per_episode; ++t) {
                const Eigen::VectorXd state = concat(obs);
                values.push_back(model.value_of(state));
                std::vector<Action> actions;
                for (std::size_t i = 0; i < n; ++i) {
                    const Eigen::VectorXd mean = model.policy.forward(obs[i]);
                    Eigen::VectorXd u(mean.size());
                    for (Eigen::Index d = 0; d < u.size(); ++d) {
                        u[d] = mean[d] + std::exp(model.log_std[d]) * normal(action_rng);
                    }
                    episode_samples.push_back({state, obs[i], u, gaussian_log_prob(mean, model.log_std, u)});
                    actions.push_back(to_action(u, max_speed));
                }
                EnvStep st = env.step(actions);
                double team = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    team += st.rewards[i];
                    for (std::size_t k = 0; k < 7; ++k) {
                        row.components[k] += st.breakdowns[i].components[k] * inv_n;
                    }
                }
                team *= inv_n;
                rewards.push_back(team);
                dones.push_back(st.terminal);
                row.episode_return += team;
                row.collisions += st.real_collisions;
                row.steps = t + 1;
                if (hooks.on_step) {
                    hooks.on_step({ep, t, team});
                }
                obs = std::move(st.observations);
                if (st.terminal) {
                    break;
                }
                if (st.truncated || t + 1 == config.steps_per_episode) {
                    bootstrap = model.value_of(concat(obs));
                    break;
                }
            }
            const auto adv = gae(rewards, values, bootstrap, dones, config.gamma, config.gae_lambda);
            const auto ret = reward_to_go(rewards, bootstrap, dones, config.gamma);
            for (std::size_t t = 0; t < rewards.size(); ++t) {
                for (std::size_t i = 0; i < n; ++i) {
                    Sample& s = episode_samples[t * n + i];
                    buf.states.push_back(std::move(s.state));
                    buf.observations.push_back(std::move(s.obs));
                    buf.actions.push_back(std::move(s.action));
                    buf.log_probs.push_back(s.log_prob);
                    buf.rewards.push_back(rewards[t]);
                    buf.values.push_back(values[t]);
                    buf.dones.push_back(dones[t]);
                    buf.advantages.push_back(adv[t]);
                    buf.returns.push_back(ret[t]);
                }
            }
            result.curve.push_back(row);
            if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && (ep + 1) % hooks.checkpoint_every == 0) {
                pending_checkpoint = ep + 1;
            }
        }

        buf.check();
        const std::size_t m = buf.size();
        if (m == 0) {
            continue;
        }
        std::vector<double>& advantages = buf.advantages;
        const double adv_mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / static_cast<double>(m);
        double adv_var = 0.0;
        for (double a : advantages) {
            adv_var += (a - adv_mean) * (a - adv_mean);
        }
        const double adv_std = std::sqrt(adv_var / static_cast<double>(m));
        for (double& a : advantages) {
            a = (a - adv_mean) / (adv_std + 1e-8);
        }

        const double old_mean = model.popart.mean();
        const double old_std = model.popart.stddev();
        const std::vector<double> targets = popart_update_and_normalize(model.popart, buf.returns);
        if (model.popart.enabled) {
            popart_preserve_outputs(model.value.layers().back(), old_mean, old_std, model.popart.mean(),
                                    model.popart.stddev());
        }

        Eigen::MatrixXd states(static_cast<Eigen::Index>(obs_size * n), static_cast<Eigen::Index>(m));
        Eigen::MatrixXd observations(static_cast<Eigen::Index>(obs_size), static_cast<Eigen::Index>(m));
        Eigen::MatrixXd actions(2, static_cast<Eigen::Index>(m));
        for (std::size_t c = 0; c < m; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            states.col(ci) = buf.states[c];
            observations.col(ci) = buf.observations[c];
            actions.col(ci) = buf.actions[c];
        }
        const std::vector<double>& old_log_probs = buf.log_probs;

        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        const std::size_t chunks = std::min(config.minibatch_count, m);
        for (std::size_t epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
            if (chunks > 1) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
            }
            for (std::size_t k = 0; k < chunks; ++k) {
                const std::size_t lo = k * m / chunks;
                const std::size_t hi = (k + 1) * m / chunks;
                const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                                   order.begin() + static_cast<std::ptrdiff_t>(hi));

                PolicyLoss pl = policy_loss_and_grad(model.policy, model.log_std, gather(observations, idx),
                                                     gather(actions, idx), gather(old_log_probs, idx),
                                                     gather(advantages, idx), config.clip_epsilon,
                                                     config.entropy_coeff);
                Eigen::VectorXd pg(pl.grad_params.size() + pl.grad_log_std.size());
                pg << pl.grad_params, pl.grad_log_std;
                clip_grad_norm(pg, config.max_grad_norm);
                Eigen::VectorXd flat(pg.size());
                flat << model.policy.parameters(), model.log_std;
                adam_step(flat, pg, model.policy_opt);
                model.policy.set_parameters(flat.head(pl.grad_params.size()));
                model.log_std = flat.tail(pl.grad_log_std.size());

                ValueLoss vl = value_loss_and_grad(model.value, gather(states, idx), gather(targets, idx));
                Eigen::VectorXd vg = config.value_loss_coeff * vl.grad;
                clip_grad_norm(vg, config.max_grad_norm);
                adam_step(model.value, vg, model.value_opt);
                ++result.updates;
            }
        }
        if (pending_checkpoint > 0) {
            hooks.on_checkpoint(pending_checkpoint, snapshot_policy(env, model));
            pending_checkpoint = 0;
        }
    }
    result.policy = snapshot_policy(env, model);
    return result;
}

}  // namespace coalab

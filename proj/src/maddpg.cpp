#include "coalab/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace coalab {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw std::invalid_argument("replay buffer capacity must be positive");
    }
}

void ReplayBuffer::push(Transition t) {
    if (!items_.empty()) {
        const auto& ref = items_.front();
        if (t.x.size() != ref.x.size() || t.actions.size() != ref.x.size() || t.rewards.size() != ref.x.size() ||
            t.x_next.size() != ref.x.size()) {
            throw std::invalid_argument("transition arity does not match the buffer");
        }
    } else if (t.actions.size() != t.x.size() || t.rewards.size() != t.x.size() || t.x_next.size() != t.x.size()) {
        throw std::invalid_argument("transition fields have different agent counts");
    }
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
    const std::size_t n = items_.size();
    if (count > n) {
        throw std::invalid_argument("cannot sample " + std::to_string(count) + " of " + std::to_string(n) +
                                    " transitions without replacement");
    }
    // Floyd's algorithm.
    std::set<std::size_t> chosen;
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t j = n - count; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        const std::size_t v = chosen.insert(t).second ? t : j;
        if (v == j) {
            chosen.insert(j);
        }
        out.push_back(v);
    }
    return out;
}

void MaddpgConfig::validate() const {
    if (n_agents == 0) {
        throw std::invalid_argument("maddpg: n_agents must be positive");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("maddpg: gamma must lie in (0, 1]");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("maddpg: tau must lie in (0, 1]");
    }
    if (batch_size == 0 || batch_size > buffer_capacity) {
        throw std::invalid_argument("maddpg: batch_size must be in [1, buffer_capacity]");
    }
    if (effective_warmup() < batch_size) {
        throw std::invalid_argument("maddpg: warmup must be at least batch_size");
    }
    if (update_every == 0 || steps_per_episode <= 0 || hidden == 0) {
        throw std::invalid_argument("maddpg: update_every, steps_per_episode and hidden must be positive");
    }
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
        throw std::invalid_argument("maddpg: learning rates must be positive");
    }
    if (action_reg < 0.0) {
        throw std::invalid_argument("maddpg: action_reg must be non-negative");
    }
    if (noise_sigma_start < 0.0 || noise_sigma_end < 0.0) {
        throw std::invalid_argument("maddpg: noise sigma must be non-negative");
    }
}

double MaddpgConfig::noise_sigma(std::size_t episode) const {
    if (noise_decay_episodes == 0 || episode >= noise_decay_episodes) {
        return noise_sigma_end;
    }
    const double f = static_cast<double>(episode) / static_cast<double>(noise_decay_episodes);
    return noise_sigma_start + (noise_sigma_end - noise_sigma_start) * f;
}

MaddpgNets MaddpgNets::create(const std::vector<std::size_t>& obs_sizes, const MaddpgConfig& config, Rng& rng) {
    if (obs_sizes.size() != config.n_agents) {
        throw std::invalid_argument("maddpg: got " + std::to_string(obs_sizes.size()) + " observation sizes for " +
                                    std::to_string(config.n_agents) + " agents");
    }
    MaddpgNets nets;
    nets.obs_sizes = obs_sizes;
    const std::size_t critic_in = nets.joint_obs_size() + 2 * config.n_agents;
    for (std::size_t i = 0; i < config.n_agents; ++i) {
        MaddpgAgent a;
        const std::size_t actor_sizes[] = {obs_sizes[i], config.hidden, config.hidden, 2};
        const std::size_t critic_sizes[] = {critic_in, config.hidden, config.hidden, 1};
        a.actor = Mlp::create(actor_sizes, Activation::Relu, Activation::Tanh, config.actor_output_gain, rng);
        a.critic = Mlp::create(critic_sizes, Activation::Relu, Activation::Identity, 1.0, rng);
        a.target_actor = a.actor;
        a.target_critic = a.critic;
        a.actor_opt = AdamState::for_size(a.actor.parameter_count(), config.actor_lr);
        a.critic_opt = AdamState::for_size(a.critic.parameter_count(), config.critic_lr);
        nets.agents.push_back(std::move(a));
    }
    return nets;
}

std::size_t MaddpgNets::joint_obs_size() const {
    std::size_t n = 0;
    for (auto s : obs_sizes) {
        n += s;
    }
    return n;
}

namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
    }
    Eigen::MatrixXd out(rows, blocks.empty() ? 0 : blocks.front().cols());
    Eigen::Index r = 0;
    for (const auto& b : blocks) {
        out.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return out;
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& joint_obs, const Eigen::MatrixXd& actions) {
    Eigen::MatrixXd in(joint_obs.rows() + actions.rows(), joint_obs.cols());
    in.topRows(joint_obs.rows()) = joint_obs;
    in.bottomRows(actions.rows()) = actions;
    return in;
}

}  // namespace

Eigen::MatrixXd MaddpgBatch::joint_obs() const { return stack(obs); }
Eigen::MatrixXd MaddpgBatch::joint_next_obs() const { return stack(next_obs); }

MaddpgBatch make_batch(const std::vector<const Transition*>& items) {
    if (items.empty()) {
        throw std::invalid_argument("empty minibatch");
    }
    const std::size_t n = items.front()->x.size();
    const auto s = static_cast<Eigen::Index>(items.size());
    MaddpgBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = items.front()->x[i].size();
        b.obs.emplace_back(d, s);
        b.next_obs.emplace_back(d, s);
    }
    b.actions.resize(static_cast<Eigen::Index>(2 * n), s);
    b.rewards.resize(static_cast<Eigen::Index>(n), s);
    b.done.resize(s);
    for (Eigen::Index c = 0; c < s; ++c) {
        const Transition& t = *items[static_cast<std::size_t>(c)];
        if (t.x.size() != n) {
            throw std::invalid_argument("minibatch mixes agent counts");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            b.obs[i].col(c) = t.x[i];
            b.next_obs[i].col(c) = t.x_next[i];
            b.actions.block(2 * ii, c, 2, 1) = t.actions[i];
            b.rewards(ii, c) = t.rewards[i];
        }
        b.done(c) = t.done ? 1.0 : 0.0;
    }
    return b;
}

Eigen::VectorXd select_normalized(const Mlp& actor, const Observation& obs, double noise_sigma, Rng& rng) {
    if (static_cast<std::size_t>(obs.size()) != actor.input_size()) {
        throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " entries, actor expects " +
                                    std::to_string(actor.input_size()));
    }
    Eigen::VectorXd a = actor.forward(obs);
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            a[k] += noise(rng);
        }
    }
    return a.cwiseMax(-1.0).cwiseMin(1.0);
}

Action select_action(const Mlp& actor, const Observation& obs, double noise_sigma, double max_speed, Rng& rng) {
    return to_action(select_normalized(actor, obs, noise_sigma, rng), max_speed);
}

double critic_target(double r, bool done, double gamma, double q_next) { return r + (done ? 0.0 : gamma * q_next); }

double critic_update(std::size_t agent, const MaddpgBatch& batch, MaddpgNets& nets, const MaddpgConfig& config) {
    auto& me = nets.agents.at(agent);
    const auto s = static_cast<Eigen::Index>(batch.size());

    Eigen::MatrixXd next_actions(batch.actions.rows(), s);
    for (std::size_t j = 0; j < nets.agents.size(); ++j) {
        next_actions.middleRows(2 * static_cast<Eigen::Index>(j), 2) =
            nets.agents[j].target_actor.forward_batch(batch.next_obs[j]);
    }
    const Eigen::RowVectorXd q_next = me.target_critic.forward_batch(critic_input(batch.joint_next_obs(), next_actions));
    Eigen::RowVectorXd y(s);
    for (Eigen::Index c = 0; c < s; ++c) {
        y(c) = critic_target(batch.rewards(static_cast<Eigen::Index>(agent), c), batch.done(c) != 0.0, config.gamma,
                             q_next(c));
    }

    MlpTape tape;
    const Eigen::RowVectorXd q = me.critic.forward_batch(critic_input(batch.joint_obs(), batch.actions), &tape);
    const Eigen::RowVectorXd err = q - y;
    const double loss = err.squaredNorm() / static_cast<double>(s);
    Eigen::MatrixXd upstream = (2.0 / static_cast<double>(s)) * err;
    Eigen::VectorXd grads = me.critic.backward_batch(tape, upstream);
    clip_grad_norm(grads, config.grad_clip);
    adam_step(me.critic, grads, me.critic_opt);
    return loss;
}

ActorObjective actor_objective(std::size_t agent, const MaddpgBatch& batch, const MaddpgNets& nets) {
    const auto& me = nets.agents.at(agent);
    const auto s = static_cast<Eigen::Index>(batch.size());
    const auto row = 2 * static_cast<Eigen::Index>(agent);

    MlpTape actor_tape;
    const Eigen::MatrixXd mine = me.actor.forward_batch(batch.obs[agent], &actor_tape);
    Eigen::MatrixXd actions = batch.actions;
    actions.middleRows(row, 2) = mine;

    const Eigen::MatrixXd joint = batch.joint_obs();
    MlpTape critic_tape;
    const Eigen::RowVectorXd q = me.critic.forward_batch(critic_input(joint, actions), &critic_tape);
    const Eigen::MatrixXd upstream = Eigen::RowVectorXd::Constant(s, 1.0 / static_cast<double>(s));
    Eigen::MatrixXd d_input;
    (void)me.critic.backward_batch(critic_tape, upstream, &d_input);
    const Eigen::MatrixXd d_action = d_input.middleRows(joint.rows() + row, 2);

    ActorObjective out;
    out.mean_q = q.mean();
    out.grad = me.actor.backward_batch(actor_tape, d_action);
    return out;
}

Eigen::VectorXd action_reg_grad(const Mlp& actor, const Eigen::MatrixXd& obs, double action_reg) {
    if (action_reg == 0.0) {
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actor.parameter_count()));
    }
    Mlp linear_head = actor;
    linear_head.layers().back().activation = Activation::Identity;
    MlpTape tape;
    const Eigen::MatrixXd z = linear_head.forward_batch(obs, &tape);
    const Eigen::MatrixXd upstream = (2.0 * action_reg / static_cast<double>(z.size())) * z;
    return linear_head.backward_batch(tape, upstream);
}

double actor_update(std::size_t agent, const MaddpgBatch& batch, MaddpgNets& nets, const MaddpgConfig& config) {
    ActorObjective obj = actor_objective(agent, batch, nets);
    Eigen::VectorXd descent = -obj.grad + action_reg_grad(nets.agents.at(agent).actor, batch.obs[agent], config.action_reg);
    clip_grad_norm(descent, config.grad_clip);
    auto& me = nets.agents.at(agent);
    adam_step(me.actor, descent, me.actor_opt);
    return obj.mean_q;
}

void soft_update_targets(MaddpgNets& nets, double tau) {
    for (auto& a : nets.agents) {
        a.target_actor = soft_update(a.target_actor, a.actor, tau);
        a.target_critic = soft_update(a.target_critic, a.critic, tau);
    }
}

namespace {

PolicySet snapshot_policy(const MultiAgentEnv& env, const MaddpgNets& nets) {
    PolicySet p;
    p.algorithm = Algorithm::Maddpg;
    p.kind = env.kind();
    p.layout = env.layout();
    p.max_speed = env.config().max_speed;
    for (const auto& a : nets.agents) {
        p.actors.push_back(a.actor);
    }
    return p;
}

}  // namespace

MaddpgResult train_maddpg(MultiAgentEnv& env, const MaddpgConfig& config, std::uint64_t seed,
                          const TrainHooks& hooks) {
    config.validate();
    if (env.agent_count() != config.n_agents) {
        throw std::invalid_argument("maddpg: config has " + std::to_string(config.n_agents) +
                                    " agents, environment has " + std::to_string(env.agent_count()));
    }
    Rng init_rng = make_rng(seed, 0);
    Rng noise_rng = make_rng(seed, 1);
    Rng sample_rng = make_rng(seed, 2);

    const std::size_t obs_size = env.layout().size();
    MaddpgResult result;
    result.nets = MaddpgNets::create(std::vector<std::size_t>(config.n_agents, obs_size), config, init_rng);
    MaddpgNets& nets = result.nets;
    ReplayBuffer buffer(config.buffer_capacity);
    const double max_speed = env.config().max_speed;
    const double inv_n = 1.0 / static_cast<double>(config.n_agents);
    std::size_t total_steps = 0;

    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
        const double sigma = config.noise_sigma(ep);
        std::vector<Observation> obs = env.reset(mix_seed(seed, 1000 + ep));
        CurveRow row;
        row.episode = ep;
        for (int t = 0; t < config.steps_per_episode; ++t) {
            Transition tr;
            tr.x = obs;
            std::vector<Action> actions;
            for (std::size_t i = 0; i < config.n_agents; ++i) {
                tr.actions.push_back(select_normalized(nets.agents[i].actor, obs[i], sigma, noise_rng));
                actions.push_back(to_action(tr.actions.back(), max_speed));
            }
            EnvStep st = env.step(actions);
            tr.rewards = st.rewards;
            tr.x_next = st.observations;
            tr.done = st.terminal;
            buffer.push(std::move(tr));
            ++total_steps;

            double team = 0.0;
            for (std::size_t i = 0; i < config.n_agents; ++i) {
                team += st.rewards[i];
                for (std::size_t k = 0; k < 7; ++k) {
                    row.components[k] += st.breakdowns[i].components[k] * inv_n;
                }
            }
            team *= inv_n;
            row.episode_return += team;
            row.collisions += st.real_collisions;
            row.steps = t + 1;
            if (hooks.on_step) {
                hooks.on_step({ep, t, team});
            }

            if (buffer.size() >= config.effective_warmup() && total_steps % config.update_every == 0) {
                for (std::size_t i = 0; i < config.n_agents; ++i) {
                    const auto idx = buffer.sample_indices(config.batch_size, sample_rng);
                    std::vector<const Transition*> items;
                    items.reserve(idx.size());
                    for (auto k : idx) {
                        items.push_back(&buffer.at(k));
                    }
                    const MaddpgBatch batch = make_batch(items);
                    critic_update(i, batch, nets, config);
                    actor_update(i, batch, nets, config);
                }
                soft_update_targets(nets, config.tau);
                ++result.update_rounds;
            }

            obs = std::move(st.observations);
            if (st.terminal || st.truncated) {
                break;
            }
        }
        result.curve.push_back(row);
        if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && (ep + 1) % hooks.checkpoint_every == 0) {
            hooks.on_checkpoint(ep + 1, snapshot_policy(env, nets));
        }
    }
    result.transitions_stored = total_steps;
    result.policy = snapshot_policy(env, nets);
    return result;
}

}  // namespace coalab

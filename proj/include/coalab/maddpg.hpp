#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "coalab/env.hpp"
#include "coalab/neural.hpp"
#include "coalab/policy.hpp"
#include "coalab/rng.hpp"

namespace coalab {

/// Actions are stored normalized to [-1, 1] per axis.
struct Transition {
    std::vector<Observation> x;
    std::vector<Eigen::VectorXd> actions;
    std::vector<double> rewards;
    std::vector<Observation> x_next;
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    [[nodiscard]] std::size_t size() const { return items_.size(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] const Transition& at(std::size_t i) const { return items_.at(i); }

    /// count distinct indices, uniformly, without replacement.
    std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> items_;
};

struct MaddpgConfig {
    std::size_t n_agents = 1;
    double actor_lr = 0.01;
    double critic_lr = 0.01;
    double gamma = 0.99;
    double tau = 0.01;
    std::size_t batch_size = 1024;
    std::size_t buffer_capacity = 1'000'000;
    // 0 means "same as batch_size".
    std::size_t warmup = 0;
    std::size_t update_every = 25;
    double noise_sigma_start = 0.3;
    double noise_sigma_end = 0.05;
    std::size_t noise_decay_episodes = 2500;
    std::size_t episodes = 5000;
    int steps_per_episode = 70;
    std::size_t hidden = 64;
    double grad_clip = 0.5;
    double actor_output_gain = 0.01;
    // Weight of the mean squared pre-tanh actor output added to the actor loss.
    double action_reg = 0.0;

    void validate() const;
    [[nodiscard]] std::size_t effective_warmup() const { return warmup == 0 ? batch_size : warmup; }
    [[nodiscard]] double noise_sigma(std::size_t episode) const;
    friend bool operator==(const MaddpgConfig&, const MaddpgConfig&) = default;
};

struct MaddpgAgent {
    Mlp actor;
    Mlp critic;
    Mlp target_actor;
    Mlp target_critic;
    AdamState actor_opt;
    AdamState critic_opt;
};

struct MaddpgNets {
    std::vector<MaddpgAgent> agents;
    std::vector<std::size_t> obs_sizes;

    /// Actors see obs_sizes[i]; every critic sees the joint observation and
    /// the joint action.
    static MaddpgNets create(const std::vector<std::size_t>& obs_sizes, const MaddpgConfig& config, Rng& rng);
    [[nodiscard]] std::size_t joint_obs_size() const;
};

/// Column-per-sample view of a minibatch.
struct MaddpgBatch {
    std::vector<Eigen::MatrixXd> obs;       // per agent: obs_size x S
    std::vector<Eigen::MatrixXd> next_obs;  // per agent
    Eigen::MatrixXd actions;                // 2N x S
    Eigen::MatrixXd rewards;                // N x S
    Eigen::RowVectorXd done;                // 1 x S

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(done.size()); }
    [[nodiscard]] Eigen::MatrixXd joint_obs() const;
    [[nodiscard]] Eigen::MatrixXd joint_next_obs() const;
};

MaddpgBatch make_batch(const std::vector<const Transition*>& items);

/// Normalized actor output plus i.i.d. N(0, noise_sigma^2) noise, clamped to [-1, 1].
Eigen::VectorXd select_normalized(const Mlp& actor, const Observation& obs, double noise_sigma, Rng& rng);

/// select_normalized scaled to world units.
Action select_action(const Mlp& actor, const Observation& obs, double noise_sigma, double max_speed, Rng& rng);

double critic_target(double r, bool done, double gamma, double q_next);

/// One Adam step on agent's critic. Returns the loss before the step.
double critic_update(std::size_t agent, const MaddpgBatch& batch, MaddpgNets& nets, const MaddpgConfig& config);

/// Mean Q of the batch with agent's action replaced by its current actor, and
/// the flat gradient of that mean with respect to the actor parameters.
struct ActorObjective {
    double mean_q = 0.0;
    Eigen::VectorXd grad;
};
ActorObjective actor_objective(std::size_t agent, const MaddpgBatch& batch, const MaddpgNets& nets);

/// Gradient of action_reg * mean squared pre-tanh actor output.
Eigen::VectorXd action_reg_grad(const Mlp& actor, const Eigen::MatrixXd& obs, double action_reg);

/// One Adam ascent step on agent's actor, with the action penalty. Returns
/// mean Q before the step.
double actor_update(std::size_t agent, const MaddpgBatch& batch, MaddpgNets& nets, const MaddpgConfig& config);

void soft_update_targets(MaddpgNets& nets, double tau);

struct MaddpgResult {
    MaddpgNets nets;
    PolicySet policy;
    std::vector<CurveRow> curve;
    std::size_t transitions_stored = 0;
    std::size_t update_rounds = 0;
};

MaddpgResult train_maddpg(MultiAgentEnv& env, const MaddpgConfig& config, std::uint64_t seed,
                          const TrainHooks& hooks = {});

}  // namespace coalab

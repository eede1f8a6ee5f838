#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "coalab/env.hpp"
#include "coalab/neural.hpp"
#include "coalab/policy.hpp"
#include "coalab/rng.hpp"

namespace coalab {

struct MappoConfig {
    std::size_t n_agents = 1;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_epsilon = 0.2;
    std::size_t epochs_per_batch = 10;
    std::size_t minibatch_count = 1;
    std::size_t batch_episodes = 25;
    double value_loss_coeff = 1.0;
    double entropy_coeff = 0.01;
    bool popart_enabled = true;
    double popart_beta = 0.999;
    double policy_lr = 7e-4;
    double value_lr = 7e-4;
    double max_grad_norm = 10.0;
    std::size_t hidden = 64;
    std::size_t episodes = 5000;
    int steps_per_episode = 70;
    double policy_output_gain = 0.01;
    double log_std_init = 0.0;

    void validate() const;
    friend bool operator==(const MappoConfig&, const MappoConfig&) = default;
};

/// Running first and second moments of value targets with exponential decay
/// and a debiasing weight.
struct PopArtState {
    bool enabled = true;
    double beta = 0.999;
    double variance_floor = 1e-8;
    double mean_acc = 0.0;
    double mean_sq_acc = 0.0;
    double debias = 0.0;

    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;
    [[nodiscard]] double stddev() const;
    [[nodiscard]] double normalize(double x) const;
    [[nodiscard]] double denormalize(double x) const;
};

/// Folds a batch into the statistics and returns it normalized with the
/// updated statistics. Identity when disabled.
std::vector<double> popart_update_and_normalize(PopArtState& state, std::span<const double> targets);

/// Rescales a value head so that its denormalized outputs are unchanged by a
/// statistics change from (old_mean, old_std) to (new_mean, new_std).
void popart_preserve_outputs(DenseLayer& head, double old_mean, double old_std, double new_mean, double new_std);

/// Backward recursion: delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t,
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, V_T = bootstrap_value.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                        const std::vector<bool>& dones, double gamma, double lambda);

/// R_t = r_t + gamma (1 - done_t) R_{t+1}, R_T = bootstrap_value.
std::vector<double> reward_to_go(std::span<const double> rewards, double bootstrap_value, const std::vector<bool>& dones,
                                 double gamma);

/// min(rho A, clamp(rho, 1 - eps, 1 + eps) A) with rho = exp(log_ratio).
double clipped_objective(double log_ratio, double advantage, double epsilon);

/// d clipped_objective / d log_ratio; zero where the clipped branch is active.
double clipped_objective_grad(double log_ratio, double advantage, double epsilon);

/// Diagonal Gaussian log density.
double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, const Eigen::VectorXd& x);
double gaussian_entropy(const Eigen::VectorXd& log_std);

struct MappoModel {
    Mlp policy;  // observation -> action mean
    Eigen::VectorXd log_std;
    Mlp value;   // global state -> normalized value
    PopArtState popart;
    AdamState policy_opt;  // over policy parameters followed by log_std
    AdamState value_opt;

    static MappoModel create(std::size_t obs_size, std::size_t state_size, const MappoConfig& config, Rng& rng);
    [[nodiscard]] double value_of(const Eigen::VectorXd& state) const;
};

/// One entry per (step, agent). state is the concatenation of every agent's
/// observation; reward, value and done are the team's at that step.
struct RolloutBuffer {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> observations;
    std::vector<Eigen::VectorXd> actions;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<bool> dones;
    std::vector<double> advantages;
    std::vector<double> returns;

    [[nodiscard]] std::size_t size() const { return log_probs.size(); }
    [[nodiscard]] bool finalized() const { return advantages.size() == size() && returns.size() == size(); }
    /// Throws std::logic_error unless every column has size() entries.
    void check() const;
};

struct PolicyLoss {
    double loss = 0.0;  // -(mean clipped objective) - entropy_coeff * entropy
    Eigen::VectorXd grad_params;
    Eigen::VectorXd grad_log_std;
    double clip_fraction = 0.0;
};

PolicyLoss policy_loss_and_grad(const Mlp& policy, const Eigen::VectorXd& log_std, const Eigen::MatrixXd& obs,
                                const Eigen::MatrixXd& actions, std::span<const double> old_log_probs,
                                std::span<const double> advantages, double epsilon, double entropy_coeff);

struct ValueLoss {
    double loss = 0.0;  // mean squared error against normalized targets
    Eigen::VectorXd grad;
};

ValueLoss value_loss_and_grad(const Mlp& value, const Eigen::MatrixXd& states, std::span<const double> targets);

struct MappoResult {
    MappoModel model;
    PolicySet policy;
    std::vector<CurveRow> curve;
    std::size_t updates = 0;
};

MappoResult train_mappo(MultiAgentEnv& env, const MappoConfig& config, std::uint64_t seed,
                        const TrainHooks& hooks = {});

}  // namespace coalab

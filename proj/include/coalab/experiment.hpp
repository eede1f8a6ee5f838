#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "coalab/config.hpp"
#include "coalab/env.hpp"
#include "coalab/episode.hpp"
#include "coalab/policy.hpp"

namespace coalab {

enum class Phase { Ugv, Uav };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view name);

/// World of one training phase. The UGV phase drops UAVs and aerial
/// targets; the UAV phase drops ground targets.
WorldConfig phase_world(const ExperimentConfig& config, Phase phase);

std::unique_ptr<MultiAgentEnv> make_phase_env(const ExperimentConfig& config, Phase phase,
                                              std::shared_ptr<const DemoLog> demos);

struct PhaseResult {
    PolicySet policy;
    std::vector<CurveRow> curve;
};

/// Trains one phase with the configured algorithm and seed. The UAV phase
/// needs a non-empty demo log.
PhaseResult train_phase(const ExperimentConfig& config, Phase phase, std::shared_ptr<const DemoLog> demos,
                        const TrainHooks& hooks = {});

/// Greedy rollouts in a training environment, one record per episode.
/// Episode e resets with mix_seed(seed, e).
std::vector<EpisodeRecord> rollout_policy(MultiAgentEnv& env, const PolicySet& policy, std::size_t episodes,
                                          std::uint64_t seed);

}  // namespace coalab

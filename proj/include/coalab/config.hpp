#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "coalab/maddpg.hpp"
#include "coalab/mappo.hpp"
#include "coalab/mission.hpp"
#include "coalab/reward.hpp"
#include "coalab/world.hpp"
#include "coalab/zoning.hpp"

namespace coalab {

inline constexpr std::uint32_t kConfigVersion = 1;

/// Everything needed to re-run an experiment. The world block holds the
/// counts of both training phases: the UGV phase ignores the aerial fields
/// and the UAV phase ignores the ground targets.
struct ExperimentConfig {
    std::string preset = "desk";
    std::uint64_t seed = 1;
    WorldConfig world;
    MeanShiftConfig zoning;
    RewardParams reward;
    Algorithm algorithm = Algorithm::Maddpg;
    MaddpgConfig maddpg;
    MappoConfig mappo;
    std::size_t demo_episodes = 200;
    // MADDPG action_reg used in the UAV phase in place of maddpg.action_reg.
    double uav_action_reg = 1e-3;
    EvaluationSetup evaluation;
    std::size_t evaluation_episodes = 200;
    std::size_t workers = 1;
    std::size_t save_interval = 0;

    void validate() const;
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// "desk" (fast single-core runs), "table2" (full-size simulation setting) and
/// "iadrl" (1 UGV + 1 UAV, no zoning).
ExperimentConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Flat `key = value` text with every field spelled out.
std::string save_config(const ExperimentConfig& config);

/// Starts from the preset named by the `preset` key (desk when absent) and
/// applies every other key. Unknown keys and unparsable values are errors
/// naming the key.
ExperimentConfig load_config(std::string_view text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace coalab

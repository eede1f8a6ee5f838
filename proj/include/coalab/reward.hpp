#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

#include "coalab/world.hpp"

namespace coalab {

struct RewardParams {
    double t1_scale = 1.0;
    double max_pair_penalty = 1.0;
    double max_obstacle_penalty = 1.0;
    double r_t = 1.0;
    DangerZoneParams danger;

    void validate() const;
    friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

/// Component slots r1..r7. UGVs fill r1-r3, UAVs fill r4-r7.
struct RewardBreakdown {
    std::array<double, 7> components{};
    std::array<bool, 7> present{};
    double total = 0.0;

    void set(int component, double value);  // component is 1-based
    [[nodiscard]] double get(int component) const { return components.at(static_cast<std::size_t>(component - 1)); }
};

/// -t1_scale * sum over unreached targets of the distance to the closest agent.
/// `skip` removes one target from the sum.
double target_distance_reward(std::span<const Target> targets, std::span<const Vec2> agents,
                              const RewardParams& params, std::optional<std::size_t> skip = std::nullopt);

/// Danger-zone overlap penalty: 0 outside delta + sigma, linear in the overlap,
/// saturating at -max_penalty from d = delta inward.
double pair_penalty(double d, double delta, double sigma, double max_penalty);

/// -r_t before the UAV's target is reached, -t1_scale * d_h afterwards.
double return_reward(bool reached, double d_h, const RewardParams& params);

RewardBreakdown ugv_reward(const WorldState& state, std::size_t agent, const RewardParams& params);
RewardBreakdown uav_reward(const WorldState& state, std::size_t agent, const RewardParams& params);

}  // namespace coalab

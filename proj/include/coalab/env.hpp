#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "coalab/reward.hpp"
#include "coalab/world.hpp"

namespace coalab {

struct EnvStep {
    std::vector<Observation> observations;
    std::vector<double> rewards;
    std::vector<RewardBreakdown> breakdowns;
    bool terminal = false;   // task finished
    bool truncated = false;  // step budget exhausted before the task finished
    int agent_collisions = 0;     // real agent-agent contacts
    int obstacle_collisions = 0;  // real agent-obstacle contacts
    int real_collisions = 0;      // sum of the two
};

/// Homogeneous multi-agent training environment: every agent is the same
/// vehicle kind and sees the same observation layout.
class MultiAgentEnv {
public:
    virtual ~MultiAgentEnv() = default;

    [[nodiscard]] virtual std::size_t agent_count() const = 0;
    [[nodiscard]] virtual VehicleKind kind() const = 0;
    [[nodiscard]] virtual ObservationLayout layout() const = 0;
    [[nodiscard]] virtual const WorldConfig& config() const = 0;
    [[nodiscard]] virtual const WorldState& state() const = 0;

    virtual std::vector<Observation> reset(std::uint64_t seed) = 0;
    /// One velocity command (arena units) per agent.
    virtual EnvStep step(std::span<const Action> actions) = 0;
};

using EnvFactory = std::function<std::unique_ptr<MultiAgentEnv>()>;

/// Ground phase: UGVs, ground targets and obstacles. Ends when every ground
/// target is reached.
class UgvTrainingEnv final : public MultiAgentEnv {
public:
    UgvTrainingEnv(WorldConfig config, RewardParams reward);

    [[nodiscard]] std::size_t agent_count() const override { return config_.n_ugv; }
    [[nodiscard]] VehicleKind kind() const override { return VehicleKind::Ugv; }
    [[nodiscard]] ObservationLayout layout() const override;
    [[nodiscard]] const WorldConfig& config() const override { return config_; }
    [[nodiscard]] const WorldState& state() const override { return state_; }

    std::vector<Observation> reset(std::uint64_t seed) override;
    EnvStep step(std::span<const Action> actions) override;

private:
    WorldConfig config_;
    RewardParams reward_;
    WorldState state_;
};

/// Recorded UGV trajectories: episodes -> steps -> per-UGV positions.
struct DemoLog {
    std::vector<std::vector<std::vector<Vec2>>> episodes;

    [[nodiscard]] bool empty() const { return episodes.empty(); }
    [[nodiscard]] std::size_t ugv_count() const;
};

/// CSV with header `episode,step,ugv,x,y`.
void save_demo_log(const DemoLog& log, const std::filesystem::path& path);
DemoLog load_demo_log(const std::filesystem::path& path);

/// Air phase: UAVs, aerial targets and obstacles, with UGVs replaying demo
/// trajectories. A UGV that receives a landing signal stops replaying until
/// the UAV touches down. Ends when every aerial target is reached and every
/// UAV has landed.
class UavTrainingEnv final : public MultiAgentEnv {
public:
    UavTrainingEnv(WorldConfig config, RewardParams reward, std::shared_ptr<const DemoLog> demos);

    [[nodiscard]] std::size_t agent_count() const override { return config_.n_uav; }
    [[nodiscard]] VehicleKind kind() const override { return VehicleKind::Uav; }
    [[nodiscard]] ObservationLayout layout() const override;
    [[nodiscard]] const WorldConfig& config() const override { return config_; }
    [[nodiscard]] const WorldState& state() const override { return state_; }

    std::vector<Observation> reset(std::uint64_t seed) override;
    EnvStep step(std::span<const Action> actions) override;

private:
    WorldConfig config_;
    RewardParams reward_;
    std::shared_ptr<const DemoLog> demos_;
    WorldState state_;
    std::size_t episode_ = 0;
    std::vector<std::size_t> cursor_;
};

}  // namespace coalab

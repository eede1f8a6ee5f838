#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "coalab/geometry.hpp"

namespace coalab {

enum class VehicleKind { Ugv, Uav };

std::string_view to_string(VehicleKind kind);

/// Collision geometry shared by the world and the reward shaping. An entity
/// pair is in real contact at distance <= delta and in "fake" contact while
/// their danger zones overlap (delta < d < delta + sigma).
struct DangerZoneParams {
    double sigma_v = 0.2;
    double delta_v = 0.1;
    double sigma_o = 0.2;
    double delta_o = 0.1;

    void validate() const;
    friend bool operator==(const DangerZoneParams&, const DangerZoneParams&) = default;
};

struct WorldConfig {
    double arena_half_extent = 1.0;
    std::size_t n_ugv = 1;
    std::size_t n_uav = 0;
    std::size_t n_obstacle = 1;
    std::size_t n_ground_target = 2;
    std::size_t n_aerial_target = 0;
    // One meter per second over a 2.5 s step at 25 m per arena unit.
    double max_speed = 0.1;
    int max_steps = 70;
    double reach_threshold = 0.15;
    DangerZoneParams danger;
    double meters_per_unit = 25.0;
    // Forced return fires when battery <= margin * (distance to nearest UGV / max_speed).
    double battery_margin = 1.2;
    std::uint64_t rng_seed = 0;

    void validate() const;
    friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

struct AgentState {
    VehicleKind kind = VehicleKind::Ugv;
    Vec2 pos;
    Vec2 vel;
    // UAV only: set once the assigned aerial target is reached. Never cleared.
    bool reached_target = false;
    // UAV only: battery critical, heading home without having reached a target.
    bool returning = false;
    int steps_remaining = 0;
    std::optional<std::size_t> landed_on;
    std::optional<std::size_t> assigned_target;
    // UGV only: index of the UAV this vehicle is holding still for.
    std::optional<std::size_t> holding_for;

    [[nodiscard]] bool airborne() const { return kind == VehicleKind::Uav && !landed_on; }
    [[nodiscard]] bool wants_to_land() const { return reached_target || returning; }
};

struct Target {
    Vec2 pos;
    bool reached = false;
};

struct WorldState {
    std::vector<AgentState> ugvs;
    std::vector<AgentState> uavs;
    std::vector<Vec2> obstacles;
    std::vector<Target> ground_targets;
    std::vector<Target> aerial_targets;
    int step_index = 0;

    [[nodiscard]] const std::vector<AgentState>& agents(VehicleKind kind) const {
        return kind == VehicleKind::Ugv ? ugvs : uavs;
    }
    [[nodiscard]] const std::vector<Target>& targets(VehicleKind kind) const {
        return kind == VehicleKind::Ugv ? ground_targets : aerial_targets;
    }
    [[nodiscard]] bool all_targets_reached() const;
    [[nodiscard]] bool all_uavs_landed() const;
};

/// Velocity command in arena units per step.
struct Action {
    double u = 0.0;
    double v = 0.0;
};

/// One action per vehicle. Actions for landed UAVs are ignored.
struct JointAction {
    std::vector<Action> ugv;
    std::vector<Action> uav;
};

enum class Contact { None, Fake, Real };

enum class PairKind { UgvUgv, UavUav, UgvObstacle, UavObstacle };

struct CollisionEvent {
    PairKind kind;
    std::size_t first;
    std::size_t second;  // peer index, or obstacle index
    double distance;
    Contact contact;
};

struct CollisionReport {
    std::vector<CollisionEvent> events;

    [[nodiscard]] int real_agent_agent() const;
    [[nodiscard]] int real_agent_obstacle() const;
    [[nodiscard]] int fake_total() const;
};

struct StepResult {
    WorldState state;
    CollisionReport collisions;
};

Contact detect_pair(double d, double delta, double sigma);

/// Draws every entity uniformly over the arena, keeping all pairs farther than
/// delta_v apart. Throws std::runtime_error when the arena is too crowded.
WorldState spawn(const WorldConfig& config, std::uint64_t seed);

/// Advances one step. Vehicles move by their clamped velocity command, then
/// landing, target assignment, target reach, battery and landing-signal rules
/// are applied in that order, and finally contacts are detected.
StepResult step(const WorldConfig& config, WorldState state, const JointAction& actions);

/// Target assignment: repeatedly pair the closest (vehicle, target) couple
/// among unassigned active vehicles and unreached targets. Ties resolve to the
/// lowest vehicle index, then the lowest target index.
void assign_targets(WorldState& state);

/// Contacts present in a state, without moving anything.
CollisionReport detect_collisions(const WorldConfig& config, const WorldState& state);

using Observation = Eigen::VectorXd;

/// Slot counts of an observation vector.
struct ObservationLayout {
    std::size_t n_targets = 0;
    std::size_t n_obstacles = 0;
    std::size_t n_peers = 0;
    bool uav_suffix = false;

    [[nodiscard]] std::size_t size() const {
        return 4 + 2 * (n_targets + n_obstacles + n_peers) + (uav_suffix ? 3 : 0);
    }
    friend bool operator==(const ObservationLayout&, const ObservationLayout&) = default;
};

ObservationLayout natural_layout(const WorldState& state, VehicleKind kind);

/// Observation of one vehicle: own velocity, own position, relative positions
/// of same-kind targets (zeroed once reached), obstacles, same-kind peers, and
/// for UAVs the relative position of the nearest UGV plus the return flag.
Observation observe(const WorldState& state, std::size_t agent, VehicleKind kind);

/// Index of the UGV nearest to p, ties to the lowest index.
std::optional<std::size_t> nearest_ugv(const WorldState& state, const Vec2& p);

}  // namespace coalab

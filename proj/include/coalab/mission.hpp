#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coalab/episode.hpp"
#include "coalab/policy.hpp"
#include "coalab/world.hpp"
#include "coalab/zoning.hpp"

namespace coalab {

enum class MissionMode { Zoned, NoZoning };

std::string_view to_string(MissionMode m);
MissionMode mission_mode_from_string(std::string_view name);

enum class CoalitionStatus { Available, EnRoute, Clearing };

struct Coalition {
    std::vector<std::size_t> ugv_ids;
    std::vector<std::size_t> uav_ids;
    CoalitionStatus status = CoalitionStatus::Available;
};

/// "GxA": G UGVs and A UAVs in total.
struct CoalitionSpec {
    std::size_t n_ugv = 1;
    std::size_t n_uav = 1;

    static CoalitionSpec parse(std::string_view text);
    [[nodiscard]] std::string str() const;
    friend bool operator==(const CoalitionSpec&, const CoalitionSpec&) = default;
};

/// One coalition per UGV; UAVs are dealt out round-robin.
std::vector<Coalition> make_coalitions(const CoalitionSpec& spec);

/// True when every UAV of the coalition is in `landed`.
bool coalition_available(const Coalition& c, const std::vector<bool>& landed);

/// Global mission plane, in meters, centered on the depot at the origin.
struct MissionScene {
    double arena_half_extent_m = 1000.0;
    std::vector<Vec2> ground_targets;
    std::vector<Vec2> aerial_targets;
    std::vector<Vec2> obstacles;

    /// Ground targets followed by aerial targets.
    [[nodiscard]] std::vector<Vec2> all_targets() const;
};

struct Zone {
    Vec2 center;
    double radius_m = 0.0;
    std::vector<std::size_t> ground;  // indices into MissionScene::ground_targets
    std::vector<std::size_t> aerial;  // indices into MissionScene::aerial_targets
};

struct MissionPlan {
    std::vector<Zone> zones;  // execution order
    std::size_t k_per_zone = 1;
    MissionMode mode = MissionMode::Zoned;
};

/// Zoned mode zones the pooled targets with assign_zones; NoZoning mode is one
/// zone centered on the origin spanning the whole arena. No targets, no zones.
MissionPlan plan(const MissionScene& scene, const MeanShiftConfig& cfg, std::size_t k, MissionMode mode);

/// Physical parameters shared by every zone of a mission.
struct MissionParams {
    double speed_m = 2.5;  // meters per step
    double reach_m = 3.75;
    DangerZoneParams danger_m{5.0, 2.5, 5.0, 2.5};
    int battery_steps = 70;
    double battery_margin = 1.2;
    int zone_step_limit = 500;
    // Start ring radius of a coalition group inside a zone, in zone units.
    double start_ring = 0.3;

    /// Scales a training world's arena-unit quantities by meters_per_unit.
    static MissionParams from_world(const WorldConfig& world);
    void validate() const;
    friend bool operator==(const MissionParams&, const MissionParams&) = default;
};

struct TrainedModels {
    PolicySet ugv;
    std::optional<PolicySet> uav;
};

/// Builds an observation in `layout` for a vehicle of a zone world. Target
/// slots list the assigned target first, then the other unreached targets
/// nearest first, then zeros. Obstacle and peer slots are nearest first and
/// padded with the arena corner farthest from the vehicle. Velocity is scaled
/// by velocity_scale.
Observation adapt_observation(const WorldState& state, std::size_t agent, VehicleKind kind,
                              const ObservationLayout& layout, double velocity_scale);

/// Result of clearing one zone with one coalition group.
struct ZoneRun {
    EpisodeRecord record;             // meters; scene attached
    std::vector<Vec2> ugv_final;      // meters, per group UGV
    std::vector<bool> uav_landed;     // per group UAV
    std::vector<bool> ground_reached; // per zone ground target
    std::vector<bool> aerial_reached; // per zone aerial target
};

/// Runs the frozen policies inside one zone. ugv_start and uav count come
/// from the coalition group; every UAV starts landed on a UGV of the group.
ZoneRun run_zone(const Zone& zone, const MissionScene& scene, const std::vector<Vec2>& ugv_start_m,
                 std::size_t n_uav, const TrainedModels& models, const MissionParams& params);

struct MissionOutcome {
    EpisodeRecord aggregate;            // phi is the makespan including transit
    std::vector<EpisodeRecord> zones;   // plan order
    std::vector<std::size_t> zone_group;
    int transit_steps = 0;
};

/// Coalitions are split into groups of k_per_zone (extras idle). Zones are
/// taken in plan order by the group that frees up first; groups drive
/// straight to the zone at full speed with UAVs riding. UAVs that fail to
/// land are lost for later zones.
MissionOutcome run_mission(const MissionPlan& plan, const MissionScene& scene, const std::vector<Coalition>& coalitions,
                           const TrainedModels& models, const MissionParams& params);

/// Random mission instances.
struct ScenarioSpec {
    double arena_half_extent_m = 1000.0;
    std::size_t n_targets = 8;   // split evenly, extra one goes to the ground
    std::size_t n_clusters = 2;  // 0 scatters targets over the whole arena
    double cluster_radius_m = 15.0;
    // Obstacle count drawn uniformly from [min, max].
    std::size_t obstacles_min = 1;
    std::size_t obstacles_max = 6;
    // Obstacles land within this distance of a cluster center.
    double obstacle_spread_m = 25.0;
    // Minimum obstacle-target distance.
    double obstacle_clearance_m = 7.5;

    void validate() const;
    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

MissionScene generate_scene(const ScenarioSpec& spec, std::uint64_t seed);

struct EvaluationSetup {
    ScenarioSpec scenario;
    MeanShiftConfig zoning;
    CoalitionSpec coalition;
    std::size_t k_per_zone = 1;
    MissionMode mode = MissionMode::Zoned;
    MissionParams params;

    friend bool operator==(const EvaluationSetup&, const EvaluationSetup&) = default;
};

/// Episode e uses scene seed mix_seed(seed, e). Workers split episodes; the
/// result is in episode order and independent of the worker count.
std::vector<MissionOutcome> evaluate_missions(const EvaluationSetup& setup, const TrainedModels& models,
                                              std::size_t episodes, std::uint64_t seed, std::size_t workers = 1);

}  // namespace coalab

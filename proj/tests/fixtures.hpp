#pragma once

// Four hand-scripted episodes with hand-computed metrics and planted
// constraint violations. Arena units: reach 0.15, delta 0.1.

#include <vector>

#include "coalab/episode.hpp"

namespace fixture {

using coalab::EpisodeRecord;
using coalab::EpisodeScene;
using coalab::PathPoint;
using coalab::VehiclePath;

inline VehiclePath ground(std::initializer_list<coalab::Vec2> pts) {
    VehiclePath p;
    for (const auto& v : pts) {
        p.push_back({v, true});
    }
    return p;
}

inline EpisodeScene scene() {
    EpisodeScene s;
    s.ground_targets = {{1.0, 0.0}};
    s.aerial_targets = {{0.0, 1.0}};
    s.obstacles = {{-1.0, -1.0}};
    s.reach_threshold = 0.15;
    s.delta_v = 0.1;
    s.delta_o = 0.1;
    return s;
}

inline VehiclePath ugv_to_target() { return ground({{0, 0}, {0.25, 0}, {0.5, 0}, {0.75, 0}, {1, 0}}); }

inline VehiclePath uav_round_trip() {
    return {{{0, 0}, false}, {{0, 0.5}, true}, {{0, 1}, true}, {{0.5, 0.5}, true}, {{1, 0}, false}};
}

/// Clean, completed in 4 steps.
inline EpisodeRecord clean() {
    EpisodeRecord r;
    r.phi = 4;
    r.completed = true;
    r.targets_total = 2;
    r.targets_reached = 2;
    r.ugv_paths = {ugv_to_target()};
    r.uav_paths = {uav_round_trip()};
    r.scene = scene();
    return r;
}

/// The UGV drives through an obstacle at step 2.
inline EpisodeRecord obstacle_hit() {
    EpisodeRecord r = clean();
    r.beta = 1;
    r.scene->obstacles.push_back({0.5, 0.0});
    return r;
}

/// The UAV never reaches its target and never comes back.
inline EpisodeRecord lost_uav() {
    EpisodeRecord r = clean();
    r.completed = false;
    r.targets_reached = 1;
    r.uav_paths = {{{{0, 0}, false}, {{0, 0.5}, true}, {{0, 0.6}, true}, {{0, 0.7}, true}, {{0, 0.8}, true}}};
    return r;
}

/// A second UGV sits on the first one's position at step 1; 6 steps.
inline EpisodeRecord ugv_crash() {
    EpisodeRecord r;
    r.phi = 6;
    r.alpha = 1;
    r.completed = true;
    r.targets_total = 2;
    r.targets_reached = 2;
    r.ugv_paths = {ground({{0, 0}, {0.25, 0}, {0.5, 0}, {0.75, 0}, {1, 0}, {1, 0}, {1, 0}}),
                   ground({{0, -0.5}, {0.25, 0}, {0.25, -0.5}, {0.25, -0.5}, {0.25, -0.5}, {0.25, -0.5},
                           {0.25, -0.5}})};
    r.uav_paths = {{{{0, 0}, false},
                    {{0, 0.5}, true},
                    {{0, 1}, true},
                    {{0.5, 0.5}, true},
                    {{0.75, 0.5}, true},
                    {{1, 0.25}, true},
                    {{1, 0}, false}}};
    r.scene = scene();
    return r;
}

inline std::vector<EpisodeRecord> all() { return {clean(), obstacle_hit(), lost_uav(), ugv_crash()}; }

// Hand-computed values over all().
inline constexpr double kCompletion = 0.75;          // 3 of 4
inline constexpr double kCollisionsPer1k = 500.0;    // 1000 * 2 / 4
inline constexpr double kMeanSteps = 4.5;            // (4 + 4 + 4 + 6) / 4
inline constexpr double kMeanStepsCompleted = 14.0 / 3.0;
inline constexpr double kAccuracy = 87.5;            // 7 of 8
inline constexpr double kCompletionTime = 4.5;

/// Violated constraint indices, per episode of all().
inline std::vector<std::vector<int>> planted() { return {{}, {5}, {2, 8}, {7}}; }

}  // namespace fixture

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "coalab/geometry.hpp"

namespace coalab {

struct PathPoint {
    Vec2 pos;
    bool airborne = true;  // false while a UAV rides a UGV; always true for UGVs
};

using VehiclePath = std::vector<PathPoint>;

/// Static geometry an episode was played in, kept with the record so the
/// constraint checker can run on the log alone.
struct EpisodeScene {
    std::vector<Vec2> obstacles;
    std::vector<Vec2> ground_targets;
    std::vector<Vec2> aerial_targets;
    double reach_threshold = 0.15;
    double delta_v = 0.1;
    double delta_o = 0.1;
};

/// Outcome of one evaluated episode (one zone run, or one whole mission).
struct EpisodeRecord {
    int phi = 0;    // steps taken
    int alpha = 0;  // agent-agent real collisions
    int beta = 0;   // agent-obstacle real collisions
    bool completed = false;
    int targets_total = 0;
    int targets_reached = 0;
    std::vector<VehiclePath> uav_paths;
    std::vector<VehiclePath> ugv_paths;
    std::optional<EpisodeScene> scene;

    /// Throws std::logic_error when counters contradict each other.
    void validate() const;
};

/// Per-constraint verdict. Indices follow the problem formulation: 2 aerial
/// coverage, 3 ground coverage, 4 UAV obstacle clearance, 5 UGV obstacle
/// clearance, 6 UAV separation, 7 UGV separation, 8 UAV return.
struct ConstraintVerdict {
    int index = 0;
    bool satisfied = true;
    std::optional<int> first_violation_step;
    std::string detail;
};

struct ConstraintReport {
    std::vector<ConstraintVerdict> verdicts;

    [[nodiscard]] bool all_satisfied() const;
    [[nodiscard]] const ConstraintVerdict& at(int index) const;
    [[nodiscard]] std::vector<int> violated() const;
};

/// Checks the coverage, clearance, separation and return constraints against
/// a logged episode. Requires record.scene.
ConstraintReport check_constraints(const EpisodeRecord& record);

}  // namespace coalab

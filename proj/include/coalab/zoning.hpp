#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coalab/geometry.hpp"

namespace coalab {

struct MeanShiftConfig {
    double radius = 25.0;           // sliding-window radius R
    double shift_tolerance = 1e-6;  // stop once the mean point displacement is at most this
    int max_iterations = 100;
    double merge_tolerance = 25.0 * 1e-4;  // converged points closer than this are one center

    void validate() const;
    /// Same config with merge_tolerance reset to 1e-4 * radius.
    [[nodiscard]] MeanShiftConfig with_radius(double r) const;
    friend bool operator==(const MeanShiftConfig&, const MeanShiftConfig&) = default;
};

struct ZoneSet {
    std::vector<Vec2> centers;                     // discovery order, densest first
    std::vector<std::vector<std::size_t>> members;  // target indices per center

    [[nodiscard]] std::size_t size() const { return centers.size(); }
    [[nodiscard]] bool empty() const { return centers.empty(); }
};

/// Flat-kernel blurring mean shift: every point moves to the mean of the
/// current points within radius of it, all points at once, until the mean
/// displacement falls to shift_tolerance or max_iterations passes have run.
/// Returns the distinct converged positions, largest basin first (ties by
/// first occurrence). Throws std::invalid_argument on empty input.
std::vector<Vec2> mean_shift(std::span<const Vec2> points, const MeanShiftConfig& cfg);

/// Densest-first zoning: run mean_shift on the unassigned points, keep its
/// centers, drop every point within radius of any kept center, repeat until
/// nothing is left. Each target belongs to the first center covering it.
ZoneSet assign_zones(std::span<const Vec2> targets, const MeanShiftConfig& cfg);

/// Number of radius-R disks a greedy max-coverage pass needs to cover the
/// points. Reported next to zone counts as a reference statistic.
std::size_t zone_count_lower_bound(std::span<const Vec2> targets, double radius);

/// True when every target lies within radius of its assigned center.
bool zones_cover(const ZoneSet& zones, std::span<const Vec2> targets, double radius);

}  // namespace coalab

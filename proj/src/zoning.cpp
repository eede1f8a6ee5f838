#include "coalab/zoning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace coalab {

void MeanShiftConfig::validate() const {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("mean shift radius must be positive");
    }
    if (!(shift_tolerance >= 0.0)) {
        throw std::invalid_argument("shift_tolerance must be non-negative");
    }
    if (max_iterations < 1) {
        throw std::invalid_argument("max_iterations must be at least 1");
    }
    if (!(merge_tolerance >= 0.0)) {
        throw std::invalid_argument("merge_tolerance must be non-negative");
    }
}

MeanShiftConfig MeanShiftConfig::with_radius(double r) const {
    MeanShiftConfig out = *this;
    out.radius = r;
    out.merge_tolerance = 1e-4 * r;
    return out;
}

std::vector<Vec2> mean_shift(std::span<const Vec2> points, const MeanShiftConfig& cfg) {
    cfg.validate();
    if (points.empty()) {
        throw std::invalid_argument("mean_shift: no points");
    }
    const std::size_t n = points.size();
    std::vector<Vec2> current(points.begin(), points.end());
    std::vector<Vec2> next(n);

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Vec2 sum;
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (distance(current[i], current[j]) <= cfg.radius) {
                    sum += current[j];
                    ++count;
                }
            }
            next[i] = sum * (1.0 / static_cast<double>(count));
            shift += distance(next[i], current[i]);
        }
        if (shift / static_cast<double>(n) <= cfg.shift_tolerance) {
            break;
        }
        current.swap(next);
    }

    std::vector<Vec2> centers;
    std::vector<std::size_t> basin;
    for (const Vec2& p : current) {
        auto it = std::find_if(centers.begin(), centers.end(),
                               [&](const Vec2& c) { return distance(c, p) <= cfg.merge_tolerance; });
        if (it == centers.end()) {
            centers.push_back(p);
            basin.push_back(1);
        } else {
            ++basin[static_cast<std::size_t>(it - centers.begin())];
        }
    }

    std::vector<std::size_t> order(centers.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return basin[a] > basin[b]; });
    std::vector<Vec2> sorted;
    sorted.reserve(order.size());
    for (std::size_t k : order) {
        sorted.push_back(centers[k]);
    }
    return sorted;
}

ZoneSet assign_zones(std::span<const Vec2> targets, const MeanShiftConfig& cfg) {
    cfg.validate();
    ZoneSet zones;
    std::vector<std::size_t> remaining(targets.size());
    std::iota(remaining.begin(), remaining.end(), 0);

    while (!remaining.empty()) {
        std::vector<Vec2> pts;
        pts.reserve(remaining.size());
        for (std::size_t idx : remaining) {
            pts.push_back(targets[idx]);
        }
        std::vector<Vec2> found = mean_shift(pts, cfg);

        const std::size_t first_new = zones.centers.size();
        for (const Vec2& c : found) {
            const bool duplicate = std::any_of(zones.centers.begin(), zones.centers.end(), [&](const Vec2& old) {
                return distance(old, c) <= cfg.merge_tolerance;
            });
            if (!duplicate) {
                zones.centers.push_back(c);
                zones.members.emplace_back();
            }
        }

        std::vector<std::size_t> left;
        for (std::size_t idx : remaining) {
            bool claimed = false;
            for (std::size_t z = 0; z < zones.centers.size(); ++z) {
                if (distance(zones.centers[z], targets[idx]) <= cfg.radius) {
                    zones.members[z].push_back(idx);
                    claimed = true;
                    break;
                }
            }
            if (!claimed) {
                left.push_back(idx);
            }
        }

        if (left.size() == remaining.size()) {
            // No new center covered anything: seed a zone on the first point.
            zones.centers.push_back(targets[remaining.front()]);
            zones.members.push_back({remaining.front()});
            left.erase(left.begin());
        }

        // Centers that claimed nothing are not zones.
        for (std::size_t z = zones.centers.size(); z-- > first_new;) {
            if (zones.members[z].empty()) {
                zones.centers.erase(zones.centers.begin() + static_cast<std::ptrdiff_t>(z));
                zones.members.erase(zones.members.begin() + static_cast<std::ptrdiff_t>(z));
            }
        }
        remaining.swap(left);
    }
    return zones;
}

std::size_t zone_count_lower_bound(std::span<const Vec2> targets, double radius) {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("zone_count_lower_bound: radius must be positive");
    }
    std::vector<bool> covered(targets.size(), false);
    std::size_t left = targets.size();
    std::size_t disks = 0;
    while (left > 0) {
        std::size_t best = 0;
        std::size_t best_gain = 0;
        for (std::size_t c = 0; c < targets.size(); ++c) {
            std::size_t gain = 0;
            for (std::size_t p = 0; p < targets.size(); ++p) {
                if (!covered[p] && distance(targets[c], targets[p]) <= radius) {
                    ++gain;
                }
            }
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
            }
        }
        for (std::size_t p = 0; p < targets.size(); ++p) {
            if (!covered[p] && distance(targets[best], targets[p]) <= radius) {
                covered[p] = true;
                --left;
            }
        }
        ++disks;
    }
    return disks;
}

bool zones_cover(const ZoneSet& zones, std::span<const Vec2> targets, double radius) {
    std::vector<int> seen(targets.size(), 0);
    for (std::size_t z = 0; z < zones.size(); ++z) {
        for (std::size_t idx : zones.members[z]) {
            if (idx >= targets.size() || distance(zones.centers[z], targets[idx]) > radius) {
                return false;
            }
            ++seen[idx];
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace coalab

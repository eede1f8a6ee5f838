#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "coalab/episode.hpp"

namespace coalab {

void EpisodeRecord::validate() const {
    if (targets_reached < 0 || targets_reached > targets_total) {
        throw std::logic_error("episode record: reached " + std::to_string(targets_reached) + " of " +
                               std::to_string(targets_total) + " targets");
    }
    if (completed && targets_reached != targets_total) {
        throw std::logic_error("episode record: completed with unreached targets");
    }
    if (phi < 0 || alpha < 0 || beta < 0) {
        throw std::logic_error("episode record: negative counter");
    }
}

bool ConstraintReport::all_satisfied() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const ConstraintVerdict& v) { return v.satisfied; });
}

const ConstraintVerdict& ConstraintReport::at(int index) const {
    for (const auto& v : verdicts) {
        if (v.index == index) {
            return v;
        }
    }
    throw std::out_of_range("no verdict for constraint " + std::to_string(index));
}

std::vector<int> ConstraintReport::violated() const {
    std::vector<int> out;
    for (const auto& v : verdicts) {
        if (!v.satisfied) {
            out.push_back(v.index);
        }
    }
    return out;
}

namespace {

void violate(ConstraintVerdict& v, int step, std::string detail) {
    if (v.satisfied || step < *v.first_violation_step) {
        v.satisfied = false;
        v.first_violation_step = step;
        v.detail = std::move(detail);
    }
}

ConstraintVerdict coverage(int index, const std::vector<Vec2>& targets, const std::vector<VehiclePath>& paths,
                           double reach) {
    ConstraintVerdict v{index, true, std::nullopt, {}};
    for (std::size_t t = 0; t < targets.size(); ++t) {
        int hit_step = -1;
        for (const auto& path : paths) {
            for (std::size_t s = 0; s < path.size(); ++s) {
                if (distance(path[s].pos, targets[t]) <= reach) {
                    if (hit_step < 0 || static_cast<int>(s) < hit_step) {
                        hit_step = static_cast<int>(s);
                    }
                    break;
                }
            }
        }
        if (hit_step < 0) {
            // A target never visited is violated at the end of the episode.
            std::size_t last = 0;
            for (const auto& path : paths) {
                last = std::max(last, path.empty() ? 0 : path.size() - 1);
            }
            violate(v, static_cast<int>(last), "target " + std::to_string(t) + " never visited");
        }
    }
    return v;
}

ConstraintVerdict clearance(int index, const std::vector<Vec2>& obstacles, const std::vector<VehiclePath>& paths,
                            double delta) {
    ConstraintVerdict v{index, true, std::nullopt, {}};
    for (std::size_t a = 0; a < paths.size(); ++a) {
        for (std::size_t s = 0; s < paths[a].size(); ++s) {
            if (!paths[a][s].airborne) {
                continue;
            }
            for (std::size_t k = 0; k < obstacles.size(); ++k) {
                if (distance(paths[a][s].pos, obstacles[k]) <= delta) {
                    violate(v, static_cast<int>(s),
                            "vehicle " + std::to_string(a) + " touches obstacle " + std::to_string(k));
                }
            }
        }
    }
    return v;
}

ConstraintVerdict separation(int index, const std::vector<VehiclePath>& paths, double delta) {
    ConstraintVerdict v{index, true, std::nullopt, {}};
    for (std::size_t a = 0; a < paths.size(); ++a) {
        for (std::size_t b = a + 1; b < paths.size(); ++b) {
            const std::size_t n = std::min(paths[a].size(), paths[b].size());
            for (std::size_t s = 0; s < n; ++s) {
                if (!paths[a][s].airborne || !paths[b][s].airborne) {
                    continue;
                }
                if (distance(paths[a][s].pos, paths[b][s].pos) <= delta) {
                    violate(v, static_cast<int>(s),
                            "vehicles " + std::to_string(a) + " and " + std::to_string(b) + " collide");
                    break;
                }
            }
        }
    }
    return v;
}

}  // namespace

ConstraintReport check_constraints(const EpisodeRecord& record) {
    if (!record.scene) {
        throw std::invalid_argument("check_constraints: episode record carries no scene");
    }
    const EpisodeScene& scene = *record.scene;
    ConstraintReport report;
    report.verdicts.push_back(coverage(2, scene.aerial_targets, record.uav_paths, scene.reach_threshold));
    report.verdicts.push_back(coverage(3, scene.ground_targets, record.ugv_paths, scene.reach_threshold));
    report.verdicts.push_back(clearance(4, scene.obstacles, record.uav_paths, scene.delta_o));
    report.verdicts.push_back(clearance(5, scene.obstacles, record.ugv_paths, scene.delta_o));
    report.verdicts.push_back(separation(6, record.uav_paths, scene.delta_v));
    report.verdicts.push_back(separation(7, record.ugv_paths, scene.delta_v));

    ConstraintVerdict ret{8, true, std::nullopt, {}};
    for (std::size_t a = 0; a < record.uav_paths.size(); ++a) {
        const auto& path = record.uav_paths[a];
        if (path.empty()) {
            continue;
        }
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& ugv : record.ugv_paths) {
            if (!ugv.empty()) {
                nearest = std::min(nearest, distance(ugv.back().pos, path.back().pos));
            }
        }
        if (!(nearest <= scene.reach_threshold)) {
            violate(ret, static_cast<int>(path.size() - 1), "UAV " + std::to_string(a) + " ends away from any UGV");
        }
    }
    report.verdicts.push_back(ret);
    return report;
}

}  // namespace coalab

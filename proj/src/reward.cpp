#include "coalab/reward.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coalab {

void RewardParams::validate() const {
    if (!(t1_scale > 0.0 && max_pair_penalty > 0.0 && max_obstacle_penalty > 0.0 && r_t > 0.0)) {
        throw std::invalid_argument("reward scales and r_t must be positive");
    }
    danger.validate();
}

void RewardBreakdown::set(int component, double value) {
    const auto k = static_cast<std::size_t>(component - 1);
    if (present.at(k)) {
        total -= components[k];
    }
    components[k] = value;
    present[k] = true;
    total += value;
}

double target_distance_reward(std::span<const Target> targets, std::span<const Vec2> agents,
                              const RewardParams& params, std::optional<std::size_t> skip) {
    if (agents.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t].reached || (skip && *skip == t)) {
            continue;
        }
        double nearest = std::numeric_limits<double>::infinity();
        for (const Vec2& a : agents) {
            nearest = std::min(nearest, distance(a, targets[t].pos));
        }
        sum += nearest;
    }
    return -params.t1_scale * sum;
}

double pair_penalty(double d, double delta, double sigma, double max_penalty) {
    const double overlap = delta + sigma - d;
    if (overlap <= 0.0) {
        return 0.0;
    }
    return -max_penalty * std::min(overlap / sigma, 1.0);
}

double return_reward(bool reached, double d_h, const RewardParams& params) {
    return reached ? -params.t1_scale * d_h : -params.r_t;
}

namespace {

std::vector<Vec2> positions(const std::vector<AgentState>& agents) {
    std::vector<Vec2> out;
    out.reserve(agents.size());
    for (const auto& a : agents) {
        out.push_back(a.pos);
    }
    return out;
}

}  // namespace

RewardBreakdown ugv_reward(const WorldState& state, std::size_t agent, const RewardParams& params) {
    const AgentState& self = state.ugvs.at(agent);
    const auto& dz = params.danger;
    RewardBreakdown out;

    const auto pos = positions(state.ugvs);
    out.set(1, target_distance_reward(state.ground_targets, pos, params));

    double r2 = 0.0;
    for (std::size_t j = 0; j < state.ugvs.size(); ++j) {
        if (j != agent) {
            r2 += pair_penalty(distance(self.pos, state.ugvs[j].pos), dz.delta_v, dz.sigma_v, params.max_pair_penalty);
        }
    }
    out.set(2, r2);

    double r3 = 0.0;
    for (const Vec2& o : state.obstacles) {
        r3 += pair_penalty(distance(self.pos, o), dz.delta_o, dz.sigma_o, params.max_obstacle_penalty);
    }
    out.set(3, r3);
    return out;
}

RewardBreakdown uav_reward(const WorldState& state, std::size_t agent, const RewardParams& params) {
    const AgentState& self = state.uavs.at(agent);
    const auto& dz = params.danger;
    RewardBreakdown out;

    const auto pos = positions(state.uavs);
    const std::optional<std::size_t> own =
        self.reached_target ? self.assigned_target : std::optional<std::size_t>{};
    out.set(4, target_distance_reward(state.aerial_targets, pos, params, own));

    double r5 = 0.0;
    double r6 = 0.0;
    if (self.airborne()) {
        for (std::size_t j = 0; j < state.uavs.size(); ++j) {
            if (j != agent && state.uavs[j].airborne()) {
                r5 += pair_penalty(distance(self.pos, state.uavs[j].pos), dz.delta_v, dz.sigma_v,
                                   params.max_pair_penalty);
            }
        }
        for (const Vec2& o : state.obstacles) {
            r6 += pair_penalty(distance(self.pos, o), dz.delta_o, dz.sigma_o, params.max_obstacle_penalty);
        }
    }
    out.set(5, r5);
    out.set(6, r6);

    double d_h = 0.0;
    if (self.airborne()) {
        if (const auto g = nearest_ugv(state, self.pos)) {
            d_h = distance(state.ugvs[*g].pos, self.pos);
        }
    }
    out.set(7, return_reward(self.wants_to_land(), d_h, params));
    return out;
}

}  // namespace coalab

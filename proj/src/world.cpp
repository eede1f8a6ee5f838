#include "coalab/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "coalab/rng.hpp"

namespace coalab {

std::string_view to_string(VehicleKind kind) {
    return kind == VehicleKind::Ugv ? "ugv" : "uav";
}

void DangerZoneParams::validate() const {
    if (!(sigma_v > 0.0 && delta_v > 0.0 && sigma_o > 0.0 && delta_o > 0.0)) {
        throw std::invalid_argument("danger zone widths and contact distances must be positive");
    }
}

void WorldConfig::validate() const {
    if (!(arena_half_extent > 0.0)) {
        throw std::invalid_argument("arena_half_extent must be positive");
    }
    if (!(max_speed > 0.0)) {
        throw std::invalid_argument("max_speed must be positive");
    }
    if (!(reach_threshold > 0.0)) {
        throw std::invalid_argument("reach_threshold must be positive");
    }
    if (max_steps < 1) {
        throw std::invalid_argument("max_steps must be at least 1");
    }
    if (!(meters_per_unit > 0.0)) {
        throw std::invalid_argument("meters_per_unit must be positive");
    }
    if (!(battery_margin >= 0.0)) {
        throw std::invalid_argument("battery_margin must be non-negative");
    }
    danger.validate();
}

bool WorldState::all_targets_reached() const {
    auto reached = [](const Target& t) { return t.reached; };
    return std::all_of(ground_targets.begin(), ground_targets.end(), reached) &&
           std::all_of(aerial_targets.begin(), aerial_targets.end(), reached);
}

bool WorldState::all_uavs_landed() const {
    return std::none_of(uavs.begin(), uavs.end(), [](const AgentState& a) { return a.airborne(); });
}

int CollisionReport::real_agent_agent() const {
    return static_cast<int>(std::count_if(events.begin(), events.end(), [](const CollisionEvent& e) {
        return e.contact == Contact::Real && (e.kind == PairKind::UgvUgv || e.kind == PairKind::UavUav);
    }));
}

int CollisionReport::real_agent_obstacle() const {
    return static_cast<int>(std::count_if(events.begin(), events.end(), [](const CollisionEvent& e) {
        return e.contact == Contact::Real &&
               (e.kind == PairKind::UgvObstacle || e.kind == PairKind::UavObstacle);
    }));
}

int CollisionReport::fake_total() const {
    return static_cast<int>(std::count_if(events.begin(), events.end(),
                                          [](const CollisionEvent& e) { return e.contact == Contact::Fake; }));
}

Contact detect_pair(double d, double delta, double sigma) {
    if (d <= delta) {
        return Contact::Real;
    }
    if (d < delta + sigma) {
        return Contact::Fake;
    }
    return Contact::None;
}

WorldState spawn(const WorldConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng = make_rng(seed);
    const double h = config.arena_half_extent;
    std::uniform_real_distribution<double> coord(-h, h);

    std::vector<Vec2> placed;
    auto draw = [&]() {
        constexpr int kMaxAttempts = 10000;
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            const Vec2 p{coord(rng), coord(rng)};
            const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Vec2& q) {
                return distance(p, q) > config.danger.delta_v;
            });
            if (clear) {
                placed.push_back(p);
                return p;
            }
        }
        throw std::runtime_error("spawn: could not place entity " + std::to_string(placed.size()) +
                                 " after 10000 attempts, arena overcrowded");
    };

    WorldState state;
    for (std::size_t i = 0; i < config.n_ugv; ++i) {
        AgentState a;
        a.kind = VehicleKind::Ugv;
        a.pos = draw();
        a.steps_remaining = config.max_steps;
        state.ugvs.push_back(a);
    }
    for (std::size_t i = 0; i < config.n_uav; ++i) {
        AgentState a;
        a.kind = VehicleKind::Uav;
        a.pos = draw();
        a.steps_remaining = config.max_steps;
        state.uavs.push_back(a);
    }
    for (std::size_t i = 0; i < config.n_obstacle; ++i) {
        state.obstacles.push_back(draw());
    }
    for (std::size_t i = 0; i < config.n_ground_target; ++i) {
        state.ground_targets.push_back({draw(), false});
    }
    for (std::size_t i = 0; i < config.n_aerial_target; ++i) {
        state.aerial_targets.push_back({draw(), false});
    }
    assign_targets(state);
    return state;
}

namespace {

bool uav_seeks_target(const AgentState& a) {
    return a.airborne() && !a.reached_target && !a.returning && a.steps_remaining > 0;
}

// Closest-pair greedy matching between active vehicles and unreached targets.
void match(std::vector<AgentState>& vehicles, const std::vector<Target>& targets,
           const std::vector<bool>& active) {
    std::vector<bool> vehicle_free(vehicles.size());
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        vehicle_free[i] = active[i];
        if (active[i]) {
            vehicles[i].assigned_target.reset();
        }
    }
    std::vector<bool> target_free(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) {
        target_free[j] = !targets[j].reached;
    }
    while (true) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        bool found = false;
        for (std::size_t i = 0; i < vehicles.size(); ++i) {
            if (!vehicle_free[i]) {
                continue;
            }
            for (std::size_t j = 0; j < targets.size(); ++j) {
                if (!target_free[j]) {
                    continue;
                }
                const double d = distance(vehicles[i].pos, targets[j].pos);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        if (!found) {
            return;
        }
        vehicles[bi].assigned_target = bj;
        vehicle_free[bi] = false;
        target_free[bj] = false;
    }
}

Vec2 clip_to_arena(const Vec2& p, double h) {
    return {std::clamp(p.x, -h, h), std::clamp(p.y, -h, h)};
}

}  // namespace

void assign_targets(WorldState& state) {
    std::vector<bool> ugv_active(state.ugvs.size(), true);
    match(state.ugvs, state.ground_targets, ugv_active);

    std::vector<bool> uav_active(state.uavs.size());
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        uav_active[i] = uav_seeks_target(state.uavs[i]);
        if (state.uavs[i].returning) {
            state.uavs[i].assigned_target.reset();
        }
    }
    match(state.uavs, state.aerial_targets, uav_active);
}

std::optional<std::size_t> nearest_ugv(const WorldState& state, const Vec2& p) {
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < state.ugvs.size(); ++g) {
        const double d = distance(state.ugvs[g].pos, p);
        if (d < best_d) {
            best_d = d;
            best = g;
        }
    }
    return best;
}

CollisionReport detect_collisions(const WorldConfig& config, const WorldState& state) {
    const auto& dz = config.danger;
    CollisionReport report;
    auto record = [&](PairKind kind, std::size_t i, std::size_t j, double d, double delta, double sigma) {
        const Contact c = detect_pair(d, delta, sigma);
        if (c != Contact::None) {
            report.events.push_back({kind, i, j, d, c});
        }
    };
    for (std::size_t i = 0; i < state.ugvs.size(); ++i) {
        for (std::size_t j = i + 1; j < state.ugvs.size(); ++j) {
            record(PairKind::UgvUgv, i, j, distance(state.ugvs[i].pos, state.ugvs[j].pos), dz.delta_v, dz.sigma_v);
        }
    }
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        if (!state.uavs[i].airborne()) {
            continue;
        }
        for (std::size_t j = i + 1; j < state.uavs.size(); ++j) {
            if (!state.uavs[j].airborne()) {
                continue;
            }
            record(PairKind::UavUav, i, j, distance(state.uavs[i].pos, state.uavs[j].pos), dz.delta_v, dz.sigma_v);
        }
    }
    for (std::size_t i = 0; i < state.ugvs.size(); ++i) {
        for (std::size_t k = 0; k < state.obstacles.size(); ++k) {
            record(PairKind::UgvObstacle, i, k, distance(state.ugvs[i].pos, state.obstacles[k]), dz.delta_o,
                   dz.sigma_o);
        }
    }
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        if (!state.uavs[i].airborne()) {
            continue;
        }
        for (std::size_t k = 0; k < state.obstacles.size(); ++k) {
            record(PairKind::UavObstacle, i, k, distance(state.uavs[i].pos, state.obstacles[k]), dz.delta_o,
                   dz.sigma_o);
        }
    }
    return report;
}

StepResult step(const WorldConfig& config, WorldState state, const JointAction& actions) {
    if (actions.ugv.size() != state.ugvs.size() || actions.uav.size() != state.uavs.size()) {
        throw std::invalid_argument("step: expected " + std::to_string(state.ugvs.size()) + " UGV and " +
                                    std::to_string(state.uavs.size()) + " UAV actions, got " +
                                    std::to_string(actions.ugv.size()) + " and " +
                                    std::to_string(actions.uav.size()));
    }
    if (state.step_index >= config.max_steps) {
        throw std::logic_error("step: episode already at max_steps");
    }
    const double h = config.arena_half_extent;

    for (std::size_t g = 0; g < state.ugvs.size(); ++g) {
        auto& ugv = state.ugvs[g];
        const Action& a = actions.ugv[g];
        if (!std::isfinite(a.u) || !std::isfinite(a.v)) {
            throw std::invalid_argument("step: non-finite UGV action");
        }
        ugv.vel = ugv.holding_for ? Vec2{} : clamp_norm({a.u, a.v}, config.max_speed);
        ugv.pos = clip_to_arena(ugv.pos + ugv.vel, h);
    }
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        auto& uav = state.uavs[i];
        if (uav.landed_on) {
            uav.vel = {};
            uav.pos = state.ugvs.at(*uav.landed_on).pos;
            continue;
        }
        if (uav.steps_remaining <= 0) {
            uav.vel = {};
            continue;
        }
        const Action& a = actions.uav[i];
        if (!std::isfinite(a.u) || !std::isfinite(a.v)) {
            throw std::invalid_argument("step: non-finite UAV action");
        }
        uav.vel = clamp_norm({a.u, a.v}, config.max_speed);
        uav.pos = clip_to_arena(uav.pos + uav.vel, h);
        --uav.steps_remaining;
    }
    ++state.step_index;

    // Touchdown.
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        auto& uav = state.uavs[i];
        if (!uav.airborne() || !uav.wants_to_land()) {
            continue;
        }
        const auto g = nearest_ugv(state, uav.pos);
        if (g && distance(state.ugvs[*g].pos, uav.pos) <= config.reach_threshold) {
            uav.landed_on = *g;
            uav.pos = state.ugvs[*g].pos;
            uav.vel = {};
        }
    }

    // Reach: only the vehicle assigned to a target can claim it.
    assign_targets(state);
    for (auto& ugv : state.ugvs) {
        if (ugv.assigned_target) {
            auto& t = state.ground_targets[*ugv.assigned_target];
            if (distance(t.pos, ugv.pos) <= config.reach_threshold) {
                t.reached = true;
            }
        }
    }
    for (auto& uav : state.uavs) {
        if (uav_seeks_target(uav) && uav.assigned_target) {
            auto& t = state.aerial_targets[*uav.assigned_target];
            if (distance(t.pos, uav.pos) <= config.reach_threshold) {
                t.reached = true;
                uav.reached_target = true;
            }
        }
    }
    assign_targets(state);

    // Battery and mission-state driven returns.
    const bool aerial_left = std::any_of(state.aerial_targets.begin(), state.aerial_targets.end(),
                                         [](const Target& t) { return !t.reached; });
    for (auto& uav : state.uavs) {
        if (!uav.airborne() || uav.wants_to_land()) {
            continue;
        }
        if (!aerial_left) {
            uav.returning = true;
        } else if (const auto g = nearest_ugv(state, uav.pos)) {
            const double home = distance(state.ugvs[*g].pos, uav.pos);
            if (uav.steps_remaining <= config.battery_margin * home / config.max_speed) {
                uav.returning = true;
            }
        }
        if (uav.returning) {
            uav.assigned_target.reset();
        }
    }

    // Landing signals: a UGV holds still until the UAV it is waiting for lands.
    for (auto& ugv : state.ugvs) {
        if (ugv.holding_for) {
            const auto& uav = state.uavs.at(*ugv.holding_for);
            if (!uav.airborne() || uav.steps_remaining <= 0) {
                ugv.holding_for.reset();
            }
        }
    }
    for (std::size_t i = 0; i < state.uavs.size(); ++i) {
        const auto& uav = state.uavs[i];
        if (!uav.airborne() || !uav.wants_to_land() || uav.steps_remaining <= 0) {
            continue;
        }
        const bool served = std::any_of(state.ugvs.begin(), state.ugvs.end(),
                                        [&](const AgentState& g) { return g.holding_for == i; });
        if (served) {
            continue;
        }
        std::optional<std::size_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < state.ugvs.size(); ++g) {
            if (state.ugvs[g].holding_for) {
                continue;
            }
            const double d = distance(state.ugvs[g].pos, uav.pos);
            if (d < best_d) {
                best_d = d;
                best = g;
            }
        }
        if (best) {
            state.ugvs[*best].holding_for = i;
        }
    }

    StepResult result;
    result.collisions = detect_collisions(config, state);
    result.state = std::move(state);
    return result;
}

ObservationLayout natural_layout(const WorldState& state, VehicleKind kind) {
    ObservationLayout layout;
    layout.n_targets = state.targets(kind).size();
    layout.n_obstacles = state.obstacles.size();
    layout.n_peers = state.agents(kind).size() - 1;
    layout.uav_suffix = kind == VehicleKind::Uav;
    return layout;
}

Observation observe(const WorldState& state, std::size_t agent, VehicleKind kind) {
    const auto& agents = state.agents(kind);
    if (agent >= agents.size()) {
        throw std::out_of_range("observe: no " + std::string(to_string(kind)) + " with index " +
                                std::to_string(agent));
    }
    const AgentState& self = agents[agent];
    const ObservationLayout layout = natural_layout(state, kind);
    Observation obs = Observation::Zero(static_cast<Eigen::Index>(layout.size()));
    Eigen::Index k = 0;
    auto put = [&](const Vec2& v) {
        obs[k++] = v.x;
        obs[k++] = v.y;
    };
    put(self.vel);
    put(self.pos);
    for (const auto& t : state.targets(kind)) {
        put(t.reached ? Vec2{} : t.pos - self.pos);
    }
    for (const auto& o : state.obstacles) {
        put(o - self.pos);
    }
    for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != agent) {
            put(agents[j].pos - self.pos);
        }
    }
    if (layout.uav_suffix) {
        const auto g = nearest_ugv(state, self.pos);
        put(g ? state.ugvs[*g].pos - self.pos : Vec2{});
        obs[k++] = self.wants_to_land() ? 1.0 : 0.0;
    }
    return obs;
}

}  // namespace coalab

#include "coalab/mission.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "coalab/rng.hpp"

namespace coalab {

std::string_view to_string(MissionMode m) { return m == MissionMode::Zoned ? "zoned" : "no-zoning"; }

MissionMode mission_mode_from_string(std::string_view name) {
    if (name == "zoned") {
        return MissionMode::Zoned;
    }
    if (name == "no-zoning") {
        return MissionMode::NoZoning;
    }
    throw std::invalid_argument("unknown mission mode '" + std::string(name) + "' (expected zoned or no-zoning)");
}

CoalitionSpec CoalitionSpec::parse(std::string_view text) {
    const auto x = text.find('x');
    auto bad = [&] {
        return std::invalid_argument("coalition '" + std::string(text) + "' is not of the form GxA, e.g. 2x6");
    };
    if (x == std::string_view::npos || x == 0 || x + 1 == text.size()) {
        throw bad();
    }
    auto number = [&](std::string_view s) {
        std::size_t v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') {
                throw bad();
            }
            v = v * 10 + static_cast<std::size_t>(c - '0');
        }
        return v;
    };
    CoalitionSpec spec{number(text.substr(0, x)), number(text.substr(x + 1))};
    if (spec.n_ugv == 0) {
        throw std::invalid_argument("coalition needs at least one UGV");
    }
    return spec;
}

std::string CoalitionSpec::str() const { return std::to_string(n_ugv) + "x" + std::to_string(n_uav); }

std::vector<Coalition> make_coalitions(const CoalitionSpec& spec) {
    if (spec.n_ugv == 0) {
        throw std::invalid_argument("coalition needs at least one UGV");
    }
    std::vector<Coalition> out(spec.n_ugv);
    for (std::size_t g = 0; g < spec.n_ugv; ++g) {
        out[g].ugv_ids.push_back(g);
    }
    for (std::size_t a = 0; a < spec.n_uav; ++a) {
        out[a % spec.n_ugv].uav_ids.push_back(a);
    }
    return out;
}

bool coalition_available(const Coalition& c, const std::vector<bool>& landed) {
    return std::all_of(c.uav_ids.begin(), c.uav_ids.end(), [&](std::size_t a) { return landed.at(a); });
}

std::vector<Vec2> MissionScene::all_targets() const {
    std::vector<Vec2> out = ground_targets;
    out.insert(out.end(), aerial_targets.begin(), aerial_targets.end());
    return out;
}

MissionPlan plan(const MissionScene& scene, const MeanShiftConfig& cfg, std::size_t k, MissionMode mode) {
    if (k == 0) {
        throw std::invalid_argument("plan: k_per_zone must be at least 1");
    }
    MissionPlan p;
    p.k_per_zone = k;
    p.mode = mode;
    const auto targets = scene.all_targets();
    if (targets.empty()) {
        return p;
    }
    const std::size_t n_ground = scene.ground_targets.size();
    auto add_member = [&](Zone& z, std::size_t i) {
        if (i < n_ground) {
            z.ground.push_back(i);
        } else {
            z.aerial.push_back(i - n_ground);
        }
    };
    if (mode == MissionMode::NoZoning) {
        Zone z;
        z.radius_m = scene.arena_half_extent_m;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            add_member(z, i);
        }
        p.zones.push_back(std::move(z));
        return p;
    }
    const ZoneSet zs = assign_zones(targets, cfg);
    for (std::size_t c = 0; c < zs.size(); ++c) {
        Zone z;
        z.center = zs.centers[c];
        z.radius_m = cfg.radius;
        for (auto i : zs.members[c]) {
            add_member(z, i);
        }
        p.zones.push_back(std::move(z));
    }
    return p;
}

MissionParams MissionParams::from_world(const WorldConfig& world) {
    world.validate();
    const double m = world.meters_per_unit;
    MissionParams p;
    p.speed_m = world.max_speed * m;
    p.reach_m = world.reach_threshold * m;
    p.danger_m = {world.danger.sigma_v * m, world.danger.delta_v * m, world.danger.sigma_o * m,
                  world.danger.delta_o * m};
    p.battery_steps = world.max_steps;
    p.battery_margin = world.battery_margin;
    return p;
}

void MissionParams::validate() const {
    if (!(speed_m > 0.0) || !(reach_m > 0.0)) {
        throw std::invalid_argument("mission: speed and reach must be positive");
    }
    danger_m.validate();
    if (battery_steps < 1 || zone_step_limit < 1) {
        throw std::invalid_argument("mission: battery_steps and zone_step_limit must be at least 1");
    }
    if (battery_margin < 0.0 || start_ring < 0.0 || start_ring >= 1.0) {
        throw std::invalid_argument("mission: battery_margin must be non-negative and start_ring in [0, 1)");
    }
}

namespace {

Vec2 far_corner(const Vec2& p, double h) { return {p.x <= 0.0 ? h : -h, p.y <= 0.0 ? h : -h}; }

std::vector<std::size_t> nearest_first(const std::vector<Vec2>& points, const Vec2& from) {
    std::vector<std::size_t> idx(points.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return distance(points[a], from) < distance(points[b], from); });
    return idx;
}

}  // namespace

Observation adapt_observation(const WorldState& state, std::size_t agent, VehicleKind kind,
                              const ObservationLayout& layout, double velocity_scale) {
    const auto& agents = state.agents(kind);
    if (agent >= agents.size()) {
        throw std::out_of_range("adapt_observation: no " + std::string(to_string(kind)) + " with index " +
                                std::to_string(agent));
    }
    if (layout.uav_suffix != (kind == VehicleKind::Uav)) {
        throw std::invalid_argument("adapt_observation: " + std::string(to_string(kind)) +
                                    " observation requested with the other vehicle kind's layout");
    }
    const AgentState& self = agents[agent];
    const double h = 1.0;
    Observation obs = Observation::Zero(static_cast<Eigen::Index>(layout.size()));
    Eigen::Index k = 0;
    auto put = [&](const Vec2& v) {
        obs[k++] = v.x;
        obs[k++] = v.y;
    };
    put(self.vel * velocity_scale);
    put(self.pos);

    const auto& targets = state.targets(kind);
    std::vector<std::size_t> order;
    if (self.assigned_target && !targets.at(*self.assigned_target).reached) {
        order.push_back(*self.assigned_target);
    }
    std::vector<Vec2> tpos;
    for (const auto& t : targets) {
        tpos.push_back(t.pos);
    }
    for (auto i : nearest_first(tpos, self.pos)) {
        if (!targets[i].reached && (order.empty() || order.front() != i)) {
            order.push_back(i);
        }
    }
    for (std::size_t s = 0; s < layout.n_targets; ++s) {
        put(s < order.size() ? targets[order[s]].pos - self.pos : Vec2{});
    }

    const auto obstacle_order = nearest_first(state.obstacles, self.pos);
    for (std::size_t s = 0; s < layout.n_obstacles; ++s) {
        put(s < obstacle_order.size() ? state.obstacles[obstacle_order[s]] - self.pos
                                      : far_corner(self.pos, h) - self.pos);
    }

    std::vector<Vec2> peers;
    for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != agent) {
            peers.push_back(agents[j].pos);
        }
    }
    const auto peer_order = nearest_first(peers, self.pos);
    for (std::size_t s = 0; s < layout.n_peers; ++s) {
        put(s < peer_order.size() ? peers[peer_order[s]] - self.pos : far_corner(self.pos, h) - self.pos);
    }
    if (layout.uav_suffix) {
        const auto g = nearest_ugv(state, self.pos);
        put(g ? state.ugvs[*g].pos - self.pos : Vec2{});
        obs[k++] = self.wants_to_land() ? 1.0 : 0.0;
    }
    return obs;
}

namespace {

void check_policy(const PolicySet& p, VehicleKind kind) {
    if (p.kind != kind) {
        throw std::invalid_argument("expected a " + std::string(to_string(kind)) + " policy, got a " +
                                    std::string(to_string(p.kind)) + " policy");
    }
    for (std::size_t i = 0; i < p.actors.size(); ++i) {
        const auto& a = p.actors[i];
        if (a.input_size() != p.layout.size() || a.output_size() != 2) {
            throw std::invalid_argument(std::string(to_string(kind)) + " actor " + std::to_string(i) + " maps " +
                                        std::to_string(a.input_size()) + " -> " + std::to_string(a.output_size()) +
                                        ", observation layout needs " + std::to_string(p.layout.size()) + " -> 2");
        }
    }
    if (!(p.max_speed > 0.0)) {
        throw std::invalid_argument(std::string(to_string(kind)) + " policy has no trained speed");
    }
}

bool all_reached(const std::vector<Target>& ts) {
    return std::all_of(ts.begin(), ts.end(), [](const Target& t) { return t.reached; });
}

}  // namespace

ZoneRun run_zone(const Zone& zone, const MissionScene& scene, const std::vector<Vec2>& ugv_start_m, std::size_t n_uav,
                 const TrainedModels& models, const MissionParams& params) {
    params.validate();
    if (ugv_start_m.empty()) {
        throw std::invalid_argument("run_zone: a zone needs at least one UGV");
    }
    if (!(zone.radius_m > 0.0)) {
        throw std::invalid_argument("run_zone: zone radius must be positive");
    }
    const double scale = zone.radius_m;
    auto to_units = [&](const Vec2& p) { return (p - zone.center) * (1.0 / scale); };
    auto to_m = [&](const Vec2& u) { return zone.center + u * scale; };

    WorldConfig wc;
    wc.arena_half_extent = 1.0;
    wc.n_ugv = ugv_start_m.size();
    wc.n_uav = n_uav;
    wc.max_speed = params.speed_m / scale;
    wc.max_steps = params.zone_step_limit;
    wc.reach_threshold = params.reach_m / scale;
    wc.danger = {params.danger_m.sigma_v / scale, params.danger_m.delta_v / scale, params.danger_m.sigma_o / scale,
                 params.danger_m.delta_o / scale};
    wc.meters_per_unit = scale;
    wc.battery_margin = params.battery_margin;

    WorldState state;
    EpisodeScene escene;
    escene.reach_threshold = params.reach_m;
    escene.delta_v = params.danger_m.delta_v;
    escene.delta_o = params.danger_m.delta_o;
    for (const auto& o : scene.obstacles) {
        const Vec2 u = to_units(o);
        if (std::abs(u.x) <= 1.0 && std::abs(u.y) <= 1.0) {
            state.obstacles.push_back(u);
            escene.obstacles.push_back(o);
        }
    }
    for (auto i : zone.ground) {
        state.ground_targets.push_back({to_units(scene.ground_targets.at(i)), false});
        escene.ground_targets.push_back(scene.ground_targets[i]);
    }
    for (auto i : zone.aerial) {
        state.aerial_targets.push_back({to_units(scene.aerial_targets.at(i)), false});
        escene.aerial_targets.push_back(scene.aerial_targets[i]);
    }
    wc.n_obstacle = state.obstacles.size();
    wc.n_ground_target = state.ground_targets.size();
    wc.n_aerial_target = state.aerial_targets.size();
    wc.validate();

    for (const auto& p : ugv_start_m) {
        AgentState a;
        a.kind = VehicleKind::Ugv;
        a.pos = to_units(p);
        a.pos = {std::clamp(a.pos.x, -1.0, 1.0), std::clamp(a.pos.y, -1.0, 1.0)};
        state.ugvs.push_back(a);
    }
    for (std::size_t i = 0; i < n_uav; ++i) {
        AgentState a;
        a.kind = VehicleKind::Uav;
        a.landed_on = i % state.ugvs.size();
        a.pos = state.ugvs[*a.landed_on].pos;
        a.steps_remaining = params.battery_steps;
        state.uavs.push_back(a);
    }

    check_policy(models.ugv, VehicleKind::Ugv);
    const bool needs_uav = n_uav > 0 && !state.aerial_targets.empty();
    if (needs_uav) {
        if (!models.uav) {
            throw std::invalid_argument("run_zone: zone has aerial targets and UAVs but no UAV model was loaded");
        }
        check_policy(*models.uav, VehicleKind::Uav);
    }

    ZoneRun run;
    run.record.targets_total = static_cast<int>(state.ground_targets.size() + state.aerial_targets.size());
    run.record.ugv_paths.resize(state.ugvs.size());
    run.record.uav_paths.resize(state.uavs.size());
    auto log_paths = [&] {
        for (std::size_t g = 0; g < state.ugvs.size(); ++g) {
            run.record.ugv_paths[g].push_back({to_m(state.ugvs[g].pos), true});
        }
        for (std::size_t i = 0; i < state.uavs.size(); ++i) {
            run.record.uav_paths[i].push_back({to_m(state.uavs[i].pos), state.uavs[i].airborne()});
        }
    };

    // Landed UAVs take off while unreached aerial targets outnumber the UAVs already hunting them.
    auto launch = [&] {
        std::size_t open = 0;
        for (const auto& t : state.aerial_targets) {
            open += t.reached ? 0 : 1;
        }
        std::size_t hunting = 0;
        for (const auto& u : state.uavs) {
            hunting += (u.airborne() && !u.wants_to_land() && u.steps_remaining > 0) ? 1 : 0;
        }
        for (auto& u : state.uavs) {
            if (hunting >= open) {
                break;
            }
            if (u.landed_on && u.steps_remaining > 0) {
                u.landed_on.reset();
                u.reached_target = false;
                u.returning = false;
                ++hunting;
            }
        }
    };
    launch();
    assign_targets(state);
    log_paths();

    const double ugv_vscale = models.ugv.max_speed / wc.max_speed;
    const double uav_vscale = needs_uav ? models.uav->max_speed / wc.max_speed : 1.0;
    auto finished = [&] { return all_reached(state.ground_targets) && all_reached(state.aerial_targets) && state.all_uavs_landed(); };
    auto stuck = [&] {
        if (!all_reached(state.ground_targets)) {
            return false;
        }
        for (const auto& u : state.uavs) {
            if (u.steps_remaining > 0 && (u.airborne() || !all_reached(state.aerial_targets))) {
                return false;
            }
        }
        return true;
    };

    while (!finished() && !stuck() && state.step_index < wc.max_steps) {
        JointAction joint;
        for (std::size_t g = 0; g < state.ugvs.size(); ++g) {
            const Observation o = adapt_observation(state, g, VehicleKind::Ugv, models.ugv.layout, ugv_vscale);
            joint.ugv.push_back(to_action(models.ugv.actor_for(g).forward(o), wc.max_speed));
        }
        for (std::size_t i = 0; i < state.uavs.size(); ++i) {
            if (state.uavs[i].airborne() && state.uavs[i].steps_remaining > 0 && models.uav) {
                const Observation o = adapt_observation(state, i, VehicleKind::Uav, models.uav->layout, uav_vscale);
                joint.uav.push_back(to_action(models.uav->actor_for(i).forward(o), wc.max_speed));
            } else {
                joint.uav.push_back({});
            }
        }
        StepResult r = step(wc, std::move(state), joint);
        state = std::move(r.state);
        run.record.alpha += r.collisions.real_agent_agent();
        run.record.beta += r.collisions.real_agent_obstacle();
        launch();
        assign_targets(state);
        log_paths();
    }

    run.record.phi = state.step_index;
    int reached = 0;
    for (const auto& t : state.ground_targets) {
        run.ground_reached.push_back(t.reached);
        reached += t.reached ? 1 : 0;
    }
    for (const auto& t : state.aerial_targets) {
        run.aerial_reached.push_back(t.reached);
        reached += t.reached ? 1 : 0;
    }
    run.record.targets_reached = reached;
    run.record.completed = finished();
    run.record.scene = std::move(escene);
    for (const auto& g : state.ugvs) {
        run.ugv_final.push_back(to_m(g.pos));
    }
    for (const auto& u : state.uavs) {
        run.uav_landed.push_back(u.landed_on.has_value());
    }
    run.record.validate();
    return run;
}

MissionOutcome run_mission(const MissionPlan& plan, const MissionScene& scene, const std::vector<Coalition>& coalitions,
                           const TrainedModels& models, const MissionParams& params) {
    params.validate();
    if (coalitions.empty()) {
        throw std::invalid_argument("run_mission: no coalitions");
    }
    if (plan.k_per_zone == 0) {
        throw std::invalid_argument("run_mission: k_per_zone must be at least 1");
    }
    struct Group {
        std::vector<Vec2> ugv_pos;
        std::size_t uav_alive = 0;
        int free_at = 0;
        bool used = false;
    };
    const std::size_t k = std::min(plan.k_per_zone, coalitions.size());
    std::vector<Group> groups(coalitions.size() / k);
    for (std::size_t c = 0; c < groups.size() * k; ++c) {
        auto& g = groups[c / k];
        for (std::size_t u = 0; u < coalitions[c].ugv_ids.size(); ++u) {
            g.ugv_pos.push_back({});
        }
        g.uav_alive += coalitions[c].uav_ids.size();
    }

    MissionOutcome out;
    out.aggregate.targets_total = static_cast<int>(scene.ground_targets.size() + scene.aerial_targets.size());
    bool all_clear = true;
    for (const auto& zone : plan.zones) {
        std::size_t gi = 0;
        for (std::size_t i = 1; i < groups.size(); ++i) {
            if (groups[i].free_at < groups[gi].free_at) {
                gi = i;
            }
        }
        Group& g = groups[gi];
        std::vector<Vec2> start;
        const std::size_t n = g.ugv_pos.size();
        double longest = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            Vec2 offset;
            if (n > 1) {
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
                offset = Vec2{std::cos(angle), std::sin(angle)} * (params.start_ring * zone.radius_m);
            }
            start.push_back(zone.center + offset);
            longest = std::max(longest, distance(g.ugv_pos[j], start.back()));
        }
        const int transit = static_cast<int>(std::ceil(longest / params.speed_m - 1e-9));
        out.transit_steps += transit;

        ZoneRun run = run_zone(zone, scene, start, g.uav_alive, models, params);
        g.free_at += transit + run.record.phi;
        g.used = true;
        g.ugv_pos = run.ugv_final;
        g.uav_alive = static_cast<std::size_t>(std::count(run.uav_landed.begin(), run.uav_landed.end(), true));

        out.aggregate.alpha += run.record.alpha;
        out.aggregate.beta += run.record.beta;
        out.aggregate.targets_reached += run.record.targets_reached;
        all_clear = all_clear && run.record.completed;
        out.zones.push_back(std::move(run.record));
        out.zone_group.push_back(gi);
    }
    for (const auto& g : groups) {
        if (g.used) {
            out.aggregate.phi = std::max(out.aggregate.phi, g.free_at);
        }
    }
    out.aggregate.completed = all_clear && out.aggregate.targets_reached == out.aggregate.targets_total;
    out.aggregate.validate();
    return out;
}

void ScenarioSpec::validate() const {
    if (!(arena_half_extent_m > 0.0) || cluster_radius_m < 0.0 || obstacle_spread_m < 0.0 ||
        obstacle_clearance_m < 0.0) {
        throw std::invalid_argument("scenario: distances must be non-negative and the arena positive");
    }
    if (obstacles_min > obstacles_max) {
        throw std::invalid_argument("scenario: obstacles_min exceeds obstacles_max");
    }
    if (cluster_radius_m + obstacle_spread_m >= arena_half_extent_m) {
        throw std::invalid_argument("scenario: clusters do not fit in the arena");
    }
}

MissionScene generate_scene(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = make_rng(seed);
    MissionScene scene;
    scene.arena_half_extent_m = spec.arena_half_extent_m;
    const double h = spec.arena_half_extent_m;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto in_disk = [&](const Vec2& c, double r) {
        const double rho = r * std::sqrt(unit(rng));
        const double th = 2.0 * std::numbers::pi * unit(rng);
        return c + Vec2{rho * std::cos(th), rho * std::sin(th)};
    };
    auto in_arena = [&](double margin) {
        std::uniform_real_distribution<double> u(-h + margin, h - margin);
        const double x = u(rng);
        return Vec2{x, u(rng)};
    };

    std::vector<Vec2> centers;
    const double margin = spec.cluster_radius_m + spec.obstacle_spread_m;
    for (std::size_t c = 0; c < spec.n_clusters; ++c) {
        Vec2 p;
        int tries = 0;
        do {
            p = in_arena(margin);
        } while (std::any_of(centers.begin(), centers.end(),
                             [&](const Vec2& q) { return distance(p, q) < 4.0 * margin; }) &&
                 ++tries < 10000);
        centers.push_back(p);
    }
    auto place_target = [&](std::size_t i) {
        return centers.empty() ? in_arena(0.0) : in_disk(centers[i % centers.size()], spec.cluster_radius_m);
    };
    const std::size_t n_ground = (spec.n_targets + 1) / 2;
    for (std::size_t i = 0; i < n_ground; ++i) {
        scene.ground_targets.push_back(place_target(i));
    }
    for (std::size_t i = 0; i < spec.n_targets - n_ground; ++i) {
        scene.aerial_targets.push_back(place_target(i));
    }

    std::uniform_int_distribution<std::size_t> count(spec.obstacles_min, spec.obstacles_max);
    const std::size_t n_obs = count(rng);
    const auto targets = scene.all_targets();
    for (std::size_t i = 0; i < n_obs; ++i) {
        for (int tries = 0; tries < 10000; ++tries) {
            const Vec2 p = centers.empty() ? in_arena(0.0) : in_disk(centers[i % centers.size()], spec.obstacle_spread_m);
            const bool clear = std::none_of(targets.begin(), targets.end(), [&](const Vec2& t) {
                return distance(t, p) < spec.obstacle_clearance_m;
            });
            if (clear) {
                scene.obstacles.push_back(p);
                break;
            }
        }
    }
    return scene;
}

std::vector<MissionOutcome> evaluate_missions(const EvaluationSetup& setup, const TrainedModels& models,
                                              std::size_t episodes, std::uint64_t seed, std::size_t workers) {
    setup.scenario.validate();
    setup.params.validate();
    const auto coalitions = make_coalitions(setup.coalition);
    std::vector<MissionOutcome> out(episodes);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t e = first; e < episodes; e += stride) {
            const MissionScene scene = generate_scene(setup.scenario, mix_seed(seed, e));
            const MissionPlan p = plan(scene, setup.zoning, setup.k_per_zone, setup.mode);
            out[e] = run_mission(p, scene, coalitions, models, setup.params);
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, episodes));
    if (workers == 1) {
        work(0, 1);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                work(w, workers);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

}  // namespace coalab

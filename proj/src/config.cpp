#include "coalab/config.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "coalab/io.hpp"

namespace coalab {

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are bound as size_t");

std::size_t parse_count(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("not a non-negative integer: '" + s + "'");
    }
    return static_cast<std::size_t>(std::stoull(s));
}

// Either reads every field into a key/value map or writes the map back into
// the fields, so that both directions share one list of keys.
class Binder {
public:
    explicit Binder(std::map<std::string, std::string>* out) : out_(out) {}
    explicit Binder(const std::map<std::string, std::string>* in) : in_(in) {}

    template <class T, class Format, class Parse>
    void bind(const std::string& key, T& field, Format format, Parse parse) {
        if (!seen_.insert(key).second) {
            throw std::logic_error("config key bound twice: " + key);
        }
        if (out_ != nullptr) {
            (*out_)[key] = format(field);
            return;
        }
        auto it = in_->find(key);
        if (it == in_->end()) {
            return;
        }
        try {
            field = parse(it->second);
        } catch (const std::exception& e) {
            throw std::invalid_argument("config key '" + key + "': " + e.what());
        }
    }

    void operator()(const std::string& key, double& v) {
        bind(key, v, [](double x) { return format_double(x); }, [](const std::string& s) { return parse_double(s); });
    }
    void operator()(const std::string& key, std::size_t& v) {
        bind(key, v, [](std::size_t x) { return std::to_string(x); }, parse_count);
    }
    void operator()(const std::string& key, int& v) {
        bind(key, v, [](int x) { return std::to_string(x); },
             [](const std::string& s) {
                 std::size_t used = 0;
                 const int x = std::stoi(s, &used);
                 if (used != s.size()) {
                     throw std::invalid_argument("not an integer: '" + s + "'");
                 }
                 return x;
             });
    }
    void operator()(const std::string& key, bool& v) {
        bind(key, v, [](bool x) { return std::string(x ? "true" : "false"); },
             [](const std::string& s) {
                 if (s == "true") {
                     return true;
                 }
                 if (s == "false") {
                     return false;
                 }
                 throw std::invalid_argument("expected true or false, got '" + s + "'");
             });
    }
    void operator()(const std::string& key, std::string& v) {
        bind(key, v, [](const std::string& x) { return x; }, [](const std::string& s) { return s; });
    }
    void operator()(const std::string& key, Algorithm& v) {
        bind(key, v, [](Algorithm a) { return std::string(to_string(a)); },
             [](const std::string& s) { return algorithm_from_string(s); });
    }
    void operator()(const std::string& key, MissionMode& v) {
        bind(key, v, [](MissionMode m) { return std::string(to_string(m)); },
             [](const std::string& s) { return mission_mode_from_string(s); });
    }
    void operator()(const std::string& key, CoalitionSpec& v) {
        bind(key, v, [](const CoalitionSpec& c) { return c.str(); },
             [](const std::string& s) { return CoalitionSpec::parse(s); });
    }

    [[nodiscard]] const std::set<std::string>& seen() const { return seen_; }

private:
    std::map<std::string, std::string>* out_ = nullptr;
    const std::map<std::string, std::string>* in_ = nullptr;
    std::set<std::string> seen_;
};

void bind_danger(Binder& b, const std::string& prefix, DangerZoneParams& d) {
    b(prefix + ".sigma_v", d.sigma_v);
    b(prefix + ".delta_v", d.delta_v);
    b(prefix + ".sigma_o", d.sigma_o);
    b(prefix + ".delta_o", d.delta_o);
}

void bind_all(Binder& b, ExperimentConfig& c) {
    b("preset", c.preset);
    b("seed", c.seed);

    auto& w = c.world;
    b("world.arena_half_extent", w.arena_half_extent);
    b("world.n_ugv", w.n_ugv);
    b("world.n_uav", w.n_uav);
    b("world.n_obstacle", w.n_obstacle);
    b("world.n_ground_target", w.n_ground_target);
    b("world.n_aerial_target", w.n_aerial_target);
    b("world.max_speed", w.max_speed);
    b("world.max_steps", w.max_steps);
    b("world.reach_threshold", w.reach_threshold);
    bind_danger(b, "world.danger", w.danger);
    b("world.meters_per_unit", w.meters_per_unit);
    b("world.battery_margin", w.battery_margin);
    b("world.rng_seed", w.rng_seed);

    b("zoning.radius", c.zoning.radius);
    b("zoning.shift_tolerance", c.zoning.shift_tolerance);
    b("zoning.max_iterations", c.zoning.max_iterations);
    b("zoning.merge_tolerance", c.zoning.merge_tolerance);

    b("reward.t1_scale", c.reward.t1_scale);
    b("reward.max_pair_penalty", c.reward.max_pair_penalty);
    b("reward.max_obstacle_penalty", c.reward.max_obstacle_penalty);
    b("reward.r_t", c.reward.r_t);
    bind_danger(b, "reward.danger", c.reward.danger);

    b("algorithm", c.algorithm);

    auto& m = c.maddpg;
    b("maddpg.actor_lr", m.actor_lr);
    b("maddpg.critic_lr", m.critic_lr);
    b("maddpg.gamma", m.gamma);
    b("maddpg.tau", m.tau);
    b("maddpg.batch_size", m.batch_size);
    b("maddpg.buffer_capacity", m.buffer_capacity);
    b("maddpg.warmup", m.warmup);
    b("maddpg.update_every", m.update_every);
    b("maddpg.noise_sigma_start", m.noise_sigma_start);
    b("maddpg.noise_sigma_end", m.noise_sigma_end);
    b("maddpg.noise_decay_episodes", m.noise_decay_episodes);
    b("maddpg.episodes", m.episodes);
    b("maddpg.steps_per_episode", m.steps_per_episode);
    b("maddpg.hidden", m.hidden);
    b("maddpg.grad_clip", m.grad_clip);
    b("maddpg.actor_output_gain", m.actor_output_gain);
    b("maddpg.action_reg", m.action_reg);

    auto& p = c.mappo;
    b("mappo.gamma", p.gamma);
    b("mappo.gae_lambda", p.gae_lambda);
    b("mappo.clip_epsilon", p.clip_epsilon);
    b("mappo.epochs_per_batch", p.epochs_per_batch);
    b("mappo.minibatch_count", p.minibatch_count);
    b("mappo.batch_episodes", p.batch_episodes);
    b("mappo.value_loss_coeff", p.value_loss_coeff);
    b("mappo.entropy_coeff", p.entropy_coeff);
    b("mappo.popart_enabled", p.popart_enabled);
    b("mappo.popart_beta", p.popart_beta);
    b("mappo.policy_lr", p.policy_lr);
    b("mappo.value_lr", p.value_lr);
    b("mappo.max_grad_norm", p.max_grad_norm);
    b("mappo.hidden", p.hidden);
    b("mappo.episodes", p.episodes);
    b("mappo.steps_per_episode", p.steps_per_episode);
    b("mappo.policy_output_gain", p.policy_output_gain);
    b("mappo.log_std_init", p.log_std_init);

    b("train.demo_episodes", c.demo_episodes);
    b("train.uav_action_reg", c.uav_action_reg);
    b("train.save_interval", c.save_interval);

    auto& e = c.evaluation;
    b("mission.episodes", c.evaluation_episodes);
    b("mission.workers", c.workers);
    b("mission.coalition", e.coalition);
    b("mission.k_per_zone", e.k_per_zone);
    b("mission.mode", e.mode);
    b("mission.zone_radius", e.zoning.radius);
    b("mission.zone_shift_tolerance", e.zoning.shift_tolerance);
    b("mission.zone_max_iterations", e.zoning.max_iterations);
    b("mission.zone_merge_tolerance", e.zoning.merge_tolerance);
    b("mission.arena_half_extent_m", e.scenario.arena_half_extent_m);
    b("mission.targets", e.scenario.n_targets);
    b("mission.clusters", e.scenario.n_clusters);
    b("mission.cluster_radius_m", e.scenario.cluster_radius_m);
    b("mission.obstacles_min", e.scenario.obstacles_min);
    b("mission.obstacles_max", e.scenario.obstacles_max);
    b("mission.obstacle_spread_m", e.scenario.obstacle_spread_m);
    b("mission.obstacle_clearance_m", e.scenario.obstacle_clearance_m);
    b("mission.speed_m", e.params.speed_m);
    b("mission.reach_m", e.params.reach_m);
    bind_danger(b, "mission.danger_m", e.params.danger_m);
    b("mission.battery_steps", e.params.battery_steps);
    b("mission.battery_margin", e.params.battery_margin);
    b("mission.zone_step_limit", e.params.zone_step_limit);
    b("mission.start_ring", e.params.start_ring);
}

}  // namespace

void ExperimentConfig::validate() const {
    world.validate();
    zoning.validate();
    reward.validate();
    MaddpgConfig m = maddpg;
    m.validate();
    m.action_reg = uav_action_reg;
    m.validate();
    MappoConfig p = mappo;
    p.validate();
    evaluation.scenario.validate();
    evaluation.zoning.validate();
    evaluation.params.validate();
    if (evaluation.k_per_zone == 0 || evaluation.coalition.n_ugv == 0) {
        throw std::invalid_argument("mission: k_per_zone and coalition UGV count must be positive");
    }
    if (workers == 0) {
        throw std::invalid_argument("mission.workers must be at least 1");
    }
}

std::vector<std::string> preset_names() { return {"desk", "table2", "iadrl"}; }

ExperimentConfig preset_config(std::string_view name) {
    ExperimentConfig c;
    c.preset = std::string(name);
    // Training arenas: the UGV phase sees 1 UGV, 2 ground targets, 1 obstacle;
    // the UAV phase adds 2 UAVs and 2 aerial targets around the replayed UGV.
    c.world.n_ugv = 1;
    c.world.n_uav = 2;
    c.world.n_obstacle = 1;
    c.world.n_ground_target = 2;
    c.world.n_aerial_target = 2;
    c.evaluation.zoning = c.zoning;
    c.evaluation.params = MissionParams::from_world(c.world);
    c.evaluation.coalition = {1, 2};
    if (name == "desk") {
        return c;
    }
    if (name == "table2") {
        c.world.n_ugv = 2;
        c.world.n_uav = 4;
        c.world.n_obstacle = 3;
        c.world.n_ground_target = 3;
        c.world.n_aerial_target = 4;
        c.maddpg.episodes = 20000;
        c.maddpg.noise_decay_episodes = 10000;
        c.mappo.episodes = 20000;
        c.evaluation.params = MissionParams::from_world(c.world);
        c.evaluation.coalition = {2, 8};
        c.evaluation.scenario.n_targets = 12;
        c.evaluation.scenario.n_clusters = 3;
        c.evaluation_episodes = 1000;
        return c;
    }
    if (name == "iadrl") {
        c.world.n_uav = 1;
        c.world.n_ground_target = 1;
        c.world.n_aerial_target = 1;
        c.algorithm = Algorithm::Maddpg;
        c.evaluation.params = MissionParams::from_world(c.world);
        c.evaluation.coalition = {1, 1};
        c.evaluation.mode = MissionMode::NoZoning;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected desk, table2 or iadrl)");
}

std::string save_config(const ExperimentConfig& config) {
    std::map<std::string, std::string> kv;
    ExperimentConfig copy = config;
    Binder b(&kv);
    bind_all(b, copy);
    kv["config_version"] = std::to_string(kConfigVersion);
    return format_key_values(kv);
}

ExperimentConfig load_config(std::string_view text) {
    auto kv = parse_key_values(text);
    if (auto it = kv.find("config_version"); it != kv.end()) {
        if (it->second != std::to_string(kConfigVersion)) {
            throw std::invalid_argument("config_version " + it->second + " is not supported (this build reads " +
                                        std::to_string(kConfigVersion) + ")");
        }
        kv.erase(it);
    }
    const auto preset = kv.contains("preset") ? kv.at("preset") : std::string("desk");
    ExperimentConfig c = preset_config(preset);
    Binder b(static_cast<const std::map<std::string, std::string>*>(&kv));
    bind_all(b, c);
    for (const auto& [key, value] : kv) {
        if (!b.seen().contains(key)) {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    try {
        return load_config(read_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

}  // namespace coalab

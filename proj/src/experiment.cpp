#include "coalab/experiment.hpp"

#include <stdexcept>
#include <string>

#include "coalab/maddpg.hpp"
#include "coalab/mappo.hpp"
#include "coalab/rng.hpp"

namespace coalab {

std::string_view to_string(Phase p) { return p == Phase::Ugv ? "ugv" : "uav"; }

Phase phase_from_string(std::string_view name) {
    if (name == "ugv") {
        return Phase::Ugv;
    }
    if (name == "uav") {
        return Phase::Uav;
    }
    throw std::invalid_argument("unknown phase '" + std::string(name) + "' (expected ugv or uav)");
}

WorldConfig phase_world(const ExperimentConfig& config, Phase phase) {
    WorldConfig w = config.world;
    if (phase == Phase::Ugv) {
        w.n_uav = 0;
        w.n_aerial_target = 0;
    } else {
        w.n_ground_target = 0;
    }
    w.max_steps = config.algorithm == Algorithm::Maddpg ? config.maddpg.steps_per_episode
                                                         : config.mappo.steps_per_episode;
    return w;
}

std::unique_ptr<MultiAgentEnv> make_phase_env(const ExperimentConfig& config, Phase phase,
                                              std::shared_ptr<const DemoLog> demos) {
    const WorldConfig w = phase_world(config, phase);
    if (phase == Phase::Ugv) {
        return std::make_unique<UgvTrainingEnv>(w, config.reward);
    }
    if (!demos || demos->empty()) {
        throw std::invalid_argument("the UAV phase needs a UGV demo log; train the UGV phase first");
    }
    return std::make_unique<UavTrainingEnv>(w, config.reward, std::move(demos));
}

PhaseResult train_phase(const ExperimentConfig& config, Phase phase, std::shared_ptr<const DemoLog> demos,
                        const TrainHooks& hooks) {
    auto env = make_phase_env(config, phase, std::move(demos));
    if (config.algorithm == Algorithm::Maddpg) {
        MaddpgConfig m = config.maddpg;
        m.n_agents = env->agent_count();
        if (phase == Phase::Uav) {
            m.action_reg = config.uav_action_reg;
        }
        auto r = train_maddpg(*env, m, config.seed, hooks);
        return {std::move(r.policy), std::move(r.curve)};
    }
    MappoConfig p = config.mappo;
    p.n_agents = env->agent_count();
    auto r = train_mappo(*env, p, config.seed, hooks);
    return {std::move(r.policy), std::move(r.curve)};
}

std::vector<EpisodeRecord> rollout_policy(MultiAgentEnv& env, const PolicySet& policy, std::size_t episodes,
                                          std::uint64_t seed) {
    if (policy.kind != env.kind()) {
        throw std::invalid_argument("policy vehicle kind does not match the environment");
    }
    std::vector<EpisodeRecord> out;
    out.reserve(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = env.reset(mix_seed(seed, e));
        const WorldState& s = env.state();
        EpisodeRecord rec;
        EpisodeScene scene;
        scene.obstacles = s.obstacles;
        for (const auto& t : s.ground_targets) {
            scene.ground_targets.push_back(t.pos);
        }
        for (const auto& t : s.aerial_targets) {
            scene.aerial_targets.push_back(t.pos);
        }
        scene.reach_threshold = env.config().reach_threshold;
        scene.delta_v = env.config().danger.delta_v;
        scene.delta_o = env.config().danger.delta_o;
        rec.scene = std::move(scene);
        rec.ugv_paths.resize(s.ugvs.size());
        rec.uav_paths.resize(s.uavs.size());
        auto snapshot = [&rec](const WorldState& st) {
            for (std::size_t i = 0; i < st.ugvs.size(); ++i) {
                rec.ugv_paths[i].push_back({st.ugvs[i].pos, true});
            }
            for (std::size_t i = 0; i < st.uavs.size(); ++i) {
                rec.uav_paths[i].push_back({st.uavs[i].pos, st.uavs[i].airborne()});
            }
        };
        snapshot(s);
        bool terminal = false;
        while (true) {
            std::vector<Action> actions;
            actions.reserve(obs.size());
            for (std::size_t i = 0; i < obs.size(); ++i) {
                actions.push_back(policy.act(i, obs[i]));
            }
            auto r = env.step(actions);
            snapshot(env.state());
            ++rec.phi;
            rec.alpha += r.agent_collisions;
            rec.beta += r.obstacle_collisions;
            obs = std::move(r.observations);
            if (r.terminal || r.truncated) {
                terminal = r.terminal;
                break;
            }
        }
        const auto& targets = env.state().targets(env.kind());
        rec.targets_total = static_cast<int>(targets.size());
        for (const auto& t : targets) {
            rec.targets_reached += t.reached ? 1 : 0;
        }
        rec.completed = terminal;
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace coalab

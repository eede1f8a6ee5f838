#include "coalab/env.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coalab/io.hpp"
#include "coalab/rng.hpp"

namespace coalab {

namespace {

std::vector<Observation> observe_all(const WorldState& state, VehicleKind kind) {
    std::vector<Observation> out;
    const std::size_t n = state.agents(kind).size();
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(observe(state, i, kind));
    }
    return out;
}

void check_actions(std::span<const Action> actions, std::size_t expected) {
    if (actions.size() != expected) {
        throw std::invalid_argument("env step: expected " + std::to_string(expected) + " actions, got " +
                                    std::to_string(actions.size()));
    }
}

}  // namespace

UgvTrainingEnv::UgvTrainingEnv(WorldConfig config, RewardParams reward)
    : config_(std::move(config)), reward_(std::move(reward)) {
    config_.n_uav = 0;
    config_.n_aerial_target = 0;
    config_.validate();
    reward_.validate();
    if (config_.n_ugv == 0) {
        throw std::invalid_argument("UGV training needs at least one UGV");
    }
}

ObservationLayout UgvTrainingEnv::layout() const {
    return {config_.n_ground_target, config_.n_obstacle, config_.n_ugv - 1, false};
}

std::vector<Observation> UgvTrainingEnv::reset(std::uint64_t seed) {
    state_ = spawn(config_, seed);
    return observe_all(state_, VehicleKind::Ugv);
}

EnvStep UgvTrainingEnv::step(std::span<const Action> actions) {
    check_actions(actions, config_.n_ugv);
    JointAction joint;
    joint.ugv.assign(actions.begin(), actions.end());
    StepResult r = coalab::step(config_, std::move(state_), joint);
    state_ = std::move(r.state);

    EnvStep out;
    out.observations = observe_all(state_, VehicleKind::Ugv);
    for (std::size_t i = 0; i < config_.n_ugv; ++i) {
        out.breakdowns.push_back(ugv_reward(state_, i, reward_));
        out.rewards.push_back(out.breakdowns.back().total);
    }
    out.agent_collisions = r.collisions.real_agent_agent();
    out.obstacle_collisions = r.collisions.real_agent_obstacle();
    out.real_collisions = out.agent_collisions + out.obstacle_collisions;
    out.terminal = state_.all_targets_reached();
    out.truncated = !out.terminal && state_.step_index >= config_.max_steps;
    return out;
}

std::size_t DemoLog::ugv_count() const {
    if (episodes.empty() || episodes.front().empty()) {
        return 0;
    }
    return episodes.front().front().size();
}

void save_demo_log(const DemoLog& log, const std::filesystem::path& path) {
    std::string out = "episode,step,ugv,x,y\n";
    for (std::size_t e = 0; e < log.episodes.size(); ++e) {
        for (std::size_t s = 0; s < log.episodes[e].size(); ++s) {
            for (std::size_t g = 0; g < log.episodes[e][s].size(); ++g) {
                const Vec2& p = log.episodes[e][s][g];
                out += std::to_string(e) + "," + std::to_string(s) + "," + std::to_string(g) + "," +
                       format_double(p.x) + "," + format_double(p.y) + "\n";
            }
        }
    }
    write_file_atomic(path, out);
}

DemoLog load_demo_log(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    DemoLog log;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != "episode,step,ugv,x,y") {
                throw std::runtime_error(path.string() + ": unexpected demo header");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        try {
            if (cells.size() != 5) {
                throw std::invalid_argument("expected 5 columns");
            }
            const auto e = static_cast<std::size_t>(std::stoul(cells[0]));
            const auto s = static_cast<std::size_t>(std::stoul(cells[1]));
            const auto g = static_cast<std::size_t>(std::stoul(cells[2]));
            const Vec2 p{parse_double(cells[3]), parse_double(cells[4])};
            if (e > log.episodes.size() || (e == log.episodes.size() && s != 0)) {
                throw std::invalid_argument("rows out of order");
            }
            if (e == log.episodes.size()) {
                log.episodes.emplace_back();
            }
            auto& ep = log.episodes[e];
            if (s > ep.size() || (s == ep.size() && g != 0)) {
                throw std::invalid_argument("rows out of order");
            }
            if (s == ep.size()) {
                ep.emplace_back();
            }
            if (g != ep[s].size()) {
                throw std::invalid_argument("rows out of order");
            }
            ep[s].push_back(p);
        } catch (const std::exception& ex) {
            throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return log;
}

UavTrainingEnv::UavTrainingEnv(WorldConfig config, RewardParams reward, std::shared_ptr<const DemoLog> demos)
    : config_(std::move(config)), reward_(std::move(reward)), demos_(std::move(demos)) {
    config_.n_ground_target = 0;
    config_.validate();
    reward_.validate();
    if (config_.n_uav == 0) {
        throw std::invalid_argument("UAV training needs at least one UAV");
    }
    if (!demos_ || demos_->empty()) {
        throw std::invalid_argument("UAV training needs recorded UGV demonstrations");
    }
    if (demos_->ugv_count() < config_.n_ugv || config_.n_ugv == 0) {
        throw std::invalid_argument("demo log holds " + std::to_string(demos_->ugv_count()) + " UGVs, scenario needs " +
                                    std::to_string(config_.n_ugv) + " (at least one)");
    }
}

ObservationLayout UavTrainingEnv::layout() const {
    return {config_.n_aerial_target, config_.n_obstacle, config_.n_uav - 1, true};
}

std::vector<Observation> UavTrainingEnv::reset(std::uint64_t seed) {
    state_ = spawn(config_, seed);
    Rng rng = make_rng(seed, 1);
    std::uniform_int_distribution<std::size_t> pick(0, demos_->episodes.size() - 1);
    episode_ = pick(rng);
    const auto& demo = demos_->episodes[episode_];
    cursor_.assign(config_.n_ugv, 0);
    for (std::size_t g = 0; g < config_.n_ugv; ++g) {
        state_.ugvs[g].pos = demo.front()[g];
    }
    return observe_all(state_, VehicleKind::Uav);
}

EnvStep UavTrainingEnv::step(std::span<const Action> actions) {
    check_actions(actions, config_.n_uav);
    const auto& demo = demos_->episodes[episode_];
    JointAction joint;
    joint.uav.assign(actions.begin(), actions.end());
    std::vector<bool> moves(config_.n_ugv);
    for (std::size_t g = 0; g < config_.n_ugv; ++g) {
        moves[g] = !state_.ugvs[g].holding_for && cursor_[g] + 1 < demo.size();
        Vec2 delta;
        if (moves[g]) {
            delta = demo[cursor_[g] + 1][g] - state_.ugvs[g].pos;
        }
        joint.ugv.push_back({delta.x, delta.y});
    }
    StepResult r = coalab::step(config_, std::move(state_), joint);
    state_ = std::move(r.state);
    for (std::size_t g = 0; g < config_.n_ugv; ++g) {
        if (moves[g]) {
            ++cursor_[g];
        }
    }

    EnvStep out;
    out.observations = observe_all(state_, VehicleKind::Uav);
    for (std::size_t i = 0; i < config_.n_uav; ++i) {
        out.breakdowns.push_back(uav_reward(state_, i, reward_));
        out.rewards.push_back(out.breakdowns.back().total);
    }
    // UGV-UGV contacts belong to the replayed demo, not to the learners.
    for (const auto& e : r.collisions.events) {
        if (e.contact != Contact::Real) {
            continue;
        }
        if (e.kind == PairKind::UavUav) {
            ++out.agent_collisions;
        } else if (e.kind == PairKind::UavObstacle) {
            ++out.obstacle_collisions;
        }
    }
    out.real_collisions = out.agent_collisions + out.obstacle_collisions;
    const bool aerial_done = std::all_of(state_.aerial_targets.begin(), state_.aerial_targets.end(),
                                         [](const Target& t) { return t.reached; });
    out.terminal = aerial_done && state_.all_uavs_landed();
    out.truncated = !out.terminal && state_.step_index >= config_.max_steps;
    return out;
}

}  // namespace coalab

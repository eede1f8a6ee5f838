#include "coalab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coalab/io.hpp"

namespace coalab {

std::string_view to_string(Algorithm a) { return a == Algorithm::Maddpg ? "maddpg" : "mappo"; }

Algorithm algorithm_from_string(std::string_view name) {
    if (name == "maddpg") {
        return Algorithm::Maddpg;
    }
    if (name == "mappo") {
        return Algorithm::Mappo;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (expected maddpg or mappo)");
}

const Mlp& PolicySet::actor_for(std::size_t vehicle) const {
    if (actors.empty()) {
        throw std::logic_error("policy set has no actors");
    }
    return actors[vehicle % actors.size()];
}

Action to_action(const Eigen::VectorXd& normalized, double max_speed) {
    if (normalized.size() != 2) {
        throw std::invalid_argument("actor output must have 2 components, got " + std::to_string(normalized.size()));
    }
    return {std::clamp(normalized[0], -1.0, 1.0) * max_speed, std::clamp(normalized[1], -1.0, 1.0) * max_speed};
}

Action PolicySet::act(std::size_t vehicle, const Observation& obs) const {
    const Mlp& net = actor_for(vehicle);
    if (static_cast<std::size_t>(obs.size()) != net.input_size()) {
        throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " entries, actor expects " +
                                    std::to_string(net.input_size()));
    }
    return to_action(net.forward(obs), max_speed);
}

namespace {

std::string kind_name(VehicleKind k) { return std::string(to_string(k)); }

VehicleKind kind_from(const std::string& s) {
    if (s == kind_name(VehicleKind::Ugv)) {
        return VehicleKind::Ugv;
    }
    if (s == kind_name(VehicleKind::Uav)) {
        return VehicleKind::Uav;
    }
    throw std::invalid_argument("unknown vehicle kind '" + s + "'");
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const std::filesystem::path& where) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw std::runtime_error(where.string() + ": missing key '" + key + "'");
    }
    return it->second;
}

}  // namespace

void save_policy_set(const PolicySet& set, const std::filesystem::path& dir) {
    if (set.actors.empty()) {
        throw std::invalid_argument("refusing to save an empty policy set");
    }
    std::map<std::string, std::string> kv;
    kv["format"] = "coalab-policy";
    kv["version"] = std::to_string(kPolicySetVersion);
    kv["algorithm"] = std::string(to_string(set.algorithm));
    kv["kind"] = kind_name(set.kind);
    kv["n_targets"] = std::to_string(set.layout.n_targets);
    kv["n_obstacles"] = std::to_string(set.layout.n_obstacles);
    kv["n_peers"] = std::to_string(set.layout.n_peers);
    kv["uav_suffix"] = set.layout.uav_suffix ? "1" : "0";
    kv["max_speed"] = format_double(set.max_speed);
    kv["actors"] = std::to_string(set.actors.size());
    for (std::size_t i = 0; i < set.actors.size(); ++i) {
        save_mlp(set.actors[i], dir / ("actor_" + std::to_string(i) + ".mlp"));
    }
    write_file_atomic(dir / "policy.manifest", format_key_values(kv));
}

PolicySet load_policy_set(const std::filesystem::path& dir) {
    const auto manifest = dir / "policy.manifest";
    const auto kv = parse_key_values(read_file(manifest));
    if (require(kv, "format", manifest) != "coalab-policy") {
        throw std::runtime_error(manifest.string() + ": not a policy manifest");
    }
    if (require(kv, "version", manifest) != std::to_string(kPolicySetVersion)) {
        throw std::runtime_error(manifest.string() + ": policy format version " + require(kv, "version", manifest) +
                                 ", this build reads version " + std::to_string(kPolicySetVersion));
    }
    PolicySet set;
    try {
        set.algorithm = algorithm_from_string(require(kv, "algorithm", manifest));
        set.kind = kind_from(require(kv, "kind", manifest));
        set.layout.n_targets = std::stoul(require(kv, "n_targets", manifest));
        set.layout.n_obstacles = std::stoul(require(kv, "n_obstacles", manifest));
        set.layout.n_peers = std::stoul(require(kv, "n_peers", manifest));
        set.layout.uav_suffix = require(kv, "uav_suffix", manifest) == "1";
        set.max_speed = parse_double(require(kv, "max_speed", manifest));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(manifest.string() + ": " + e.what());
    }
    const std::size_t n = std::stoul(require(kv, "actors", manifest));
    for (std::size_t i = 0; i < n; ++i) {
        set.actors.push_back(load_mlp(dir / ("actor_" + std::to_string(i) + ".mlp")));
        if (set.actors.back().input_size() != set.layout.size() || set.actors.back().output_size() != 2) {
            throw std::runtime_error(dir.string() + ": actor " + std::to_string(i) +
                                     " does not match the manifest observation layout");
        }
    }
    if (set.actors.empty()) {
        throw std::runtime_error(manifest.string() + ": no actors");
    }
    return set;
}

void write_learning_curve(const std::vector<CurveRow>& rows, const std::filesystem::path& path) {
    std::string out = "episode,return,r1,r2,r3,r4,r5,r6,r7,collisions,steps\n";
    for (const auto& r : rows) {
        out += std::to_string(r.episode) + "," + format_double(r.episode_return);
        for (double c : r.components) {
            out += "," + format_double(c);
        }
        out += "," + std::to_string(r.collisions) + "," + std::to_string(r.steps) + "\n";
    }
    write_file_atomic(path, out);
}

std::vector<CurveRow> read_learning_curve(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<CurveRow> rows;
    std::getline(in, line);
    if (line != "episode,return,r1,r2,r3,r4,r5,r6,r7,collisions,steps") {
        throw std::runtime_error(path.string() + ": unexpected learning curve header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 11) {
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        }
        CurveRow r;
        r.episode = std::stoul(cells[0]);
        r.episode_return = parse_double(cells[1]);
        for (std::size_t k = 0; k < 7; ++k) {
            r.components[k] = parse_double(cells[2 + k]);
        }
        r.collisions = std::stoi(cells[9]);
        r.steps = std::stoi(cells[10]);
        rows.push_back(r);
    }
    return rows;
}

double mean_return(const std::vector<CurveRow>& rows, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > rows.size()) {
        throw std::out_of_range("mean_return window [" + std::to_string(first) + ", " + std::to_string(first + count) +
                                ") outside " + std::to_string(rows.size()) + " rows");
    }
    double sum = 0.0;
    for (std::size_t i = first; i < first + count; ++i) {
        sum += rows[i].episode_return;
    }
    return sum / static_cast<double>(count);
}

DemoLog record_demos(UgvTrainingEnv& env, const PolicySet& policy, std::size_t episodes, std::uint64_t seed) {
    if (policy.kind != VehicleKind::Ugv) {
        throw std::invalid_argument("demonstrations need a UGV policy");
    }
    DemoLog log;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = env.reset(mix_seed(seed, e));
        std::vector<std::vector<Vec2>> steps;
        auto snapshot = [&] {
            std::vector<Vec2> p;
            for (const auto& u : env.state().ugvs) {
                p.push_back(u.pos);
            }
            steps.push_back(std::move(p));
        };
        snapshot();
        while (true) {
            std::vector<Action> actions;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                actions.push_back(policy.act(i, obs[i]));
            }
            auto r = env.step(actions);
            snapshot();
            obs = std::move(r.observations);
            if (r.terminal || r.truncated) {
                break;
            }
        }
        log.episodes.push_back(std::move(steps));
    }
    return log;
}

}  // namespace coalab

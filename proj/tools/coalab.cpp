// coalab: train, evaluate, zone, mission and report commands.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "coalab/config.hpp"
#include "coalab/evaluation.hpp"
#include "coalab/experiment.hpp"
#include "coalab/io.hpp"
#include "coalab/mission.hpp"
#include "coalab/rng.hpp"
#include "coalab/zoning.hpp"

#ifndef COALAB_GIT_DESCRIBE
#define COALAB_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace coalab;

namespace {

constexpr int kManifestVersion = 1;
constexpr int kCsvVersion = 1;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

fs::path output_root(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("COALAB_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "out";
}

// Every artifact directory gets config.txt plus manifest.json; together they
// re-run the command.
void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                    json extra = json::object()) {
    const std::string text = save_config(config);
    write_file_atomic(dir / "config.txt", text);
    json m;
    m["manifest_version"] = kManifestVersion;
    m["command"] = command;
    m["git_describe"] = COALAB_GIT_DESCRIBE;
    m["seed"] = config.seed;
    m["config_hash"] = fmt::format("{:016x}", fnv1a(text));
    m["config_file"] = "config.txt";
    m["formats"] = {{"config", kConfigVersion}, {"policy_set", kPolicySetVersion}, {"csv", kCsvVersion}};
    for (auto& [k, v] : extra.items()) {
        m[k] = v;
    }
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

struct ConfigFlags {
    std::string preset;
    std::string config_file;
    std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--preset", f.preset, "Preset: desk, table2 or iadrl");
    cmd->add_option("--config", f.config_file, "Config file (key = value); its preset key picks the base");
    cmd->add_option("--seed", f.seed, "Master seed");
}

ExperimentConfig resolve_config(const ConfigFlags& f) {
    if (!f.preset.empty() && !f.config_file.empty()) {
        throw std::invalid_argument("give either --preset or --config, not both");
    }
    ExperimentConfig c = f.config_file.empty() ? preset_config(f.preset.empty() ? "desk" : f.preset)
                                               : load_config_file(f.config_file);
    if (f.seed) {
        c.seed = *f.seed;
    }
    return c;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) {
        throw std::runtime_error(what + " not found: " + p.string());
    }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    ConfigFlags cfg;
    std::string phase = "ugv";
    std::string algo;
    std::optional<std::size_t> episodes;
    std::optional<std::size_t> save_interval;
    std::string demos;
    std::string out;
    bool no_plots = false;
};

int cmd_train(const TrainArgs& a) {
    ExperimentConfig config = resolve_config(a.cfg);
    const Phase phase = phase_from_string(a.phase);
    if (!a.algo.empty()) {
        config.algorithm = algorithm_from_string(a.algo);
    }
    if (a.episodes) {
        config.maddpg.episodes = *a.episodes;
        config.mappo.episodes = *a.episodes;
    }
    if (a.save_interval) {
        config.save_interval = *a.save_interval;
    }
    config.validate();

    const fs::path root = output_root(a.out);
    const fs::path dir = root / std::string(to_string(phase));
    std::shared_ptr<const DemoLog> demos;
    if (phase == Phase::Uav) {
        const fs::path demo_path = a.demos.empty() ? root / "ugv" / "demos.csv" : fs::path(a.demos);
        if (!fs::exists(demo_path)) {
            throw std::runtime_error("UAV phase needs the UGV demo log, missing: " + demo_path.string() +
                                     " (run `train --phase ugv` first or pass --demos)");
        }
        demos = std::make_shared<const DemoLog>(load_demo_log(demo_path));
        if (demos->empty()) {
            throw std::runtime_error("demo log has no episodes: " + demo_path.string());
        }
    }
    fs::create_directories(dir);

    TrainHooks hooks;
    if (config.save_interval > 0) {
        hooks.checkpoint_every = config.save_interval;
        hooks.on_checkpoint = [&dir](std::size_t done, const PolicySet& p) {
            save_policy_set(p, dir / "checkpoints" / fmt::format("ep_{:06}", done));
            spdlog::info("checkpoint after {} episodes", done);
        };
    }
    spdlog::info("training {} phase with {} (seed {}, {} episodes)", to_string(phase),
                 to_string(config.algorithm), config.seed,
                 config.algorithm == Algorithm::Maddpg ? config.maddpg.episodes : config.mappo.episodes);
    const PhaseResult result = train_phase(config, phase, demos, hooks);

    save_policy_set(result.policy, dir / "policy");
    write_learning_curve(result.curve, dir / "curve.csv");
    json extra;
    extra["phase"] = std::string(to_string(phase));
    extra["algorithm"] = std::string(to_string(config.algorithm));
    extra["policy_dir"] = "policy";
    extra["curve"] = "curve.csv";
    if (phase == Phase::Ugv) {
        UgvTrainingEnv env(phase_world(config, Phase::Ugv), config.reward);
        const DemoLog log = record_demos(env, result.policy, config.demo_episodes, config.seed);
        save_demo_log(log, dir / "demos.csv");
        extra["demos"] = "demos.csv";
    } else {
        save_demo_log(*demos, dir / "demos_used.csv");
        extra["demos"] = "demos_used.csv";
    }
    if (!a.no_plots) {
        write_file_atomic(dir / "curve.svg",
                          learning_curve_svg({{std::string(to_string(config.algorithm)), result.curve}}, 100));
    }
    write_manifest(dir, "train", config, extra);
    const std::size_t n = result.curve.size();
    const std::size_t w = std::min<std::size_t>(n, 500);
    if (w > 0) {
        spdlog::info("mean return: first {} episodes {:.2f}, last {} episodes {:.2f}", w,
                     mean_return(result.curve, 0, w), w, mean_return(result.curve, n - w, w));
    }
    std::cout << dir.string() << "\n";
    return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvalArgs {
    std::string run;
    std::size_t episodes = 100;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_evaluate(const EvalArgs& a) {
    const fs::path run = a.run;
    require_file(run / "config.txt", "run config");
    const ExperimentConfig config = load_config_file(run / "config.txt");
    const PolicySet policy = load_policy_set(run / "policy");
    const Phase phase = policy.kind == VehicleKind::Ugv ? Phase::Ugv : Phase::Uav;
    std::shared_ptr<const DemoLog> demos;
    if (phase == Phase::Uav) {
        require_file(run / "demos_used.csv", "demo log");
        demos = std::make_shared<const DemoLog>(load_demo_log(run / "demos_used.csv"));
    }
    auto env = make_phase_env(config, phase, demos);
    if (env->layout() != policy.layout) {
        throw std::runtime_error(fmt::format("policy observation size {} does not match the environment's {}",
                                             policy.layout.size(), env->layout().size()));
    }
    const auto records = rollout_policy(*env, policy, a.episodes, a.seed);
    const fs::path dir = a.out.empty() ? run / "eval" : fs::path(a.out);
    write_episode_table(records, dir / "episodes.csv");
    const std::string label = fmt::format("phase={}", to_string(phase));
    write_metric_table(summarize(std::string(to_string(policy.algorithm)), label, records), dir / "metrics.csv");
    ExperimentConfig stamped = config;
    stamped.seed = a.seed;
    write_manifest(dir, "evaluate", stamped,
                   {{"run", run.string()}, {"episodes", a.episodes}, {"phase", std::string(to_string(phase))}});
    spdlog::info("{} episodes: completion {:.3f}, accuracy {:.1f}%", a.episodes, completion_rate(records),
                 accuracy(records));
    std::cout << dir.string() << "\n";
    return 0;
}

// ---- zone ------------------------------------------------------------------

std::vector<Vec2> read_points(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open points file: " + path.string());
    }
    std::vector<Vec2> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        if (lineno == 1 && (line == "x,y" || line == "x, y")) {
            continue;
        }
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
                throw std::invalid_argument("expected two fields");
            }
            pts.push_back({parse_double(line.substr(0, comma)), parse_double(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw std::runtime_error(fmt::format("{}:{}: expected 'x,y', got '{}'", path.string(), lineno, line));
        }
    }
    return pts;
}

std::string zones_svg(const std::vector<Vec2>& pts, const ZoneSet& zones, double radius) {
    double lo = -1.0;
    double hi = 1.0;
    for (const auto& p : pts) {
        lo = std::min({lo, p.x - radius, p.y - radius});
        hi = std::max({hi, p.x + radius, p.y + radius});
    }
    const double size = 480.0;
    const double scale = size / (hi - lo);
    auto sx = [&](double x) { return (x - lo) * scale + 10.0; };
    auto sy = [&](double y) { return size - (y - lo) * scale + 10.0; };
    std::ostringstream s;
    s << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\">\n", size + 20);
    for (std::size_t z = 0; z < zones.size(); ++z) {
        s << fmt::format(
            "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"none\" stroke=\"#3465a4\"/>\n",
            sx(zones.centers[z].x), sy(zones.centers[z].y), radius * scale);
    }
    for (const auto& p : pts) {
        s << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"#cc0000\"/>\n", sx(p.x), sy(p.y));
    }
    s << "</svg>\n";
    return s.str();
}

struct ZoneArgs {
    std::string points;
    std::optional<double> radius;
    ConfigFlags cfg;
    std::string out;
    bool no_plots = false;
};

int cmd_zone(const ZoneArgs& a) {
    ExperimentConfig config = resolve_config(a.cfg);
    MeanShiftConfig ms = config.evaluation.zoning;
    if (a.radius) {
        ms = ms.with_radius(*a.radius);
    }
    ms.validate();
    config.evaluation.zoning = ms;
    const auto pts = read_points(a.points);
    const ZoneSet zones = pts.empty() ? ZoneSet{} : assign_zones(pts, ms);

    std::vector<std::optional<std::size_t>> owner(pts.size());
    for (std::size_t z = 0; z < zones.size(); ++z) {
        for (auto i : zones.members[z]) {
            owner[i] = z;
        }
    }
    bool covered = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        covered = covered && owner[i] && distance(pts[i], zones.centers[*owner[i]]) <= ms.radius;
    }

    const fs::path dir = output_root(a.out) / "zones";
    std::string centers = "zone,x,y,members\n";
    for (std::size_t z = 0; z < zones.size(); ++z) {
        centers += fmt::format("{},{},{},{}\n", z, format_double(zones.centers[z].x),
                               format_double(zones.centers[z].y), zones.members[z].size());
    }
    std::string members = "point,x,y,zone\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        members += fmt::format("{},{},{},{}\n", i, format_double(pts[i].x), format_double(pts[i].y),
                               owner[i] ? std::to_string(*owner[i]) : std::string("-1"));
    }
    write_file_atomic(dir / "centers.csv", centers);
    write_file_atomic(dir / "membership.csv", members);
    if (!a.no_plots) {
        write_file_atomic(dir / "zones.svg", zones_svg(pts, zones, ms.radius));
    }
    write_manifest(dir, "zone", config,
                   {{"points", a.points}, {"zones", zones.size()}, {"coverage", covered ? "pass" : "fail"}});
    std::cout << fmt::format("{} points, {} zones, coverage {}\n", pts.size(), zones.size(),
                             covered ? "pass" : "fail");
    return covered ? 0 : 1;
}

// ---- mission ---------------------------------------------------------------

struct MissionArgs {
    ConfigFlags cfg;
    std::string models;
    std::optional<std::size_t> episodes;
    std::optional<std::size_t> targets;
    std::optional<std::size_t> clusters;
    std::string coalition;
    std::optional<std::size_t> k;
    std::string mode;
    std::optional<double> radius;
    std::optional<std::size_t> workers;
    std::string method;
    std::string name = "mission";
    std::string out;
    bool no_plots = false;
};

TrainedModels load_models(const fs::path& dir, const EvaluationSetup& setup) {
    require_file(dir / "ugv" / "policy", "UGV policy");
    TrainedModels m;
    m.ugv = load_policy_set(dir / "ugv" / "policy");
    if (m.ugv.kind != VehicleKind::Ugv) {
        throw std::runtime_error("policy under " + (dir / "ugv").string() + " is not a UGV policy");
    }
    if (fs::exists(dir / "uav" / "policy")) {
        m.uav = load_policy_set(dir / "uav" / "policy");
        if (m.uav->kind != VehicleKind::Uav) {
            throw std::runtime_error("policy under " + (dir / "uav").string() + " is not a UAV policy");
        }
    } else if (setup.coalition.n_uav > 0 && setup.scenario.n_targets > 1) {
        throw std::runtime_error("coalition " + setup.coalition.str() + " has UAVs but no UAV policy exists under " +
                                 (dir / "uav").string());
    }
    return m;
}

int cmd_mission(const MissionArgs& a) {
    ExperimentConfig config = resolve_config(a.cfg);
    auto& s = config.evaluation;
    if (a.episodes) {
        config.evaluation_episodes = *a.episodes;
    }
    if (a.targets) {
        s.scenario.n_targets = *a.targets;
    }
    if (a.clusters) {
        s.scenario.n_clusters = *a.clusters;
    }
    if (!a.coalition.empty()) {
        s.coalition = CoalitionSpec::parse(a.coalition);
    }
    if (a.k) {
        s.k_per_zone = *a.k;
    }
    if (!a.mode.empty()) {
        s.mode = mission_mode_from_string(a.mode);
    }
    if (a.radius) {
        s.zoning = s.zoning.with_radius(*a.radius);
    }
    if (a.workers) {
        config.workers = *a.workers;
    }
    config.validate();
    const fs::path models_dir = a.models.empty() ? output_root(a.out) : fs::path(a.models);
    const TrainedModels models = load_models(models_dir, s);

    spdlog::info("{} mission episodes: {} targets, coalition {}, mode {}, radius {} m", config.evaluation_episodes,
                 s.scenario.n_targets, s.coalition.str(), to_string(s.mode), s.zoning.radius);
    const auto outcomes = evaluate_missions(s, models, config.evaluation_episodes, config.seed, config.workers);

    std::vector<EpisodeRecord> records;
    std::string plans = "episode,zone,x,y,radius_m,ground,aerial,group\n";
    for (std::size_t e = 0; e < outcomes.size(); ++e) {
        records.push_back(outcomes[e].aggregate);
        const MissionScene scene = generate_scene(s.scenario, mix_seed(config.seed, e));
        const MissionPlan p = plan(scene, s.zoning, s.k_per_zone, s.mode);
        for (std::size_t z = 0; z < p.zones.size(); ++z) {
            const auto& zone = p.zones[z];
            plans += fmt::format("{},{},{},{},{},{},{},{}\n", e, z, format_double(zone.center.x),
                                 format_double(zone.center.y), format_double(zone.radius_m), zone.ground.size(),
                                 zone.aerial.size(), outcomes[e].zone_group.at(z));
        }
    }
    const std::string method =
        a.method.empty() ? fmt::format("{}-{}", to_string(models.ugv.algorithm), to_string(s.mode)) : a.method;
    const std::string label = fmt::format("targets={};coalition={};radius={}", s.scenario.n_targets,
                                          s.coalition.str(), format_double(s.zoning.radius));
    const auto metrics = summarize(method, label, records);

    const fs::path dir = output_root(a.out) / a.name;
    write_episode_table(records, dir / "episodes.csv");
    write_file_atomic(dir / "plans.csv", plans);
    if (!records.empty()) {
        write_file_atomic(dir / "episode0_paths.csv", episode_log_csv(records.front()));
    }
    write_metric_table(metrics, dir / "metrics.csv");
    if (!a.no_plots) {
        write_file_atomic(dir / "completion.svg", bar_chart_svg(metrics, "completion_rate"));
    }
    write_manifest(dir, "mission", config, {{"models", models_dir.string()}, {"method", method}});
    for (const auto& m : metrics) {
        std::cout << fmt::format("{:<22} {}\n", m.metric, format_double(m.value));
    }
    return 0;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
    bool no_plots = false;
};

int cmd_report(const ReportArgs& a) {
    std::vector<MetricRow> all;
    for (const auto& r : a.runs) {
        const fs::path p = fs::path(r) / "metrics.csv";
        require_file(p, "metrics table");
        auto rows = read_metric_table(p);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    // Rows are (method, metric) in first-seen order; columns are configs.
    std::vector<std::string> configs;
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::tuple<std::string, std::string, std::string>, double> cell;
    for (const auto& m : all) {
        if (std::find(configs.begin(), configs.end(), m.config) == configs.end()) {
            configs.push_back(m.config);
        }
        const auto key = std::make_pair(m.method, m.metric);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            keys.push_back(key);
        }
        if (!cell.emplace(std::make_tuple(m.method, m.metric, m.config), m.value).second) {
            throw std::runtime_error(fmt::format("duplicate result for method '{}', metric '{}', config '{}'",
                                                 m.method, m.metric, m.config));
        }
    }
    std::string table = "method,metric";
    for (const auto& c : configs) {
        table += "," + c;
    }
    table += "\n";
    for (const auto& [method, metric] : keys) {
        table += method + "," + metric;
        for (const auto& c : configs) {
            auto it = cell.find({method, metric, c});
            table += "," + (it == cell.end() ? std::string() : format_double(it->second));
        }
        table += "\n";
    }
    const fs::path dir = output_root(a.out) / "report";
    write_file_atomic(dir / "report.csv", table);
    write_metric_table(all, dir / "merged.csv");
    if (!a.no_plots) {
        std::set<std::string> metrics;
        for (const auto& k : keys) {
            metrics.insert(k.second);
        }
        for (const auto& m : metrics) {
            write_file_atomic(dir / (m + ".svg"), bar_chart_svg(all, m));
        }
    }
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_st("coalab"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Zone-based coalition planning for UGV/UAV teams"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train one phase and write policy, curve and manifest");
    add_config_flags(t, train.cfg);
    t->add_option("--phase", train.phase, "ugv or uav")->check(CLI::IsMember({"ugv", "uav"}));
    t->add_option("--algo", train.algo, "maddpg or mappo")->check(CLI::IsMember({"maddpg", "mappo"}));
    t->add_option("--episodes", train.episodes, "Override the episode budget");
    t->add_option("--save-interval", train.save_interval, "Checkpoint every N episodes (0 = off)");
    t->add_option("--demos", train.demos, "UGV demo log for the UAV phase (default <out>/ugv/demos.csv)");
    t->add_option("--out", train.out, "Output root (default $COALAB_OUT or ./out)");
    t->add_flag("--no-plots", train.no_plots, "Skip SVG output");

    EvalArgs eval;
    auto* e = app.add_subcommand("evaluate", "Greedy rollouts of a trained phase in its training world");
    e->add_option("--run", eval.run, "Phase directory written by train")->required();
    e->add_option("--episodes", eval.episodes, "Episodes");
    e->add_option("--seed", eval.seed, "Rollout seed");
    e->add_option("--out", eval.out, "Output directory (default <run>/eval)");

    ZoneArgs zone;
    auto* z = app.add_subcommand("zone", "Zone a CSV of x,y points");
    z->add_option("points", zone.points, "Points file")->required();
    z->add_option("--radius", zone.radius, "Zone radius");
    add_config_flags(z, zone.cfg);
    z->add_option("--out", zone.out, "Output root");
    z->add_flag("--no-plots", zone.no_plots, "Skip SVG output");

    MissionArgs mission;
    auto* m = app.add_subcommand("mission", "Evaluate trained models on random missions");
    add_config_flags(m, mission.cfg);
    m->add_option("--models", mission.models, "Directory holding ugv/policy and uav/policy (default: output root)");
    m->add_option("--episodes", mission.episodes, "Evaluation episodes");
    m->add_option("--targets", mission.targets, "Targets per mission");
    m->add_option("--clusters", mission.clusters, "Target clusters (0 = scattered)");
    m->add_option("--coalition", mission.coalition, "GxA: UGVs x UAVs");
    m->add_option("--k", mission.k, "Coalitions per zone");
    m->add_option("--mode", mission.mode, "zoned or no-zoning")->check(CLI::IsMember({"zoned", "no-zoning"}));
    m->add_option("--radius", mission.radius, "Zone radius in meters");
    m->add_option("--workers", mission.workers, "Worker threads");
    m->add_option("--method", mission.method, "Method label for the metric table");
    m->add_option("--name", mission.name, "Run directory name under the output root");
    m->add_option("--out", mission.out, "Output root");
    m->add_flag("--no-plots", mission.no_plots, "Skip SVG output");

    ReportArgs report;
    auto* r = app.add_subcommand("report", "Merge mission metric tables");
    r->add_option("runs", report.runs, "Run directories containing metrics.csv")->required();
    r->add_option("--out", report.out, "Output root");
    r->add_flag("--no-plots", report.no_plots, "Skip SVG output");

    ConfigFlags show;
    auto* c = app.add_subcommand("config", "Print a resolved configuration");
    add_config_flags(c, show);

    CLI11_PARSE(app, argc, argv);
    if (quiet) {
        spdlog::set_level(spdlog::level::warn);
    }
    try {
        if (t->parsed()) {
            return cmd_train(train);
        }
        if (e->parsed()) {
            return cmd_evaluate(eval);
        }
        if (z->parsed()) {
            return cmd_zone(zone);
        }
        if (m->parsed()) {
            return cmd_mission(mission);
        }
        if (r->parsed()) {
            return cmd_report(report);
        }
        if (c->parsed()) {
            std::cout << save_config(resolve_config(show));
            return 0;
        }
    } catch (const std::exception& ex) {
        spdlog::error("{}", ex.what());
        return 1;
    }
    return 1;
}

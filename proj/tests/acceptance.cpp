// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
// checked criterion fails. Learning curves and mission tables are written
// under ./acceptance_out for inspection.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "coalab/config.hpp"
#include "coalab/evaluation.hpp"
#include "coalab/experiment.hpp"
#include "coalab/maddpg.hpp"
#include "coalab/mappo.hpp"
#include "coalab/mission.hpp"
#include "coalab/neural.hpp"
#include "coalab/reward.hpp"
#include "coalab/rng.hpp"
#include "coalab/zoning.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coalab;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kZoningTol = 1e-9;
constexpr double kZoningSeconds = 5.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kExactTol = 1e-12;
constexpr double kGapFraction = 0.5;
constexpr double kPlateauFraction = 0.1;  // last two 500-episode windows differ by at most this share of the gap
constexpr std::size_t kWindow = 500;
constexpr std::size_t kTrainEpisodes = 5000;
constexpr std::size_t kMissionEpisodes = 200;

const fs::path kOut = "acceptance_out";

struct Verdict {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
    verdicts.push_back({id, pass, detail});
    std::cout << fmt::format("criterion {}: {} ({})", id, pass ? "PASS" : "FAIL", detail) << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ---------------------------------------------------------------------

void zoning_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = make_rng(2024);
    std::uniform_int_distribution<std::size_t> count(1, 20);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(0.1, 0.8);
    int uncovered = 0;
    int mismatched = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Vec2> pts(count(rng));
        std::vector<oracle::Pt> raw;
        for (auto& p : pts) {
            p = {coord(rng), coord(rng)};
            raw.push_back({p.x, p.y});
        }
        const auto cfg = MeanShiftConfig{}.with_radius(radius(rng));
        const auto zones = assign_zones(pts, cfg);
        uncovered += zones_cover(zones, pts, cfg.radius) ? 0 : 1;
        const auto got = mean_shift(pts, cfg);
        const auto want =
            oracle::mean_shift(raw, cfg.radius, cfg.shift_tolerance, cfg.max_iterations, cfg.merge_tolerance);
        if (got.size() != want.size()) {
            ++mismatched;
            continue;
        }
        for (std::size_t k = 0; k < got.size(); ++k) {
            worst = std::max({worst, std::abs(got[k].x - want[k].first), std::abs(got[k].y - want[k].second)});
        }
    }
    const double t = seconds_since(t0);
    report(1, uncovered == 0 && mismatched == 0 && worst <= kZoningTol && t < kZoningSeconds,
           fmt::format("500 instances, uncovered {}, center-count mismatches {}, max coordinate error {:.1e}, {:.2f} s",
                       uncovered, mismatched, worst, t));
}

// ---- 2 ---------------------------------------------------------------------

void gradient_check() {
    Rng rng = make_rng(99);
    std::uniform_int_distribution<std::size_t> in_dim(1, 20);
    std::uniform_int_distribution<std::size_t> hidden(1, 64);
    std::uniform_int_distribution<std::size_t> out_dim(1, 4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    int failed = 0;
    for (int n = 0; n < 100; ++n) {
        // The actor set (ReLU hidden, tanh out) and the value set (tanh hidden, linear out).
        const bool relu = n % 2 == 0;
        const std::vector<std::size_t> sizes = n == 0 ? std::vector<std::size_t>{20, 64, 64, 4}
                                                      : std::vector<std::size_t>{in_dim(rng), hidden(rng), hidden(rng),
                                                                                 out_dim(rng)};
        const Mlp net = Mlp::create(sizes, relu ? Activation::Relu : Activation::Tanh,
                                    relu ? Activation::Tanh : Activation::Identity, 1.0, rng);
        Eigen::VectorXd x(static_cast<Eigen::Index>(sizes.front()));
        Eigen::VectorXd up(static_cast<Eigen::Index>(sizes.back()));
        for (auto& v : x) {
            v = u(rng);
        }
        for (auto& v : up) {
            v = u(rng);
        }
        const auto g = backward(net, x, up);
        Mlp probe = net;
        const auto by_params = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& p) {
                probe.set_parameters(p);
                return up.dot(probe.forward(x));
            },
            net.parameters());
        const auto by_input =
            oracle::numeric_gradient([&](const Eigen::VectorXd& xi) { return up.dot(net.forward(xi)); }, x);
        const double err = std::max(oracle::gradient_error(g.params, by_params, kGradRelTol),
                                    oracle::gradient_error(g.input, by_input, kGradRelTol));
        worst = std::max(worst, err);
        failed += err > 1.0 ? 1 : 0;
    }
    report(2, failed == 0,
           fmt::format("100 networks, {} failed, worst error {:.3f} of the 1e-4 relative budget", failed, worst));
}

// ---- 3 ---------------------------------------------------------------------

void algebraic_suite() {
    std::vector<std::string> failures;
    auto expect = [&](const std::string& name, double got, double want) {
        if (!(std::abs(got - want) <= kExactTol)) {
            failures.push_back(fmt::format("{}: {} != {}", name, got, want));
        }
    };

    expect("critic_target", critic_target(1.0, false, 0.99, 2.0), 2.98);
    expect("critic_target done", critic_target(1.5, true, 0.99, 100.0), 1.5);
    expect("critic_target gamma 0", critic_target(-0.25, false, 0.0, 100.0), -0.25);

    DenseLayer l;
    l.weight = Eigen::MatrixXd::Constant(1, 1, 0.0);
    l.bias = Eigen::VectorXd::Zero(1);
    l.activation = Activation::Identity;
    const Mlp zero({l});
    l.weight(0, 0) = 1.0;
    const Mlp one({l});
    expect("soft_update 0.01", soft_update(zero, one, 0.01).layers()[0].weight(0, 0), 0.01);
    expect("soft_update 1", soft_update(zero, one, 1.0).layers()[0].weight(0, 0), 1.0);
    expect("soft_update 0", soft_update(zero, one, 0.0).layers()[0].weight(0, 0), 0.0);

    const auto a = gae(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}, 0.0, {false, false}, 0.99, 0.95);
    expect("gae[0]", a[0], 1.9405);
    expect("gae[1]", a[1], 1.0);
    Rng rng = make_rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> r(n);
        std::vector<double> v(n);
        std::vector<bool> d(n);
        for (std::size_t t = 0; t < n; ++t) {
            r[t] = u(rng);
            v[t] = u(rng);
            d[t] = u(rng) > 0.6;
        }
        const double boot = u(rng);
        const double gamma = 0.5 + 0.5 * std::abs(u(rng));
        const double lambda = std::abs(u(rng));
        const auto got = gae(r, v, boot, d, gamma, lambda);
        const auto want = oracle::gae_double_sum(r, v, boot, d, gamma, lambda);
        for (std::size_t t = 0; t < n; ++t) {
            expect(fmt::format("gae trial {} t {}", trial, t), got[t], want[t]);
        }
    }

    const auto rtg = reward_to_go(std::vector<double>{1, 1, 1}, 0.0, {false, false, true}, 1.0);
    expect("reward_to_go[0]", rtg[0], 3.0);
    expect("reward_to_go[1]", rtg[1], 2.0);
    expect("reward_to_go[2]", rtg[2], 1.0);
    expect("reward_to_go done", reward_to_go(std::vector<double>{2.5}, 9.0, {true}, 0.99)[0], 2.5);

    expect("clip rho=1", clipped_objective(0.0, 0.37, 0.2), 0.37);
    expect("clip rho=1.5 A>0", clipped_objective(std::log(1.5), 1.0, 0.2), 1.2);
    expect("clip rho=0.5 A<0", clipped_objective(std::log(0.5), -1.0, 0.2), -0.8);
    expect("clip rho=0.5 A>0", clipped_objective(std::log(0.5), 1.0, 0.2), 0.5);
    expect("clip rho=1.5 A<0", clipped_objective(std::log(1.5), -1.0, 0.2), -1.5);

    RewardParams p;
    const std::vector<Target> t1{{{0.3, 0.4}, false}};
    expect("r1 at target", target_distance_reward(t1, std::vector<Vec2>{{0.3, 0.4}}, p), 0.0);
    expect("r1 at 0.5", target_distance_reward(t1, std::vector<Vec2>{{0, 0}}, p), -0.5);
    const std::vector<Target> t3{{{0, 0}, false}, {{1, 1}, false}, {{-0.5, 0.5}, false}};
    expect("r1 three targets",
           target_distance_reward(t3, std::vector<Vec2>{{0, 0}, {1, 1}, {-0.5, 1.2}}, p), -0.7);
    const std::vector<Target> done{{{0.3, 0.4}, true}};
    expect("r1 reached", target_distance_reward(done, std::vector<Vec2>{{0, 0}}, p), 0.0);
    expect("penalty at delta+sigma", pair_penalty(0.3, 0.1, 0.2, 1.0), 0.0);
    expect("penalty at delta", pair_penalty(0.1, 0.1, 0.2, 1.0), -1.0);
    expect("penalty midway", pair_penalty(0.2, 0.1, 0.2, 1.0), -0.5);
    expect("penalty at 0", pair_penalty(0.0, 0.1, 0.2, 1.0), -1.0);
    expect("return not reached", return_reward(false, 0.7, p), -1.0);
    expect("return home", return_reward(true, 0.0, p), 0.0);
    expect("return at 0.3", return_reward(true, 0.3, p), -0.3);

    std::string detail = fmt::format("{} checks failed", failures.size());
    if (!failures.empty()) {
        detail += "; first: " + failures.front();
    }
    report(3, failures.empty(), detail);
}

// ---- 4, 5, 7 ---------------------------------------------------------------

struct Training {
    PhaseResult maddpg;
    PhaseResult mappo;
};

double initial(const std::vector<CurveRow>& c) { return mean_return(c, 0, kWindow); }
double last(const std::vector<CurveRow>& c) { return mean_return(c, c.size() - kWindow, kWindow); }
double before_last(const std::vector<CurveRow>& c) { return mean_return(c, c.size() - 2 * kWindow, kWindow); }

ExperimentConfig desk(Algorithm algo) {
    ExperimentConfig c = preset_config("desk");
    c.seed = 1;
    c.algorithm = algo;
    c.maddpg.episodes = kTrainEpisodes;
    c.mappo.episodes = kTrainEpisodes;
    return c;
}

void convergence(const Training& t) {
    const auto& c = t.maddpg.curve;
    const double first = initial(c);
    const double end = last(c);
    const double gap = -first;
    const double closed = (end - first) / gap;
    const double drift = std::abs(end - before_last(c)) / gap;
    report(4, closed >= kGapFraction && drift <= kPlateauFraction,
           fmt::format("MADDPG first-500 mean {:.2f}, last-500 mean {:.2f}, gap closed {:.1f}% (need {:.0f}%), "
                       "last-window drift {:.1f}% of gap (need <= {:.0f}%)",
                       first, end, 100 * closed, 100 * kGapFraction, 100 * drift, 100 * kPlateauFraction));
}

void ordering(const Training& t) {
    const double d = last(t.maddpg.curve);
    const double p = last(t.mappo.curve);
    report(5, d >= p, fmt::format("last-500 mean return: MADDPG {:.2f}, MAPPO {:.2f}", d, p));
}

void ablation(const PolicySet& ugv) {
    ExperimentConfig config = desk(Algorithm::Maddpg);
    UgvTrainingEnv env(phase_world(config, Phase::Ugv), config.reward);
    auto demos = std::make_shared<const DemoLog>(record_demos(env, ugv, config.demo_episodes, config.seed));
    const auto uav = train_phase(config, Phase::Uav, demos);
    write_learning_curve(uav.curve, kOut / "uav_maddpg_curve.csv");

    TrainedModels models{ugv, uav.policy};
    std::vector<MetricRow> rows;
    double rate[2] = {0.0, 0.0};
    double acc[2] = {0.0, 0.0};
    int k = 0;
    for (auto mode : {MissionMode::Zoned, MissionMode::NoZoning}) {
        EvaluationSetup setup = config.evaluation;
        setup.mode = mode;
        setup.scenario.n_targets = 8;
        setup.scenario.n_clusters = 2;
        const auto outcomes = evaluate_missions(setup, models, kMissionEpisodes, 11);
        std::vector<EpisodeRecord> recs;
        for (const auto& o : outcomes) {
            recs.push_back(o.aggregate);
        }
        rate[k] = completion_rate(recs);
        acc[k] = accuracy(recs);
        const auto s = summarize(fmt::format("maddpg-{}", to_string(mode)), "targets=8;clusters=2", recs);
        rows.insert(rows.end(), s.begin(), s.end());
        ++k;
    }
    write_metric_table(rows, kOut / "ablation_metrics.csv");
    report(7, rate[0] >= rate[1],
           fmt::format("{} episodes, completion rate zoned {:.3f} vs no-zoning {:.3f} (accuracy {:.1f}% vs {:.1f}%)",
                       kMissionEpisodes, rate[0], rate[1], acc[0], acc[1]));
}

// ---- 6 ---------------------------------------------------------------------

void bookkeeping() {
    const auto rs = fixture::all();
    std::vector<std::string> bad;
    auto expect = [&](const std::string& name, double got, double want) {
        if (got != want) {
            bad.push_back(fmt::format("{} {} != {}", name, got, want));
        }
    };
    expect("completion_rate", completion_rate(rs), fixture::kCompletion);
    expect("collisions_per_1k", collisions_per_1k(rs), fixture::kCollisionsPer1k);
    expect("mean_steps", mean_steps(rs), fixture::kMeanSteps);
    expect("mean_steps_completed", mean_steps_completed(rs), fixture::kMeanStepsCompleted);
    expect("accuracy", accuracy(rs), fixture::kAccuracy);
    expect("completion_time", completion_time(rs), fixture::kCompletionTime);
    const auto planted = fixture::planted();
    for (std::size_t e = 0; e < rs.size(); ++e) {
        if (check_constraints(rs[e]).violated() != planted[e]) {
            bad.push_back(fmt::format("episode {} violation set differs", e));
        }
    }
    report(6, bad.empty(), bad.empty() ? "4 scripted episodes, 6 metrics and 4 violation sets exact"
                                       : fmt::format("{} mismatches; first: {}", bad.size(), bad.front()));
}

// ---- 8 ---------------------------------------------------------------------

int cli(const std::string& args) {
    const std::string cmd = std::string("\"") + COALAB_CLI_PATH + "\" -q " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism() {
    const fs::path root = kOut / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "short.cfg";
    std::ofstream(cfg) << "preset = desk\nseed = 7\ntrain.demo_episodes = 20\nmappo.batch_episodes = 10\n";
    const std::string base = "--config \"" + cfg.string() + "\"";
    int failures = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path out = root / run;
        const std::string o = " --no-plots --out \"" + out.string() + "\"";
        failures += cli("train " + base + " --phase ugv --episodes 60" + o) != 0;
        failures += cli("train " + base + " --phase uav --episodes 60" + o) != 0;
        failures += cli("train " + base + " --phase ugv --algo mappo --episodes 60 --out \"" +
                        (out / "mappo").string() + "\" --no-plots") != 0;
        failures += cli("evaluate --run \"" + (out / "ugv").string() + "\" --episodes 20") != 0;
        failures += cli("evaluate --run \"" + (out / "uav").string() + "\" --episodes 20") != 0;
        failures += cli("mission " + base + " --models \"" + out.string() + "\" --episodes 10 --name mission" + o) != 0;
    }
    std::size_t compared = 0;
    std::size_t differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (entry.path().extension() != ".csv") {
            continue;
        }
        const fs::path twin = root / "b" / fs::relative(entry.path(), root / "a");
        ++compared;
        differing += slurp(entry.path()) == slurp(twin) ? 0 : 1;
    }
    report(8, failures == 0 && differing == 0 && compared >= 10,
           fmt::format("{} command failures, {} CSV files compared across two runs, {} differ", failures, compared,
                       differing));
}

}  // namespace

int main() {
    fs::create_directories(kOut);
    const auto t0 = std::chrono::steady_clock::now();

    zoning_oracle();
    gradient_check();
    algebraic_suite();

    Training t;
    auto train = [](Algorithm algo) {
        const auto c = desk(algo);
        auto r = train_phase(c, Phase::Ugv, nullptr);
        write_learning_curve(r.curve, kOut / fmt::format("ugv_{}_curve.csv", to_string(algo)));
        return r;
    };
    t.maddpg = train(Algorithm::Maddpg);
    convergence(t);
    t.mappo = train(Algorithm::Mappo);
    ordering(t);

    bookkeeping();
    ablation(t.maddpg.policy);
    determinism();

    std::cout << "criterion 9: NOT REPRODUCIBLE (declared: the absolute completion, accuracy and baseline-efficiency "
                 "figures need the full training budget and an unreleased baseline; not checked)"
              << std::endl;

    int failed = 0;
    for (const auto& v : verdicts) {
        failed += v.pass ? 0 : 1;
    }
    std::cout << fmt::format("{} of {} checked criteria passed in {:.0f} s", verdicts.size() - failed,
                             verdicts.size(), seconds_since(t0))
              << std::endl;
    return failed == 0 ? 0 : 1;
}

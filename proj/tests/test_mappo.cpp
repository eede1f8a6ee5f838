#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "coalab/mappo.hpp"
#include "oracles.hpp"

using namespace coalab;

namespace {

std::vector<double> uniform(Rng& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = u(rng);
        }
    }
    return m;
}

MappoConfig small_config() {
    MappoConfig c;
    c.episodes = 10;
    c.batch_episodes = 5;
    c.steps_per_episode = 20;
    c.hidden = 16;
    c.epochs_per_batch = 2;
    return c;
}

WorldConfig desk_world() {
    WorldConfig w;
    w.max_steps = 20;
    return w;
}

}  // namespace

TEST_CASE("gae examples") {
    const std::vector<double> r{1.0, 1.0};
    const std::vector<double> v{0.0, 0.0};
    const auto a = gae(r, v, 0.0, {false, false}, 0.99, 0.95);
    CHECK(a[1] == 1.0);
    CHECK(a[0] == doctest::Approx(1.9405).epsilon(1e-15));

    Rng rng = make_rng(1);
    const auto rr = uniform(rng, 6, -1, 1);
    const auto vv = uniform(rng, 6, -1, 1);
    const std::vector<bool> d{false, false, true, false, false, false};
    const auto l0 = gae(rr, vv, 0.4, d, 0.9, 0.0);
    for (std::size_t t = 0; t < 6; ++t) {
        const double next = t + 1 < 6 ? vv[t + 1] : 0.4;
        CHECK(l0[t] == doctest::Approx(rr[t] + 0.9 * (d[t] ? 0.0 : next) - vv[t]).epsilon(1e-15));
    }
    const auto g0 = gae(rr, vv, 0.4, d, 0.0, 0.95);
    for (std::size_t t = 0; t < 6; ++t) {
        CHECK(g0[t] == rr[t] - vv[t]);
    }
    CHECK_THROWS_AS(gae(rr, std::vector<double>{1.0}, 0.0, d, 0.9, 0.9), std::invalid_argument);
}

TEST_CASE("gae equals the double-sum definition") {
    Rng rng = make_rng(2);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = len(rng);
        const auto r = uniform(rng, n, -2, 2);
        const auto v = uniform(rng, n, -2, 2);
        std::vector<bool> d(n);
        for (std::size_t t = 0; t < n; ++t) {
            d[t] = coin(rng);
        }
        const double boot = uniform(rng, 1, -2, 2)[0];
        const double gamma = uniform(rng, 1, 0.5, 1.0)[0];
        const double lambda = uniform(rng, 1, 0.01, 1.0)[0];
        const auto got = gae(r, v, boot, d, gamma, lambda);
        const auto want = oracle::gae_double_sum(r, v, boot, d, gamma, lambda);
        for (std::size_t t = 0; t < n; ++t) {
            REQUIRE(std::abs(got[t] - want[t]) <= 1e-12);
        }
    }
}

TEST_CASE("reward_to_go examples") {
    CHECK(reward_to_go(std::vector<double>{2.5}, 9.0, {true}, 0.99)[0] == 2.5);
    const auto r = reward_to_go(std::vector<double>{1, 1, 1}, 0.0, {false, false, true}, 1.0);
    CHECK(r == std::vector<double>{3, 2, 1});
}

TEST_CASE("reward_to_go equals advantage plus value when lambda is one") {
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto r = uniform(rng, 8, -1, 1);
        const auto v = uniform(rng, 8, -1, 1);
        std::vector<bool> d(8, false);
        d[trial % 8] = trial % 3 == 0;
        const auto a = gae(r, v, 0.7, d, 0.95, 1.0);
        const auto ret = reward_to_go(r, 0.7, d, 0.95);
        for (std::size_t t = 0; t < 8; ++t) {
            CHECK(ret[t] == doctest::Approx(a[t] + v[t]).epsilon(1e-12));
        }
    }
}

TEST_CASE("clipped_objective case table") {
    CHECK(clipped_objective(0.0, 0.37, 0.2) == 0.37);
    CHECK(clipped_objective(std::log(1.5), 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(clipped_objective(std::log(0.5), -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(clipped_objective(std::log(0.5), 1.0, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(clipped_objective(std::log(1.5), -1.0, 0.2) == doctest::Approx(-1.5).epsilon(1e-15));
}

TEST_CASE("clipped_objective never exceeds the unclipped surrogate") {
    Rng rng = make_rng(4);
    std::uniform_real_distribution<double> lr(-2.0, 2.0);
    std::uniform_real_distribution<double> adv(-5.0, 5.0);
    std::uniform_real_distribution<double> eps(0.01, 1.0);
    for (int k = 0; k < 100'000; ++k) {
        const double l = lr(rng);
        const double a = adv(rng);
        REQUIRE(clipped_objective(l, a, eps(rng)) <= std::exp(l) * a + 1e-15);
    }
}

TEST_CASE("clipped_objective_grad matches a numerical derivative off the kinks") {
    Rng rng = make_rng(5);
    std::uniform_real_distribution<double> lr(-1.0, 1.0);
    std::uniform_real_distribution<double> adv(-3.0, 3.0);
    for (int k = 0; k < 2000; ++k) {
        const double l = lr(rng);
        const double a = adv(rng);
        const double rho = std::exp(l);
        if (std::abs(rho - 0.8) < 1e-3 || std::abs(rho - 1.2) < 1e-3) {
            continue;
        }
        const double h = 1e-6;
        const double num = (clipped_objective(l + h, a, 0.2) - clipped_objective(l - h, a, 0.2)) / (2 * h);
        CHECK(clipped_objective_grad(l, a, 0.2) == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("gaussian density integrates to one") {
    Rng rng = make_rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mu = uniform(rng, 1, -1, 1)[0];
        const auto ls = uniform(rng, 1, -1.5, 0.5)[0];
        const double sd = std::exp(ls);
        const int n = 20000;
        const double lo = mu - 10 * sd;
        const double dx = 20 * sd / n;
        double total = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double x = lo + k * dx;
            const double w = (k == 0 || k == n) ? 0.5 : 1.0;
            total += w * std::exp(gaussian_log_prob(Eigen::VectorXd::Constant(1, mu), Eigen::VectorXd::Constant(1, ls),
                                                    Eigen::VectorXd::Constant(1, x)));
        }
        CHECK(total * dx == doctest::Approx(1.0).epsilon(1e-8));
    }
    CHECK(gaussian_entropy(Eigen::VectorXd::Zero(1)) ==
          doctest::Approx(0.5 * (1.0 + std::log(2.0 * std::numbers::pi))));
}

TEST_CASE("popart examples") {
    PopArtState off;
    off.enabled = false;
    const std::vector<double> t{1.0, -3.0, 7.5};
    CHECK(popart_update_and_normalize(off, t) == t);

    PopArtState c;
    std::vector<double> last;
    for (int k = 0; k < 200; ++k) {
        last = popart_update_and_normalize(c, std::vector<double>(16, 4.2));
    }
    CHECK(c.variance() == doctest::Approx(c.variance_floor).epsilon(1e-3));
    for (double x : last) {
        CHECK(std::abs(x) <= 1e-3);
    }

    PopArtState s;
    s.beta = 0.99;
    Rng rng = make_rng(7);
    std::normal_distribution<double> nd(5.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        std::vector<double> batch(64);
        for (auto& x : batch) {
            x = nd(rng);
        }
        popart_update_and_normalize(s, batch);
    }
    CHECK(std::abs(s.mean() - 5.0) <= 0.1);
    CHECK(std::abs(s.stddev() - 1.0) <= 0.1);
}

TEST_CASE("popart_preserve_outputs keeps denormalized values") {
    Rng rng = make_rng(8);
    DenseLayer head;
    head.weight = uniform_matrix(rng, 1, 4);
    head.bias = Eigen::VectorXd::Constant(1, 0.3);
    const Eigen::VectorXd h = uniform_matrix(rng, 4, 1);
    const double before = (head.weight * h + head.bias)[0] * 2.0 + 1.0;
    popart_preserve_outputs(head, 1.0, 2.0, -0.5, 0.7);
    const double after = (head.weight * h + head.bias)[0] * 0.7 - 0.5;
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
    CHECK_THROWS_AS(popart_preserve_outputs(head, 0, 0, 0, 1), std::invalid_argument);
}

TEST_CASE("value-loss gradient matches finite differences") {
    Rng rng = make_rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t sizes[] = {5, 12, 12, 1};
        const auto net = Mlp::create(sizes, Activation::Tanh, Activation::Identity, 1.0, rng);
        const Eigen::MatrixXd states = uniform_matrix(rng, 5, 7);
        const auto targets = uniform(rng, 7, -2, 2);
        const auto vl = value_loss_and_grad(net, states, targets);
        Mlp probe = net;
        const auto num = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& p) {
                probe.set_parameters(p);
                return value_loss_and_grad(probe, states, targets).loss;
            },
            net.parameters());
        CHECK(oracle::gradient_error(vl.grad, num) <= 1.0);
    }
}

TEST_CASE("policy-loss gradient matches finite differences") {
    Rng rng = make_rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t sizes[] = {4, 10, 10, 2};
        const auto net = Mlp::create(sizes, Activation::Tanh, Activation::Identity, 1.0, rng);
        const Eigen::VectorXd log_std = uniform_matrix(rng, 2, 1) * 0.3;
        const Eigen::MatrixXd obs = uniform_matrix(rng, 4, 6);
        const Eigen::MatrixXd act = uniform_matrix(rng, 2, 6);
        const auto adv = uniform(rng, 6, -1, 1);
        std::vector<double> old(6);
        for (int c = 0; c < 6; ++c) {
            old[c] = gaussian_log_prob(net.forward(obs.col(c)), log_std, act.col(c)) + uniform(rng, 1, -0.5, 0.5)[0];
        }
        const auto pl = policy_loss_and_grad(net, log_std, obs, act, old, adv, 1e6, 0.01);
        Mlp probe = net;
        const auto num = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& p) {
                probe.set_parameters(p);
                return policy_loss_and_grad(probe, log_std, obs, act, old, adv, 1e6, 0.01).loss;
            },
            net.parameters());
        CHECK(oracle::gradient_error(pl.grad_params, num) <= 1.0);
        const auto num_std = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& ls) { return policy_loss_and_grad(net, ls, obs, act, old, adv, 1e6, 0.01).loss; },
            log_std);
        CHECK(oracle::gradient_error(pl.grad_log_std, num_std) <= 1.0);
    }
}

TEST_CASE("with a huge epsilon the surrogate gradient is the vanilla policy gradient") {
    Rng rng = make_rng(11);
    const std::size_t sizes[] = {3, 8, 2};
    const auto net = Mlp::create(sizes, Activation::Tanh, Activation::Identity, 1.0, rng);
    const Eigen::VectorXd log_std = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd obs = uniform_matrix(rng, 3, 5);
    const Eigen::MatrixXd act = uniform_matrix(rng, 2, 5);
    const auto adv = uniform(rng, 5, -1, 1);
    std::vector<double> old(5);
    Eigen::VectorXd vanilla = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    for (int c = 0; c < 5; ++c) {
        const Eigen::VectorXd mu = net.forward(obs.col(c));
        old[c] = gaussian_log_prob(mu, log_std, act.col(c));
        // d log pi / d mu = (u - mu) / sigma^2 with sigma = 1.
        vanilla += adv[c] * backward(net, obs.col(c), act.col(c) - mu).params / 5.0;
    }
    const auto pl = policy_loss_and_grad(net, log_std, obs, act, old, adv, 1e9, 0.0);
    CHECK((-pl.grad_params).isApprox(vanilla, 1e-12));
    CHECK(pl.clip_fraction == 0.0);
}

TEST_CASE("rollout buffer length check") {
    RolloutBuffer b;
    b.states.push_back(Eigen::VectorXd::Zero(2));
    b.observations.push_back(Eigen::VectorXd::Zero(1));
    b.actions.push_back(Eigen::VectorXd::Zero(2));
    b.log_probs.push_back(0.0);
    b.rewards.push_back(0.0);
    b.values.push_back(0.0);
    b.dones.push_back(false);
    CHECK_NOTHROW(b.check());
    CHECK_FALSE(b.finalized());
    b.advantages.push_back(0.0);
    b.returns.push_back(0.0);
    CHECK(b.finalized());
    b.rewards.push_back(1.0);
    CHECK_THROWS_AS(b.check(), std::logic_error);
}

TEST_CASE("mappo training is deterministic and logs its returns") {
    const auto c = small_config();
    UgvTrainingEnv a_env(desk_world(), RewardParams{});
    UgvTrainingEnv b_env(desk_world(), RewardParams{});
    std::vector<double> sums(c.episodes, 0.0);
    TrainHooks hooks;
    hooks.on_step = [&](const StepLog& s) { sums[s.episode] += s.team_reward; };
    const auto a = train_mappo(a_env, c, 5, hooks);
    const auto b = train_mappo(b_env, c, 5);
    REQUIRE(a.curve.size() == c.episodes);
    CHECK(a.updates == 4);
    for (std::size_t e = 0; e < a.curve.size(); ++e) {
        CHECK(a.curve[e].episode_return == b.curve[e].episode_return);
        CHECK(sums[e] == a.curve[e].episode_return);
    }
    CHECK(a.policy.actors[0] == b.policy.actors[0]);
    CHECK(a.policy.algorithm == Algorithm::Mappo);
}

TEST_CASE("mappo config validation") {
    MappoConfig c;
    CHECK_NOTHROW(c.validate());
    c.gae_lambda = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = MappoConfig{};
    c.clip_epsilon = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

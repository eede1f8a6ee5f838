#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "coalab/neural.hpp"
#include "oracles.hpp"

using namespace coalab;

namespace {

Mlp scalar_net(double w, double b, Activation a) {
    DenseLayer l;
    l.weight = Eigen::MatrixXd::Constant(1, 1, w);
    l.bias = Eigen::VectorXd::Constant(1, b);
    l.activation = a;
    return Mlp({l});
}

Mlp random_net(Rng& rng, std::vector<std::size_t> sizes, Activation hidden, Activation out) {
    return Mlp::create(sizes, hidden, out, 1.0, rng);
}

Eigen::VectorXd random_vec(Rng& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = u(rng);
    }
    return v;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "coalab_test_neural";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("forward examples") {
    Rng rng = make_rng(1);
    auto zero = random_net(rng, {3, 5, 2}, Activation::Tanh, Activation::Identity);
    zero.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(zero.parameter_count())));
    CHECK(zero.forward(Eigen::Vector3d(1, 2, 3)).isZero(0.0));

    const auto t = scalar_net(1.0, 0.0, Activation::Tanh);
    for (double x : {-3.0, -0.2, 0.0, 0.7, 5.0}) {
        CHECK(t.forward(Eigen::VectorXd::Constant(1, x))[0] == std::tanh(x));
    }

    const auto net = random_net(rng, {4, 7, 3}, Activation::Relu, Activation::Tanh);
    CHECK(net.forward(random_vec(rng, 4)).size() == 3);
    CHECK_THROWS_AS((void)net.forward(random_vec(rng, 5)), std::invalid_argument);
}

TEST_CASE("Mlp rejects layers that do not chain") {
    DenseLayer a;
    a.weight = Eigen::MatrixXd::Zero(3, 2);
    a.bias = Eigen::VectorXd::Zero(3);
    DenseLayer b;
    b.weight = Eigen::MatrixXd::Zero(1, 4);
    b.bias = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(Mlp({a, b}), std::invalid_argument);
}

TEST_CASE("backward examples") {
    Rng rng = make_rng(2);
    const auto net = random_net(rng, {3, 6, 2}, Activation::Tanh, Activation::Identity);
    const auto g = backward(net, random_vec(rng, 3), Eigen::VectorXd::Zero(2));
    CHECK(g.params.isZero(0.0));
    CHECK(g.input.isZero(0.0));

    const auto lin = scalar_net(1.7, -0.4, Activation::Identity);
    const auto s = backward(lin, Eigen::VectorXd::Constant(1, 0.6), Eigen::VectorXd::Constant(1, 1.0));
    CHECK(s.params[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(s.params[1] == 1.0);
    CHECK(s.input[0] == doctest::Approx(1.7).epsilon(1e-15));
}

TEST_CASE("backward matches central differences on random networks") {
    Rng rng = make_rng(3);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    for (int trial = 0; trial < 30; ++trial) {
        const bool relu = trial % 2 == 0;
        const auto net = random_net(rng, {dim(rng), dim(rng) * 4, dim(rng) * 4, dim(rng)},
                                    relu ? Activation::Relu : Activation::Tanh,
                                    relu ? Activation::Tanh : Activation::Identity);
        const auto x = random_vec(rng, static_cast<Eigen::Index>(net.input_size()));
        const auto up = random_vec(rng, static_cast<Eigen::Index>(net.output_size()));
        const auto g = backward(net, x, up);

        Mlp probe = net;
        const auto by_params = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& p) {
                probe.set_parameters(p);
                return up.dot(probe.forward(x));
            },
            net.parameters());
        CHECK(oracle::gradient_error(g.params, by_params) <= 1.0);

        const auto by_input =
            oracle::numeric_gradient([&](const Eigen::VectorXd& xi) { return up.dot(net.forward(xi)); }, x);
        CHECK(oracle::gradient_error(g.input, by_input) <= 1.0);
    }
}

TEST_CASE("batched backward sums single-sample gradients") {
    Rng rng = make_rng(4);
    const auto net = random_net(rng, {3, 8, 2}, Activation::Tanh, Activation::Tanh);
    Eigen::MatrixXd xs(3, 5);
    Eigen::MatrixXd ups(2, 5);
    Eigen::VectorXd want = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    for (int c = 0; c < 5; ++c) {
        xs.col(c) = random_vec(rng, 3);
        ups.col(c) = random_vec(rng, 2);
        want += backward(net, xs.col(c), ups.col(c)).params;
    }
    MlpTape tape;
    const Eigen::MatrixXd out = net.forward_batch(xs, &tape);
    CHECK(out.col(2).isApprox(net.forward(xs.col(2)), 1e-14));
    CHECK(net.backward_batch(tape, ups).isApprox(want, 1e-12));
}

TEST_CASE("parameters round-trip through set_parameters") {
    Rng rng = make_rng(5);
    auto net = random_net(rng, {2, 4, 1}, Activation::Relu, Activation::Identity);
    CHECK(net.parameter_count() == 2 * 4 + 4 + 4 + 1);
    const auto p = random_vec(rng, static_cast<Eigen::Index>(net.parameter_count()));
    net.set_parameters(p);
    CHECK(net.parameters() == p);
    CHECK_THROWS_AS(net.set_parameters(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("create scales the output layer by the gain") {
    Rng rng = make_rng(6);
    const std::vector<std::size_t> sizes{10, 64, 2};
    const auto net = Mlp::create(sizes, Activation::Relu, Activation::Tanh, 0.01, rng);
    const double hidden_bound = 1.0 / std::sqrt(10.0);
    const double out_bound = 0.01 / std::sqrt(64.0);
    CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= hidden_bound);
    CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= out_bound);
    CHECK(net.layers()[1].bias.isZero(0.0));
}

TEST_CASE("adam_step examples") {
    Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
    const Eigen::VectorXd keep = p;
    auto st = AdamState::for_size(4, 0.01);
    adam_step(p, Eigen::VectorXd::Zero(4), st);
    CHECK(p == keep);
    CHECK(st.timestep == 1);

    st = AdamState::for_size(4, 0.01);
    adam_step(p, Eigen::VectorXd::Constant(4, 3.0), st);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(keep[i] - p[i] == doctest::Approx(0.01).epsilon(1e-6));
    }

    Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
    bad[2] = std::nan("");
    CHECK_THROWS_AS(adam_step(p, bad, st), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(p, Eigen::VectorXd::Zero(3), st), std::invalid_argument);
}

TEST_CASE("adam moments stay finite over a million bounded steps") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
    auto st = AdamState::for_size(2, 1e-3);
    Eigen::VectorXd g(2);
    for (int k = 0; k < 1'000'000; ++k) {
        g << ((k % 3) - 1.0), std::sin(k * 0.001);
        adam_step(p, g, st);
    }
    CHECK(st.first_moment.allFinite());
    CHECK(st.second_moment.allFinite());
    CHECK(p.allFinite());
}

TEST_CASE("clip_grad_norm") {
    Eigen::VectorXd g(2);
    g << 3.0, 4.0;
    CHECK(clip_grad_norm(g, 1.0) == 5.0);
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-15));
    g << 0.3, 0.4;
    clip_grad_norm(g, 1.0);
    CHECK(g[0] == 0.3);
    g << 30.0, 40.0;
    clip_grad_norm(g, 0.0);
    CHECK(g[1] == 40.0);
}

TEST_CASE("soft_update examples") {
    Rng rng = make_rng(7);
    const auto target = random_net(rng, {3, 4, 2}, Activation::Relu, Activation::Tanh);
    const auto online = random_net(rng, {3, 4, 2}, Activation::Relu, Activation::Tanh);
    CHECK(soft_update(target, online, 1.0) == online);
    CHECK(soft_update(target, online, 0.0) == target);

    const auto one = scalar_net(1.0, 0.0, Activation::Identity);
    const auto zero = scalar_net(0.0, 0.0, Activation::Identity);
    CHECK(soft_update(zero, one, 0.01).layers()[0].weight(0, 0) == doctest::Approx(0.01).epsilon(1e-15));

    const auto other = random_net(rng, {3, 5, 2}, Activation::Relu, Activation::Tanh);
    CHECK_THROWS_AS(soft_update(target, other, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(soft_update(target, online, 1.5), std::invalid_argument);
}

TEST_CASE("soft_update converges geometrically") {
    Rng rng = make_rng(8);
    auto target = random_net(rng, {2, 6, 1}, Activation::Tanh, Activation::Identity);
    const auto online = random_net(rng, {2, 6, 1}, Activation::Tanh, Activation::Identity);
    const double tau = 0.05;
    const double d0 = (target.parameters() - online.parameters()).norm();
    for (int k = 1; k <= 200; ++k) {
        target = soft_update(target, online, tau);
        const double dk = (target.parameters() - online.parameters()).norm();
        CHECK(dk == doctest::Approx(std::pow(1.0 - tau, k) * d0).epsilon(1e-9));
    }
}

TEST_CASE("save and load round-trip bit for bit") {
    Rng rng = make_rng(9);
    auto net = random_net(rng, {5, 9, 3}, Activation::Relu, Activation::Tanh);
    auto p = net.parameters();
    p[0] = -0.0;
    p[1] = 1e-310;
    p[2] = std::nextafter(1.0, 2.0);
    net.set_parameters(p);
    const auto path = scratch("net.mlp");
    save_mlp(net, path, 42);
    const auto back = load_mlp(path);
    CHECK(back == net);
    CHECK(std::signbit(back.parameters()[0]));
    auto side = path;
    side += ".manifest";
    CHECK(std::filesystem::exists(side));
}

TEST_CASE("load reports truncated files and version mismatches") {
    Rng rng = make_rng(10);
    const auto net = random_net(rng, {2, 3, 1}, Activation::Tanh, Activation::Identity);
    const auto path = scratch("cut.mlp");
    save_mlp(net, path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 5);
    CHECK_THROWS_WITH_AS(load_mlp(path), doctest::Contains("truncated"), std::runtime_error);

    save_mlp(net, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        f.put(static_cast<char>(99));
    }
    CHECK_THROWS_WITH_AS(load_mlp(path), doctest::Contains("version"), std::runtime_error);

    {
        std::ofstream f(path, std::ios::binary);
        f << "not a network";
    }
    CHECK_THROWS_AS(load_mlp(path), std::runtime_error);
    CHECK_THROWS(load_mlp(scratch("missing.mlp")));
}

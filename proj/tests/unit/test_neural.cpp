#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "riscell/neural.hpp"

using namespace riscell;
using nn::Matrix;
using nn::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, RandomStream& rng, double lo = -1.0,
                     double hi = 1.0) {
    std::uniform_real_distribution<double> unit(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unit(rng);
    return m;
}

}  // namespace

TEST_CASE("initialization") {
    RandomStream rng(7);
    const auto net = nn::make_net({4, 128, 128, 3}, rng);
    CHECK(net.num_layers() == 3);
    CHECK(net.dims == std::vector<int>{4, 128, 128, 3});
    for (const auto& b : net.biases) CHECK(b.isZero());

    SUBCASE("deterministic per seed") {
        RandomStream a(42), b(42);
        const auto na = nn::make_net({3, 8, 2}, a);
        const auto nb = nn::make_net({3, 8, 2}, b);
        CHECK(nn::same_params(na, nb));
    }
    SUBCASE("at least input and output dims") {
        RandomStream r(1);
        CHECK_THROWS_AS(nn::make_net({5}, r), ConfigError);
    }
}

TEST_CASE("forward") {
    RandomStream rng(3);

    SUBCASE("zero parameters give zero output") {
        auto net = nn::make_net({3, 4, 2}, rng);
        for (auto& w : net.weights) w.setZero();
        Matrix x = random_matrix(5, 3, rng);
        CHECK(nn::forward(net, x).isZero());
    }

    SUBCASE("simplex head rows sum to one and stay positive") {
        auto net = nn::make_net({6, 16, 5}, rng, nn::InitScheme::HeNormal, nn::Head::Softmax);
        Matrix x = random_matrix(9, 6, rng, -3.0, 3.0);
        const Matrix p = nn::forward(net, x);
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(p.row(r).minCoeff() > 0.0);
        }
    }

    SUBCASE("identity-like single layer reproduces its input") {
        auto net = nn::make_net({3, 3}, rng);
        net.weights[0].setIdentity();
        net.biases[0].setZero();
        Matrix x = random_matrix(4, 3, rng);
        CHECK((nn::forward(net, x) - x).cwiseAbs().maxCoeff() < 1e-15);
    }

    SUBCASE("width mismatch and non-finite input are rejected") {
        auto net = nn::make_net({3, 2}, rng);
        Matrix bad(1, 4);
        bad.setZero();
        CHECK_THROWS_AS(nn::forward(net, bad), DimensionError);
        Matrix nan(1, 3);
        nan.setConstant(std::numeric_limits<double>::quiet_NaN());
        CHECK_THROWS_AS(nn::forward(net, nan), NumericError);
    }
}

TEST_CASE("backward") {
    RandomStream rng(11);

    SUBCASE("constant loss gives zero gradients") {
        auto net = nn::make_net({4, 8, 3}, rng);
        Matrix x = random_matrix(6, 4, rng);
        nn::ForwardTrace trace;
        nn::forward(net, x, &trace);
        const auto g = nn::backward(net, trace, Matrix::Zero(6, 3));
        CHECK(g.squared_norm() == doctest::Approx(0.0));
    }

    SUBCASE("gradients scale linearly with the loss") {
        auto net = nn::make_net({4, 8, 3}, rng);
        Matrix x = random_matrix(6, 4, rng);
        Matrix w = random_matrix(6, 3, rng);
        nn::ForwardTrace trace;
        nn::forward(net, x, &trace);
        const auto g1 = nn::backward(net, trace, w);
        const auto g2 = nn::backward(net, trace, 2.0 * w);
        for (size_t l = 0; l < g1.weights.size(); ++l) {
            CHECK((g2.weights[l] - 2.0 * g1.weights[l]).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("agrees with central finite differences, linear head") {
        auto net = nn::make_net({5, 7, 4, 2}, rng);
        Matrix x = random_matrix(3, 5, rng);
        Matrix w = random_matrix(3, 2, rng);
        nn::ForwardTrace trace;
        nn::forward(net, x, &trace);
        const auto grads = nn::backward(net, trace, w);
        auto loss = [&]() { return (nn::forward(net, x).array() * w.array()).sum(); };

        const double h = 1e-5;
        for (int l = 0; l < net.num_layers(); ++l) {
            auto& weights = net.weights[static_cast<size_t>(l)];
            for (int probe = 0; probe < 6; ++probe) {
                const Eigen::Index r = (probe * 3) % weights.rows();
                const Eigen::Index c = (probe * 5) % weights.cols();
                const double keep = weights(r, c);
                weights(r, c) = keep + h;
                const double up = loss();
                weights(r, c) = keep - h;
                const double down = loss();
                weights(r, c) = keep;
                const double fd = (up - down) / (2.0 * h);
                const double an = grads.weights[static_cast<size_t>(l)](r, c);
                CHECK(std::abs(fd - an) <= 1e-4 * std::max({1.0, std::abs(fd), std::abs(an)}));
            }
            auto& biases = net.biases[static_cast<size_t>(l)];
            const Eigen::Index r = l % biases.size();
            const double keep = biases(r);
            biases(r) = keep + h;
            const double up = loss();
            biases(r) = keep - h;
            const double down = loss();
            biases(r) = keep;
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(fd - grads.biases[static_cast<size_t>(l)](r)) <=
                  1e-4 * std::max(1.0, std::abs(fd)));
        }
    }

    SUBCASE("agrees with central finite differences, simplex head") {
        auto net = nn::make_net({4, 6, 3}, rng, nn::InitScheme::HeNormal, nn::Head::Softmax);
        Matrix x = random_matrix(2, 4, rng);
        Matrix w = random_matrix(2, 3, rng);
        nn::ForwardTrace trace;
        nn::forward(net, x, &trace);
        const auto grads = nn::backward(net, trace, w);
        auto loss = [&]() { return (nn::forward(net, x).array() * w.array()).sum(); };

        const double h = 1e-5;
        for (int l = 0; l < net.num_layers(); ++l) {
            auto& weights = net.weights[static_cast<size_t>(l)];
            for (int probe = 0; probe < 4; ++probe) {
                const Eigen::Index r = (probe * 2 + 1) % weights.rows();
                const Eigen::Index c = (probe * 7) % weights.cols();
                const double keep = weights(r, c);
                weights(r, c) = keep + h;
                const double up = loss();
                weights(r, c) = keep - h;
                const double down = loss();
                weights(r, c) = keep;
                const double fd = (up - down) / (2.0 * h);
                const double an = grads.weights[static_cast<size_t>(l)](r, c);
                CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
        }
    }

    SUBCASE("input gradient matches finite differences") {
        auto net = nn::make_net({4, 9, 2}, rng);
        Matrix x = random_matrix(2, 4, rng);
        Matrix w = random_matrix(2, 2, rng);
        nn::ForwardTrace trace;
        nn::forward(net, x, &trace);
        const auto grads = nn::backward(net, trace, w);
        const double h = 1e-5;
        for (Eigen::Index c = 0; c < 4; ++c) {
            Matrix xp = x, xm = x;
            xp(0, c) += h;
            xm(0, c) -= h;
            const double up = (nn::forward(net, xp).array() * w.array()).sum();
            const double down = (nn::forward(net, xm).array() * w.array()).sum();
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(fd - grads.input(0, c)) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("updates") {
    RandomStream rng(13);

    SUBCASE("plain descent reproduces the update rule literally") {
        auto net = nn::make_net({1, 1}, rng);
        net.weights[0](0, 0) = 1.0;
        net.biases[0](0) = 0.25;
        nn::Gradients g;
        g.weights.push_back(Matrix::Constant(1, 1, 0.5));
        g.biases.push_back(Vector::Constant(1, 0.5));
        auto opt = nn::OptimState::plain(0.1);
        nn::apply_update(net, g, opt);
        CHECK(net.weights[0](0, 0) == doctest::Approx(0.95));
        CHECK(net.biases[0](0) == doctest::Approx(0.2));
    }

    SUBCASE("zero gradient leaves parameters unchanged") {
        auto net = nn::make_net({3, 5, 2}, rng);
        const auto before = net;
        nn::Gradients g;
        for (int l = 0; l < net.num_layers(); ++l) {
            g.weights.push_back(Matrix::Zero(net.weights[static_cast<size_t>(l)].rows(),
                                             net.weights[static_cast<size_t>(l)].cols()));
            g.biases.push_back(Vector::Zero(net.biases[static_cast<size_t>(l)].size()));
        }
        auto adam = nn::OptimState::adam(net, 0.01);
        nn::apply_update(net, g, adam);
        CHECK(nn::same_params(net, before));
    }

    SUBCASE("zero learning rate is the identity") {
        auto net = nn::make_net({3, 5, 2}, rng);
        const auto before = net;
        nn::Gradients g;
        for (int l = 0; l < net.num_layers(); ++l) {
            g.weights.push_back(random_matrix(net.weights[static_cast<size_t>(l)].rows(),
                                              net.weights[static_cast<size_t>(l)].cols(), rng));
            g.biases.push_back(Vector::Ones(net.biases[static_cast<size_t>(l)].size()));
        }
        auto opt = nn::OptimState::plain(0.0);
        nn::apply_update(net, g, opt);
        CHECK(nn::same_params(net, before));
    }

    SUBCASE("gradient clipping caps the global norm") {
        nn::Gradients g;
        g.weights.push_back(Matrix::Constant(2, 2, 10.0));
        g.biases.push_back(Vector::Constant(2, 10.0));
        const double pre = nn::clip_gradient_norm(g, 5.0);
        CHECK(pre > 5.0);
        CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(5.0));
    }
}

TEST_CASE("training a tiny net on y = 2x reaches small error") {
    RandomStream rng(2);
    auto net = nn::make_net({1, 16, 1}, rng);
    auto opt = nn::OptimState::adam(net, 0.01);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double mse = 1.0;
    for (int step = 0; step < 2000; ++step) {
        Matrix x(16, 1);
        for (Eigen::Index i = 0; i < 16; ++i) x(i, 0) = unit(rng);
        Matrix y = 2.0 * x;
        nn::ForwardTrace trace;
        Matrix out = nn::forward(net, x, &trace);
        Matrix err = out - y;
        mse = err.squaredNorm() / 16.0;
        auto g = nn::backward(net, trace, 2.0 * err / 16.0);
        nn::apply_update(net, g, opt);
    }
    CHECK(mse < 1e-4);
}

TEST_CASE("checkpoint round trip is exact") {
    RandomStream rng(17);
    auto net = nn::make_net({7, 11, 4}, rng, nn::InitScheme::HeNormal, nn::Head::Softmax);
    const auto path = std::filesystem::temp_directory_path() / "riscell_nn_test.rnet";
    nn::save_net(net, path.string());
    const auto back = nn::load_net(path.string());
    CHECK(nn::same_params(net, back));
    CHECK(back.head == nn::Head::Softmax);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(nn::load_net("/nonexistent/net.rnet"), ConfigError);
}

#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "riscell/netmodel.hpp"

using namespace riscell;
using net::Complex;

namespace {

net::NetworkGeometry small_geometry(int elements = 1) {
    net::NetworkGeometry g;
    g.bs_positions = {{0.0, 0.0}};
    g.user_positions = {{10.0, 0.0}};
    g.ris_position = {5.0, 5.0};
    g.ris_elements = elements;
    return g;
}

}  // namespace

TEST_CASE("link parameter defaults follow the published table") {
    net::LinkParams p;
    CHECK(p.alpha1 == doctest::Approx(2.0));
    CHECK(p.alpha2 == doctest::Approx(3.5));
    CHECK(p.alpha3 == doctest::Approx(3.5));
    CHECK(p.beta0 == doctest::Approx(0.1));          // -10 dB
    CHECK(p.kappa == doctest::Approx(10.0));         // 10 dB
    CHECK(p.noise_power == doctest::Approx(1e-11));  // -80 dBm
    CHECK(p.total_bandwidth == doctest::Approx(2e7));
    CHECK(p.quant_bits == 3);
}

TEST_CASE("direct-channel kernel at unit distance and unit fading") {
    const auto h = net::rayleigh_entry(1.0, 3.5, Complex{1.0, 0.0});
    CHECK(h.real() == doctest::Approx(1.0));
    CHECK(h.imag() == doctest::Approx(0.0));
    CHECK_THROWS_AS(net::rayleigh_entry(0.0, 3.5, Complex{1.0, 0.0}), GeometryError);
}

TEST_CASE("direct-channel mean power follows the path-loss law") {
    net::NetworkGeometry g = small_geometry();
    net::LinkParams p;
    RandomStream rng(1234);
    double acc = 0.0;
    const int draws = 100'000;
    for (int i = 0; i < draws; ++i) {
        const auto h = net::sample_direct_channel(g, p, rng);
        acc += std::norm(h(0, 0));
    }
    const double mean_gain = acc / draws;
    const double expected = std::pow(10.0, -3.5);  // d = 10, alpha3 = 3.5
    CHECK(mean_gain == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("pure specular limit of the Rician kernel") {
    net::LinkParams p;
    p.kappa = std::numeric_limits<double>::infinity();
    const double d = 7.0;
    const auto h = net::rician_entry(d, 3, 0.25, p, Complex{123.0, -9.0});
    CHECK(std::abs(h) == doctest::Approx(std::sqrt(p.beta0) * std::pow(d, -p.alpha1 / 2.0)));

    SUBCASE("kappa zero reduces exactly to the scattered term") {
        net::LinkParams q;
        q.kappa = 0.0;
        const Complex fading{0.3, -0.4};
        const auto nlos = net::rician_entry(5.0, 2, 0.1, q, fading);
        const Complex expected = fading * std::pow(5.0, -q.alpha2 / 2.0);
        CHECK(nlos.real() == doctest::Approx(expected.real()));
        CHECK(nlos.imag() == doctest::Approx(expected.imag()));
    }
}

TEST_CASE("specular/scattered power ratio recovers the Rician factor") {
    // At unit distance with beta0 = 1 the deterministic part has unit
    // power, so |sample mean|^2 / sample variance estimates kappa.
    net::NetworkGeometry g = small_geometry();
    g.bs_positions = {{1.0, 0.0}};
    g.ris_position = {0.0, 0.0};
    g.user_positions = {{0.0, 1.0}};
    net::LinkParams p;
    p.beta0 = 1.0;
    p.kappa = 10.0;

    RandomStream rng(777);
    const int draws = 100'000;
    Complex mean{0.0, 0.0};
    double power = 0.0;
    std::vector<Complex> samples;
    samples.reserve(draws);
    for (int i = 0; i < draws; ++i) {
        const auto [bs_to_ris, ris_to_user] = net::sample_ris_channels(g, p, rng);
        samples.push_back(bs_to_ris(0, 0));
        mean += bs_to_ris(0, 0);
        power += std::norm(bs_to_ris(0, 0));
    }
    mean /= static_cast<double>(draws);
    double variance = 0.0;
    for (const auto& s : samples) variance += std::norm(s - mean);
    variance /= static_cast<double>(draws);

    const double ratio = std::norm(mean) / variance;
    CHECK(ratio == doctest::Approx(p.kappa).epsilon(0.05));
}

TEST_CASE("boresight angle sine from plane geometry") {
    const net::Position ris{0.0, 0.0};
    CHECK(net::sin_aoa(ris, {1.0, 0.0}) == doctest::Approx(0.0));
    CHECK(net::sin_aoa(ris, {0.0, 2.0}) == doctest::Approx(1.0));
    CHECK(net::sin_aoa(ris, {3.0, -3.0}) == doctest::Approx(-std::sqrt(0.5)));
    CHECK_THROWS_AS(net::sin_aoa(ris, ris), GeometryError);
}

TEST_CASE("effective-channel composition") {
    SUBCASE("disabled surface returns the direct entry") {
        net::RisConfig ris = net::RisConfig::disabled(3);
        net::ComplexVector up(3), down(3);
        up << Complex{1, 1}, Complex{2, 0}, Complex{0, -1};
        down << Complex{1, 0}, Complex{0, 1}, Complex{2, 2};
        const Complex direct{0.5, -0.25};
        const auto out = net::compose_effective_channel(direct, up, down, ris);
        CHECK(out.real() == doctest::Approx(direct.real()));
        CHECK(out.imag() == doctest::Approx(direct.imag()));
    }

    SUBCASE("single-element identity composition") {
        net::RisConfig ris = net::RisConfig::zeros(1);
        net::ComplexVector up(1), down(1);
        up << Complex{1, 0};
        down << Complex{1, 0};
        const auto out = net::compose_effective_channel(Complex{0, 0}, up, down, ris);
        CHECK(out.real() == doctest::Approx(1.0));
        CHECK(out.imag() == doctest::Approx(0.0));
    }

    SUBCASE("two-element case matches the hand expansion") {
        net::RisConfig ris;
        ris.phases = {0.7, 2.1};
        ris.amplitudes = {1.0, 1.0};
        net::ComplexVector up(2), down(2);
        up << Complex{0.3, -0.2}, Complex{-1.1, 0.4};
        down << Complex{0.9, 0.1}, Complex{0.2, 0.6};
        const Complex direct{0.05, 0.02};
        const Complex expected = direct +
                                 std::conj(down(0)) * std::polar(1.0, 0.7) * up(0) +
                                 std::conj(down(1)) * std::polar(1.0, 2.1) * up(1);
        const auto out = net::compose_effective_channel(direct, up, down, ris);
        CHECK(out.real() == doctest::Approx(expected.real()));
        CHECK(out.imag() == doctest::Approx(expected.imag()));
    }

    SUBCASE("length mismatch raises a dimension error") {
        net::RisConfig ris = net::RisConfig::zeros(2);
        net::ComplexVector up(2), down(3);
        up.setZero();
        down.setZero();
        CHECK_THROWS_AS(net::compose_effective_channel({}, up, down, ris), DimensionError);
    }

    SUBCASE("additivity against a scalar-loop oracle at G = 8") {
        RandomStream rng(99);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        net::RisConfig ris = net::RisConfig::zeros(8);
        net::ComplexVector up(8), down(8);
        for (int e = 0; e < 8; ++e) {
            ris.phases[static_cast<size_t>(e)] = unit(rng) + 1.5;
            up(e) = Complex{unit(rng), unit(rng)};
            down(e) = Complex{unit(rng), unit(rng)};
        }
        const Complex direct{unit(rng), unit(rng)};
        Complex oracle = direct;
        for (int e = 0; e < 8; ++e) {
            oracle += std::conj(down(e)) * std::polar(1.0, ris.phases[static_cast<size_t>(e)]) * up(e);
        }
        const auto out = net::compose_effective_channel(direct, up, down, ris);
        CHECK(std::abs(out - oracle) < 1e-12);

        // Linear in the direct term.
        const auto shifted = net::compose_effective_channel(direct + Complex{1.0, 0.0}, up, down, ris);
        CHECK(std::abs(shifted - out - Complex{1.0, 0.0}) < 1e-12);
    }
}

TEST_CASE("snr") {
    net::LinkParams p;
    CHECK(net::snr({0.0, 0.0}, p) == doctest::Approx(0.0));

    const double mag = std::sqrt(p.noise_power / p.tx_power);
    CHECK(net::snr({mag, 0.0}, p) == doctest::Approx(1.0));
}

TEST_CASE("link rate") {
    CHECK(net::link_rate(0.0, 2e7) == doctest::Approx(0.0));
    CHECK(net::link_rate(1.0, 2e7) == doctest::Approx(2e7));
    CHECK(net::link_rate(3.0, 2e7) == doctest::Approx(4e7));

    SUBCASE("monotone in the ratio") {
        double previous = -1.0;
        for (double s = 0.0; s <= 50.0; s += 0.7) {
            const double r = net::link_rate(s, 2e7);
            CHECK(r >= previous);
            previous = r;
        }
    }
}

TEST_CASE("phase quantizer") {
    constexpr double pi = std::numbers::pi;
    CHECK(net::quantize_phase(0.0, 3) == doctest::Approx(0.0));
    CHECK(net::quantize_phase(3.0, 1) == doctest::Approx(pi));

    SUBCASE("default grid has eight levels") {
        std::set<double> seen;
        for (int k = 0; k < 64; ++k) {
            seen.insert(net::quantize_phase(2.0 * pi * k / 64.0, 3));
        }
        CHECK(seen.size() == 8);
    }

    SUBCASE("ties go to the smaller index") {
        // midpoint between 0 and pi at 1 bit
        CHECK(net::quantize_phase(pi / 2.0, 1) == doctest::Approx(0.0));
    }

    SUBCASE("idempotent and wrapped") {
        RandomStream rng(31);
        std::uniform_real_distribution<double> angle(-30.0, 30.0);
        for (int i = 0; i < 2000; ++i) {
            const double a = angle(rng);
            for (int bits = 1; bits <= 5; ++bits) {
                const double q = net::quantize_phase(a, bits);
                CHECK(net::quantize_phase(q, bits) == q);
                CHECK(q >= 0.0);
                CHECK(q < 2.0 * pi);
            }
        }
    }
}

TEST_CASE("degenerate geometry is rejected") {
    net::NetworkGeometry g = small_geometry();
    g.user_positions = {g.bs_positions.front()};
    CHECK_THROWS_AS(g.validate(), GeometryError);
}

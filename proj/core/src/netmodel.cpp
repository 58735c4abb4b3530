#include "riscell/netmodel.hpp"

#include <cmath>
#include <numbers>

namespace riscell::net {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Complex standard_complex_gaussian(RandomStream& rng) {
    // Circularly symmetric, unit total variance: each component ~ N(0, 1/2).
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

void check_positive_distance(double d, const char* what) {
    if (!(d > 0.0)) {
        throw GeometryError(std::string("degenerate geometry: zero distance on ") + what);
    }
}

}  // namespace

void NetworkGeometry::validate() const {
    if (bs_positions.empty() || user_positions.empty() || ris_elements < 1) {
        throw GeometryError("geometry needs at least one BS, one user and one RIS element");
    }
    for (const auto& p : bs_positions) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite BS position");
    }
    for (const auto& p : user_positions) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite user position");
    }
    for (const auto& b : bs_positions) {
        check_positive_distance(distance(b, ris_position), "BS-RIS link");
        for (const auto& u : user_positions) {
            check_positive_distance(distance(b, u), "BS-user link");
        }
    }
    for (const auto& u : user_positions) {
        check_positive_distance(distance(u, ris_position), "RIS-user link");
    }
}

void LinkParams::validate() const {
    if (!(beta0 > 0.0)) throw ConfigError("link.beta0 must be > 0");
    if (!(kappa >= 0.0)) throw ConfigError("link.kappa must be >= 0");
    if (!(alpha1 > 0.0 && alpha2 > 0.0 && alpha3 > 0.0)) {
        throw ConfigError("link path-loss exponents must be > 0");
    }
    if (!(noise_power > 0.0)) throw ConfigError("link.noise_power must be > 0");
    if (!(total_bandwidth > 0.0)) throw ConfigError("link.total_bandwidth must be > 0");
    if (!(tx_power > 0.0)) throw ConfigError("link.tx_power must be > 0");
    if (quant_bits < 1) throw ConfigError("link.quant_bits must be >= 1");
}

RisConfig RisConfig::zeros(int elements) {
    RisConfig c;
    c.phases.assign(static_cast<size_t>(elements), 0.0);
    c.amplitudes.assign(static_cast<size_t>(elements), 1.0);
    return c;
}

RisConfig RisConfig::disabled(int elements) {
    RisConfig c;
    c.phases.assign(static_cast<size_t>(elements), 0.0);
    c.amplitudes.assign(static_cast<size_t>(elements), 0.0);
    return c;
}

double sin_aoa(const Position& ris, const Position& endpoint) {
    const double dx = endpoint.x - ris.x;
    const double dy = endpoint.y - ris.y;
    const double d = std::hypot(dx, dy);
    check_positive_distance(d, "RIS angle");
    return dy / d;
}

Complex rayleigh_entry(double dist, double alpha3, Complex unit_fading) {
    check_positive_distance(dist, "direct link");
    return unit_fading / std::sqrt(std::pow(dist, alpha3));
}

Complex rician_entry(double dist, int element_index, double sin_theta,
                     const LinkParams& p, Complex unit_fading) {
    check_positive_distance(dist, "RIS link");
    double los_w;
    double nlos_w;
    if (std::isinf(p.kappa)) {
        los_w = 1.0;
        nlos_w = 0.0;
    } else {
        los_w = std::sqrt(p.kappa / (p.kappa + 1.0));
        nlos_w = std::sqrt(1.0 / (p.kappa + 1.0));
    }
    const double steer = -static_cast<double>(element_index) * std::numbers::pi * sin_theta;
    const Complex los = std::sqrt(p.beta0) * std::polar(1.0, steer) *
                        std::pow(dist, -p.alpha1 / 2.0);
    const Complex nlos = unit_fading * std::pow(dist, -p.alpha2 / 2.0);
    return los_w * los + nlos_w * nlos;
}

ComplexMatrix sample_direct_channel(const NetworkGeometry& g, const LinkParams& p,
                                    RandomStream& rng) {
    const int m = g.num_bs();
    const int n = g.num_users();
    ComplexMatrix h(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const double d = distance(g.bs_positions[i], g.user_positions[j]);
            h(i, j) = rayleigh_entry(d, p.alpha3, standard_complex_gaussian(rng));
        }
    }
    return h;
}

std::pair<ComplexMatrix, ComplexMatrix> sample_ris_channels(const NetworkGeometry& g,
                                                            const LinkParams& p,
                                                            RandomStream& rng) {
    const int m = g.num_bs();
    const int n = g.num_users();
    const int ge = g.ris_elements;

    ComplexMatrix bs_to_ris(ge, m);
    for (int i = 0; i < m; ++i) {
        const double d = distance(g.bs_positions[i], g.ris_position);
        const double st = sin_aoa(g.ris_position, g.bs_positions[i]);
        for (int e = 0; e < ge; ++e) {
            bs_to_ris(e, i) = rician_entry(d, e, st, p, standard_complex_gaussian(rng));
        }
    }

    ComplexMatrix ris_to_user(n, ge);
    for (int j = 0; j < n; ++j) {
        const double d = distance(g.user_positions[j], g.ris_position);
        const double st = sin_aoa(g.ris_position, g.user_positions[j]);
        for (int e = 0; e < ge; ++e) {
            ris_to_user(j, e) = rician_entry(d, e, st, p, standard_complex_gaussian(rng));
        }
    }
    return {std::move(bs_to_ris), std::move(ris_to_user)};
}

ChannelRealization sample_channels(const NetworkGeometry& g, const LinkParams& p,
                                   bool with_ris, RandomStream& rng) {
    g.validate();
    ChannelRealization ch;
    ch.direct = sample_direct_channel(g, p, rng);
    if (with_ris) {
        auto [gm, ng] = sample_ris_channels(g, p, rng);
        ch.bs_to_ris = std::move(gm);
        ch.ris_to_user = std::move(ng);
    } else {
        ch.bs_to_ris = ComplexMatrix::Zero(g.ris_elements, g.num_bs());
        ch.ris_to_user = ComplexMatrix::Zero(g.num_users(), g.ris_elements);
    }
    return ch;
}

Complex compose_effective_channel(Complex direct_entry,
                                  const ComplexVector& bs_to_ris_column,
                                  const ComplexVector& ris_to_user_row,
                                  const RisConfig& ris) {
    const auto g = bs_to_ris_column.size();
    if (ris_to_user_row.size() != g ||
        static_cast<Eigen::Index>(ris.phases.size()) != g ||
        static_cast<Eigen::Index>(ris.amplitudes.size()) != g) {
        throw DimensionError("effective-channel composition: vector lengths differ");
    }
    Complex reflected{0.0, 0.0};
    for (Eigen::Index e = 0; e < g; ++e) {
        reflected += std::conj(ris_to_user_row[e]) *
                     (ris.amplitudes[static_cast<size_t>(e)] *
                      std::polar(1.0, ris.phases[static_cast<size_t>(e)])) *
                     bs_to_ris_column[e];
    }
    return direct_entry + reflected;
}

double snr(Complex effective, const LinkParams& p) {
    return p.tx_power * std::norm(effective) / p.noise_power;
}

double link_rate(double snr_value, double bandwidth) {
    return bandwidth * std::log2(1.0 + snr_value);
}

double quantize_phase(double angle, int bits) {
    const double levels = std::pow(2.0, bits);
    const double step = kTwoPi / levels;
    double wrapped = std::fmod(angle, kTwoPi);
    if (wrapped < 0.0) wrapped += kTwoPi;
    // ceil(q - 1/2) rounds to nearest with exact ties going down.
    auto k = static_cast<long long>(std::ceil(wrapped / step - 0.5));
    const auto n = static_cast<long long>(levels);
    k = ((k % n) + n) % n;
    return static_cast<double>(k) * step;
}

}  // namespace riscell::net

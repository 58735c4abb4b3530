#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "riscell/common.hpp"

namespace riscell::net {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct Position {
    double x = 0.0;  // meters
    double y = 0.0;  // meters
};

inline double distance(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct NetworkGeometry {
    std::vector<Position> bs_positions;
    std::vector<Position> user_positions;
    Position ris_position;
    int ris_elements = 1;

    int num_bs() const { return static_cast<int>(bs_positions.size()); }
    int num_users() const { return static_cast<int>(user_positions.size()); }

    // Throws GeometryError on empty node sets or coincident endpoints.
    void validate() const;
};

// Link-budget constants. All values are linear (watts / ratios), the
// configuration layer converts from dB/dBm.
struct LinkParams {
    double beta0 = 0.1;             // gain at 1 m reference distance
    double kappa = 10.0;            // Rician factor
    double alpha1 = 2.0;            // path-loss exponent, specular part
    double alpha2 = 3.5;            // path-loss exponent, scattered part
    double alpha3 = 3.5;            // path-loss exponent, direct link
    double noise_power = 1e-11;     // watts
    double total_bandwidth = 2e7;   // Hz
    double tx_power = 1.0;          // watts (radiated, not the energy ledger)
    int quant_bits = 3;

    void validate() const;
};

// One slot's fading draw: direct M x N, BS->surface G x M, surface->user N x G.
struct ChannelRealization {
    ComplexMatrix direct;
    ComplexMatrix bs_to_ris;
    ComplexMatrix ris_to_user;
};

// Per-element reflection state. Phases live on the 2^bits grid; unit
// amplitudes model a passive surface, zero amplitudes disable it.
struct RisConfig {
    std::vector<double> phases;
    std::vector<double> amplitudes;

    static RisConfig zeros(int elements);
    static RisConfig disabled(int elements);
};

// Sine of the angle between the surface boresight (+x axis) and the
// direction of `endpoint` as seen from the surface.
double sin_aoa(const Position& ris, const Position& endpoint);

// Kernels behind the samplers, exposed for direct checks.
Complex rayleigh_entry(double dist, double alpha3, Complex unit_fading);
Complex rician_entry(double dist, int element_index, double sin_theta,
                     const LinkParams& p, Complex unit_fading);

ComplexMatrix sample_direct_channel(const NetworkGeometry& g, const LinkParams& p,
                                    RandomStream& rng);

// Returns {bs_to_ris (G x M), ris_to_user (N x G)}.
std::pair<ComplexMatrix, ComplexMatrix> sample_ris_channels(const NetworkGeometry& g,
                                                            const LinkParams& p,
                                                            RandomStream& rng);

ChannelRealization sample_channels(const NetworkGeometry& g, const LinkParams& p,
                                   bool with_ris, RandomStream& rng);

// direct + sum_g conj(ris_to_user[g]) * a_g * e^{j phase_g} * bs_to_ris[g]
Complex compose_effective_channel(Complex direct_entry,
                                  const ComplexVector& bs_to_ris_column,
                                  const ComplexVector& ris_to_user_row,
                                  const RisConfig& ris);

double snr(Complex effective, const LinkParams& p);

// bits per second
double link_rate(double snr_value, double bandwidth);

// Nearest point of {2*pi*k / 2^bits}, ties toward the smaller index,
// result in [0, 2*pi).
double quantize_phase(double angle, int bits);

}  // namespace riscell::net

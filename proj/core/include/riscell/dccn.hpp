#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "riscell/netmodel.hpp"
#include "riscell/neural.hpp"

namespace riscell::dccn {

// Sum of the per-link rates over associated pairs, with the bandwidth
// shared equally by the users on the same BS. `serving[n]` is user n's
// BS index or -1.
double sum_rate(const net::ChannelRealization& ch, const net::RisConfig& ris,
                const net::LinkParams& params, const std::vector<int>& serving);

// Flattened real/imaginary parts of the three channel matrices, each
// matrix scaled by its RMS magnitude, followed by the three log10 RMS
// scales. Length 2*(M*N + G*M + N*G) + 3.
Eigen::VectorXd channel_features(const net::ChannelRealization& ch);
int channel_feature_dim(int num_bs, int num_users, int ris_elements);

// 0/1 row of length M*N from the per-user serving vector.
Eigen::VectorXd association_row(const std::vector<int>& serving, int num_bs);

struct DccnSample {
    Eigen::VectorXd features;
    std::vector<double> phases;
    double capacity_bps = 0.0;
};

struct DccnConfig {
    int hidden = 128;
    int hidden_layers = 2;
    double learning_rate = 1e-3;
    int capacity_samples = 2000;
    int capacity_epochs = 60;
    int capacity_batch = 64;
    int phase_epochs = 40;
    int phase_batch = 32;
    double holdout_fraction = 0.1;
};

// Phase net cascaded into a capacity net. The capacity net is trained
// first on simulator-labelled samples and then frozen while the phase
// net descends the negated capacity estimate through it.
struct DccnModel {
    nn::DenseNet phase_net;     // channel features -> raw phase outputs
    nn::DenseNet capacity_net;  // features + phases + association -> capacity
    std::vector<int> serving;   // association used for capacity training
    double capacity_scale = 1.0;
    int ris_elements = 0;
    int quant_bits = 3;
};

// Squash raw outputs into [0, 2*pi); used on the training path so the
// cascade stays differentiable, quantization happens only at inference.
Eigen::VectorXd squash_phases(const Eigen::VectorXd& raw);
Eigen::VectorXd squash_phases_grad(const Eigen::VectorXd& raw);

std::vector<DccnSample> gen_training_set(const net::NetworkGeometry& geometry,
                                         const net::LinkParams& params,
                                         const std::vector<int>& serving, int count,
                                         RandomStream& rng);

struct RegressionReport {
    std::vector<double> train_mse;  // per epoch, on normalized targets
    double holdout_rmse = 0.0;      // absolute, bits/s
    double holdout_relative_rmse = 0.0;
    double capacity_scale = 1.0;
};

// Capacity-net rows are laid out [channel features | phases | association].
RegressionReport train_capacity_net(nn::DenseNet& capacity_net,
                                    const std::vector<DccnSample>& data,
                                    const Eigen::VectorXd& association,
                                    const DccnConfig& config, RandomStream& rng);

struct PhaseTrainReport {
    std::vector<double> mean_predicted_capacity;  // per epoch, normalized
};

// Updates only the phase net; throws if the frozen capacity net would
// change. `features` holds one channel realization per row.
PhaseTrainReport train_phase_net(nn::DenseNet& phase_net, const nn::DenseNet& capacity_net,
                                 const std::vector<Eigen::VectorXd>& features,
                                 const Eigen::VectorXd& association,
                                 const DccnConfig& config, RandomStream& rng);

// Full two-stage pipeline: sample a training set, fit the capacity net,
// freeze it, then fit the phase net on the same channels.
DccnModel train_dccn(const net::NetworkGeometry& geometry, const net::LinkParams& params,
                     const std::vector<int>& serving, const DccnConfig& config,
                     RandomStream& rng);

net::RisConfig infer_phases(const DccnModel& model, const net::ChannelRealization& ch);

struct OracleResult {
    net::RisConfig best;
    double capacity_bps = 0.0;
    std::int64_t evaluated = 0;
};

// Enumerates every quantized phase vector; refuses spaces above 10^6.
OracleResult exhaustive_phase_oracle(const net::ChannelRealization& ch,
                                     const net::LinkParams& params,
                                     const std::vector<int>& serving, int ris_elements,
                                     int bits);

void save_model(const DccnModel& model, const std::string& dir);
DccnModel load_model(const std::string& dir);

}  // namespace riscell::dccn

#include "riscell/dccn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

namespace riscell::dccn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double matrix_rms(const net::ComplexMatrix& m) {
    if (m.size() == 0) return 1.0;
    const double rms = std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
    return rms > 0.0 ? rms : 1.0;
}

void append_scaled(Eigen::VectorXd& out, int& k, const net::ComplexMatrix& m, double scale) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            out(k++) = m(r, c).real() / scale;
            out(k++) = m(r, c).imag() / scale;
        }
    }
}

std::vector<int> shuffled_indices(size_t n, RandomStream& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace

double sum_rate(const net::ChannelRealization& ch, const net::RisConfig& ris,
                const net::LinkParams& params, const std::vector<int>& serving) {
    const int num_bs = static_cast<int>(ch.direct.rows());
    std::vector<int> count(static_cast<size_t>(num_bs), 0);
    for (int server : serving) {
        if (server >= 0) ++count[static_cast<size_t>(server)];
    }
    double total = 0.0;
    for (size_t u = 0; u < serving.size(); ++u) {
        const int m = serving[u];
        if (m < 0) continue;
        const auto eff = net::compose_effective_channel(
            ch.direct(m, static_cast<Eigen::Index>(u)), ch.bs_to_ris.col(m),
            ch.ris_to_user.row(static_cast<Eigen::Index>(u)).transpose(), ris);
        const double bw = params.total_bandwidth / static_cast<double>(count[static_cast<size_t>(m)]);
        total += net::link_rate(net::snr(eff, params), bw);
    }
    return total;
}

int channel_feature_dim(int num_bs, int num_users, int ris_elements) {
    return 2 * (num_bs * num_users + ris_elements * num_bs + num_users * ris_elements) + 3;
}

Eigen::VectorXd channel_features(const net::ChannelRealization& ch) {
    const int dim = channel_feature_dim(static_cast<int>(ch.direct.rows()),
                                        static_cast<int>(ch.direct.cols()),
                                        static_cast<int>(ch.bs_to_ris.rows()));
    Eigen::VectorXd out(dim);
    int k = 0;
    const double s_direct = matrix_rms(ch.direct);
    const double s_up = matrix_rms(ch.bs_to_ris);
    const double s_down = matrix_rms(ch.ris_to_user);
    append_scaled(out, k, ch.direct, s_direct);
    append_scaled(out, k, ch.bs_to_ris, s_up);
    append_scaled(out, k, ch.ris_to_user, s_down);
    out(k++) = std::log10(s_direct);
    out(k++) = std::log10(s_up);
    out(k++) = std::log10(s_down);
    return out;
}

Eigen::VectorXd association_row(const std::vector<int>& serving, int num_bs) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(num_bs * static_cast<int>(serving.size()));
    for (size_t n = 0; n < serving.size(); ++n) {
        if (serving[n] >= 0) {
            row(serving[n] * static_cast<int>(serving.size()) + static_cast<int>(n)) = 1.0;
        }
    }
    return row;
}

Eigen::VectorXd squash_phases(const Eigen::VectorXd& raw) {
    return kTwoPi / (1.0 + (-raw.array()).exp());
}

Eigen::VectorXd squash_phases_grad(const Eigen::VectorXd& raw) {
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-raw.array()).exp());
    return kTwoPi * s * (1.0 - s);
}

std::vector<DccnSample> gen_training_set(const net::NetworkGeometry& geometry,
                                         const net::LinkParams& params,
                                         const std::vector<int>& serving, int count,
                                         RandomStream& rng) {
    geometry.validate();
    params.validate();
    std::vector<DccnSample> samples;
    samples.reserve(static_cast<size_t>(count));
    const int levels = 1 << params.quant_bits;
    std::uniform_int_distribution<int> level(0, levels - 1);
    for (int i = 0; i < count; ++i) {
        const auto ch = net::sample_channels(geometry, params, true, rng);
        net::RisConfig ris = net::RisConfig::zeros(geometry.ris_elements);
        for (auto& phase : ris.phases) phase = kTwoPi * level(rng) / levels;
        DccnSample s;
        s.features = channel_features(ch);
        s.phases = ris.phases;
        s.capacity_bps = sum_rate(ch, ris, params, serving);
        samples.push_back(std::move(s));
    }
    return samples;
}

RegressionReport train_capacity_net(nn::DenseNet& capacity_net,
                                    const std::vector<DccnSample>& data,
                                    const Eigen::VectorXd& association,
                                    const DccnConfig& config, RandomStream& rng) {
    if (data.empty()) throw ConfigError("capacity training needs a nonempty data set");
    const int feat_dim = static_cast<int>(data.front().features.size());
    const int g = static_cast<int>(data.front().phases.size());
    const int in_dim = capacity_net.input_dim();
    if (feat_dim + g + static_cast<int>(association.size()) != in_dim) {
        throw DimensionError("capacity net input does not match features+phases+association");
    }

    const auto n_holdout = std::max<size_t>(1, static_cast<size_t>(
                                                   config.holdout_fraction *
                                                   static_cast<double>(data.size())));
    const size_t n_train = data.size() > n_holdout ? data.size() - n_holdout : data.size();

    RegressionReport report;
    double scale = 0.0;
    for (size_t i = 0; i < n_train; ++i) scale += std::abs(data[i].capacity_bps);
    scale = scale > 0.0 ? scale / static_cast<double>(n_train) : 1.0;
    report.capacity_scale = scale;

    auto row_of = [&](const DccnSample& s) {
        Eigen::VectorXd x(in_dim);
        x.head(feat_dim) = s.features;
        for (int e = 0; e < g; ++e) x(feat_dim + e) = s.phases[static_cast<size_t>(e)];
        x.tail(association.size()) = association;
        return x;
    };

    auto optim = nn::OptimState::adam(capacity_net, config.learning_rate);
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.capacity_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_mse = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < n_train; start += static_cast<size_t>(config.capacity_batch)) {
            const size_t stop = std::min(n_train, start + static_cast<size_t>(config.capacity_batch));
            const auto rows = static_cast<Eigen::Index>(stop - start);
            nn::Matrix x(rows, in_dim);
            nn::Vector y(rows);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& s = data[static_cast<size_t>(order[start + static_cast<size_t>(r)])];
                x.row(r) = row_of(s);
                y(r) = s.capacity_bps / scale;
            }
            nn::ForwardTrace trace;
            nn::Matrix pred = nn::forward(capacity_net, x, &trace);
            nn::Matrix err = pred.col(0) - y;
            epoch_mse += err.squaredNorm();
            seen += static_cast<size_t>(rows);
            nn::Matrix dout = 2.0 * err / static_cast<double>(rows);
            auto grads = nn::backward(capacity_net, trace, dout);
            nn::apply_update(capacity_net, grads, optim);
        }
        const double mse = epoch_mse / static_cast<double>(seen);
        if (!std::isfinite(mse)) throw NumericError("capacity regression diverged");
        report.train_mse.push_back(mse);
    }

    // Holdout error in absolute units.
    double se = 0.0;
    double mean_true = 0.0;
    size_t n_test = 0;
    for (size_t i = n_train; i < data.size(); ++i) {
        nn::Matrix x = row_of(data[i]).transpose();
        const double pred = nn::forward(capacity_net, x)(0, 0) * scale;
        se += (pred - data[i].capacity_bps) * (pred - data[i].capacity_bps);
        mean_true += data[i].capacity_bps;
        ++n_test;
    }
    if (n_test > 0) {
        report.holdout_rmse = std::sqrt(se / static_cast<double>(n_test));
        mean_true /= static_cast<double>(n_test);
        report.holdout_relative_rmse = mean_true > 0.0 ? report.holdout_rmse / mean_true : 0.0;
    }
    return report;
}

PhaseTrainReport train_phase_net(nn::DenseNet& phase_net, const nn::DenseNet& capacity_net,
                                 const std::vector<Eigen::VectorXd>& features,
                                 const Eigen::VectorXd& association,
                                 const DccnConfig& config, RandomStream& rng) {
    if (features.empty()) throw ConfigError("phase training needs a nonempty channel set");
    const auto frozen_before = capacity_net;  // freeze contract checked on exit
    const int feat_dim = static_cast<int>(features.front().size());
    const int g = phase_net.output_dim();
    const int in_dim = capacity_net.input_dim();
    if (feat_dim + g + static_cast<int>(association.size()) != in_dim) {
        throw DimensionError("phase/capacity cascade dimensions do not chain");
    }

    PhaseTrainReport report;
    auto optim = nn::OptimState::adam(phase_net, config.learning_rate);

    for (int epoch = 0; epoch < config.phase_epochs; ++epoch) {
        const auto order = shuffled_indices(features.size(), rng);
        double mean_pred = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.phase_batch)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.phase_batch));
            const auto rows = static_cast<Eigen::Index>(stop - start);

            nn::Matrix x(rows, feat_dim);
            for (Eigen::Index r = 0; r < rows; ++r) {
                x.row(r) = features[static_cast<size_t>(order[start + static_cast<size_t>(r)])];
            }

            nn::ForwardTrace phase_trace;
            nn::Matrix raw = nn::forward(phase_net, x, &phase_trace);

            nn::Matrix cascade_in(rows, in_dim);
            nn::Matrix squash_grad(rows, g);
            for (Eigen::Index r = 0; r < rows; ++r) {
                cascade_in.row(r).head(feat_dim) = x.row(r);
                cascade_in.row(r).segment(feat_dim, g) =
                    squash_phases(raw.row(r).transpose()).transpose();
                cascade_in.row(r).tail(association.size()) = association.transpose();
                squash_grad.row(r) = squash_phases_grad(raw.row(r).transpose()).transpose();
            }

            nn::ForwardTrace cap_trace;
            nn::Matrix pred = nn::forward(capacity_net, cascade_in, &cap_trace);
            mean_pred += pred.col(0).sum();

            // Descend the negated capacity estimate through the cascade.
            nn::Matrix dpred = nn::Matrix::Constant(rows, 1, -1.0 / static_cast<double>(rows));
            auto cap_grads = nn::backward(capacity_net, cap_trace, dpred);
            nn::Matrix dphases = cap_grads.input.middleCols(feat_dim, g);
            nn::Matrix draw = dphases.cwiseProduct(squash_grad);
            auto phase_grads = nn::backward(phase_net, phase_trace, draw);
            nn::apply_update(phase_net, phase_grads, optim);
        }
        report.mean_predicted_capacity.push_back(mean_pred / static_cast<double>(features.size()));
    }

    if (!nn::same_params(capacity_net, frozen_before)) {
        throw NumericError("frozen capacity net changed during phase training");
    }
    return report;
}

DccnModel train_dccn(const net::NetworkGeometry& geometry, const net::LinkParams& params,
                     const std::vector<int>& serving, const DccnConfig& config,
                     RandomStream& rng) {
    const int g = geometry.ris_elements;
    const int feat_dim = channel_feature_dim(geometry.num_bs(), geometry.num_users(), g);
    const int assoc_dim = geometry.num_bs() * geometry.num_users();

    DccnModel model;
    model.serving = serving;
    model.ris_elements = g;
    model.quant_bits = params.quant_bits;

    std::vector<int> cap_dims{feat_dim + g + assoc_dim};
    std::vector<int> phase_dims{feat_dim};
    for (int l = 0; l < config.hidden_layers; ++l) {
        cap_dims.push_back(config.hidden);
        phase_dims.push_back(config.hidden);
    }
    cap_dims.push_back(1);
    phase_dims.push_back(g);

    model.capacity_net = nn::make_net(cap_dims, rng);
    model.phase_net = nn::make_net(phase_dims, rng);

    const auto samples = gen_training_set(geometry, params, serving, config.capacity_samples, rng);
    const Eigen::VectorXd assoc = association_row(serving, geometry.num_bs());

    auto report = train_capacity_net(model.capacity_net, samples, assoc, config, rng);
    model.capacity_scale = report.capacity_scale;

    std::vector<Eigen::VectorXd> features;
    features.reserve(samples.size());
    for (const auto& s : samples) features.push_back(s.features);
    train_phase_net(model.phase_net, model.capacity_net, features, assoc, config, rng);
    return model;
}

net::RisConfig infer_phases(const DccnModel& model, const net::ChannelRealization& ch) {
    const Eigen::VectorXd feats = channel_features(ch);
    nn::Matrix x = feats.transpose();
    const Eigen::VectorXd raw = nn::forward(model.phase_net, x).row(0).transpose();
    const Eigen::VectorXd squashed = squash_phases(raw);
    net::RisConfig ris = net::RisConfig::zeros(model.ris_elements);
    for (int e = 0; e < model.ris_elements; ++e) {
        ris.phases[static_cast<size_t>(e)] = net::quantize_phase(squashed(e), model.quant_bits);
    }
    return ris;
}

OracleResult exhaustive_phase_oracle(const net::ChannelRealization& ch,
                                     const net::LinkParams& params,
                                     const std::vector<int>& serving, int ris_elements,
                                     int bits) {
    const double combos = std::pow(std::pow(2.0, bits), ris_elements);
    if (combos > 1e6) {
        throw ConfigError("oracle search space above 10^6 configurations");
    }
    const int levels = 1 << bits;
    const auto total = static_cast<std::int64_t>(combos);

    OracleResult result;
    result.best = net::RisConfig::zeros(ris_elements);
    result.capacity_bps = -1.0;
    std::vector<int> digits(static_cast<size_t>(ris_elements), 0);
    net::RisConfig candidate = net::RisConfig::zeros(ris_elements);
    for (std::int64_t k = 0; k < total; ++k) {
        std::int64_t rest = k;
        for (int e = 0; e < ris_elements; ++e) {
            digits[static_cast<size_t>(e)] = static_cast<int>(rest % levels);
            rest /= levels;
        }
        for (int e = 0; e < ris_elements; ++e) {
            candidate.phases[static_cast<size_t>(e)] =
                kTwoPi * digits[static_cast<size_t>(e)] / levels;
        }
        const double c = sum_rate(ch, candidate, params, serving);
        ++result.evaluated;
        if (c > result.capacity_bps) {
            result.capacity_bps = c;
            result.best = candidate;
        }
    }
    return result;
}

void save_model(const DccnModel& model, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nn::save_net(model.phase_net, dir + "/phase_net.rnet");
    nn::save_net(model.capacity_net, dir + "/capacity_net.rnet");
    std::ofstream meta(dir + "/dccn_meta.txt");
    meta << "scale " << model.capacity_scale << "\n";
    meta << "elements " << model.ris_elements << "\n";
    meta << "bits " << model.quant_bits << "\n";
    meta << "serving";
    for (int s : model.serving) meta << ' ' << s;
    meta << "\n";
}

DccnModel load_model(const std::string& dir) {
    DccnModel model;
    model.phase_net = nn::load_net(dir + "/phase_net.rnet");
    model.capacity_net = nn::load_net(dir + "/capacity_net.rnet");
    std::ifstream meta(dir + "/dccn_meta.txt");
    if (!meta) throw ConfigError("missing dccn_meta.txt in " + dir);
    std::string key;
    while (meta >> key) {
        if (key == "scale") meta >> model.capacity_scale;
        else if (key == "elements") meta >> model.ris_elements;
        else if (key == "bits") meta >> model.quant_bits;
        else if (key == "serving") {
            int v;
            while (meta >> v) model.serving.push_back(v);
        }
    }
    return model;
}

}  // namespace riscell::dccn

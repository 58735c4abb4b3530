#include "riscell/neural.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace riscell::nn {

namespace {

constexpr const char* kMagic = "RISCELL-NET";
constexpr int kVersion = 1;

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix softmax_rows(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        Eigen::RowVectorXd e = (z.row(r).array() - m).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

}  // namespace

std::int64_t DenseNet::num_params() const {
    std::int64_t n = 0;
    for (size_t l = 0; l < weights.size(); ++l) {
        n += weights[l].size() + biases[l].size();
    }
    return n;
}

bool same_params(const DenseNet& a, const DenseNet& b) {
    if (a.dims != b.dims || a.head != b.head) return false;
    for (size_t l = 0; l < a.weights.size(); ++l) {
        if ((a.weights[l].array() != b.weights[l].array()).any()) return false;
        if ((a.biases[l].array() != b.biases[l].array()).any()) return false;
    }
    return true;
}

double Gradients::squared_norm() const {
    double n = 0.0;
    for (const auto& w : weights) n += w.squaredNorm();
    for (const auto& b : biases) n += b.squaredNorm();
    return n;
}

void Gradients::scale(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
}

DenseNet make_net(const std::vector<int>& dims, RandomStream& rng, InitScheme scheme,
                  Head head) {
    if (dims.size() < 2) throw ConfigError("a net needs at least input and output dims");
    DenseNet net;
    net.dims = dims;
    net.head = head;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double scale = scheme == InitScheme::HeNormal ? std::sqrt(2.0 / fan_in)
                                                            : std::sqrt(1.0 / fan_in);
        std::normal_distribution<double> dist(0.0, scale);
        Matrix w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(fan_out));
    }
    return net;
}

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardTrace* trace) {
    if (batch.cols() != net.input_dim()) {
        throw DimensionError("forward: batch width does not match the input dim");
    }
    if (!batch.allFinite()) throw NumericError("forward: non-finite input");

    if (trace) {
        trace->input = batch;
        trace->pre.clear();
        trace->act.clear();
    }
    Matrix a = batch;
    const int nl = net.num_layers();
    for (int l = 0; l < nl; ++l) {
        Matrix z = (a * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
        Matrix out;
        if (l + 1 < nl) {
            out = relu(z);
        } else {
            out = net.head == Head::Softmax ? softmax_rows(z) : z;
        }
        if (trace) {
            trace->pre.push_back(std::move(z));
            trace->act.push_back(out);
        }
        a = std::move(out);
    }
    return a;
}

Gradients backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& output_grad) {
    const int nl = net.num_layers();
    if (static_cast<int>(trace.pre.size()) != nl) {
        throw DimensionError("backward: trace does not match the net");
    }
    if (output_grad.rows() != trace.input.rows() || output_grad.cols() != net.output_dim()) {
        throw DimensionError("backward: output gradient shape mismatch");
    }

    Gradients g;
    g.weights.resize(static_cast<size_t>(nl));
    g.biases.resize(static_cast<size_t>(nl));

    // Gradient w.r.t. the last pre-activation.
    Matrix dz;
    if (net.head == Head::Softmax) {
        const Matrix& p = trace.act.back();
        Matrix weighted = p.cwiseProduct(output_grad);
        Vector rowsum = weighted.rowwise().sum();
        dz = weighted - (p.array().colwise() * rowsum.array()).matrix();
    } else {
        dz = output_grad;
    }

    for (int l = nl - 1; l >= 0; --l) {
        const Matrix& prev_act = l == 0 ? trace.input : trace.act[static_cast<size_t>(l - 1)];
        g.weights[static_cast<size_t>(l)] = dz.transpose() * prev_act;
        g.biases[static_cast<size_t>(l)] = dz.colwise().sum().transpose();
        Matrix da = dz * net.weights[static_cast<size_t>(l)];
        if (l > 0) {
            const Matrix& z_prev = trace.pre[static_cast<size_t>(l - 1)];
            dz = da.cwiseProduct((z_prev.array() > 0.0).cast<double>().matrix());
        } else {
            g.input = std::move(da);
        }
    }
    return g;
}

OptimState OptimState::adam(const DenseNet& net, double lr) {
    OptimState s;
    s.mode = Mode::Adam;
    s.learning_rate = lr;
    for (int l = 0; l < net.num_layers(); ++l) {
        s.m_w.push_back(Matrix::Zero(net.weights[static_cast<size_t>(l)].rows(),
                                     net.weights[static_cast<size_t>(l)].cols()));
        s.v_w.push_back(Matrix::Zero(net.weights[static_cast<size_t>(l)].rows(),
                                     net.weights[static_cast<size_t>(l)].cols()));
        s.m_b.push_back(Vector::Zero(net.biases[static_cast<size_t>(l)].size()));
        s.v_b.push_back(Vector::Zero(net.biases[static_cast<size_t>(l)].size()));
    }
    return s;
}

OptimState OptimState::plain(double lr) {
    OptimState s;
    s.mode = Mode::PlainDescent;
    s.learning_rate = lr;
    return s;
}

void apply_update(DenseNet& net, const Gradients& grads, OptimState& optim) {
    const int nl = net.num_layers();
    if (static_cast<int>(grads.weights.size()) != nl) {
        throw DimensionError("apply_update: gradient shape mismatch");
    }
    if (optim.mode == OptimState::Mode::PlainDescent) {
        for (int l = 0; l < nl; ++l) {
            net.weights[static_cast<size_t>(l)] -=
                optim.learning_rate * grads.weights[static_cast<size_t>(l)];
            net.biases[static_cast<size_t>(l)] -=
                optim.learning_rate * grads.biases[static_cast<size_t>(l)];
        }
        ++optim.step;
        return;
    }

    ++optim.step;
    const double b1t = 1.0 - std::pow(optim.beta1, static_cast<double>(optim.step));
    const double b2t = 1.0 - std::pow(optim.beta2, static_cast<double>(optim.step));
    for (int l = 0; l < nl; ++l) {
        const size_t i = static_cast<size_t>(l);
        optim.m_w[i] = optim.beta1 * optim.m_w[i] + (1.0 - optim.beta1) * grads.weights[i];
        optim.v_w[i] = optim.beta2 * optim.v_w[i] +
                       (1.0 - optim.beta2) * grads.weights[i].cwiseProduct(grads.weights[i]);
        net.weights[i] -= (optim.learning_rate * (optim.m_w[i] / b1t).array() /
                           ((optim.v_w[i] / b2t).array().sqrt() + optim.epsilon))
                              .matrix();
        optim.m_b[i] = optim.beta1 * optim.m_b[i] + (1.0 - optim.beta1) * grads.biases[i];
        optim.v_b[i] = optim.beta2 * optim.v_b[i] +
                       (1.0 - optim.beta2) * grads.biases[i].cwiseProduct(grads.biases[i]);
        net.biases[i] -= (optim.learning_rate * (optim.m_b[i] / b1t).array() /
                          ((optim.v_b[i] / b2t).array().sqrt() + optim.epsilon))
                             .matrix();
    }
}

double clip_gradient_norm(Gradients& grads, double max_norm) {
    const double norm = std::sqrt(grads.squared_norm());
    if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
    return norm;
}

void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << kMagic << " v" << kVersion << "\n";
    out << "dims";
    for (int d : net.dims) out << ' ' << d;
    out << "\n";
    out << "head " << (net.head == Head::Softmax ? "softmax" : "linear") << "\n";
    out << "body f64-rowmajor\n";
    for (int l = 0; l < net.num_layers(); ++l) {
        const size_t i = static_cast<size_t>(l);
        for (Eigen::Index r = 0; r < net.weights[i].rows(); ++r) {
            for (Eigen::Index c = 0; c < net.weights[i].cols(); ++c) {
                const double v = net.weights[i](r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
        out.write(reinterpret_cast<const char*>(net.biases[i].data()),
                  static_cast<std::streamsize>(sizeof(double) *
                                               static_cast<size_t>(net.biases[i].size())));
    }
    if (!out) throw ConfigError("short write on checkpoint: " + path);
}

DenseNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) {
        throw ConfigError("bad checkpoint magic in " + path);
    }
    if (!std::getline(in, line) || line.rfind("dims", 0) != 0) {
        throw ConfigError("bad checkpoint dims in " + path);
    }
    DenseNet net;
    {
        std::istringstream ss(line.substr(4));
        int d;
        while (ss >> d) net.dims.push_back(d);
    }
    if (net.dims.size() < 2) throw ConfigError("bad checkpoint dims in " + path);
    if (!std::getline(in, line) || line.rfind("head ", 0) != 0) {
        throw ConfigError("bad checkpoint head in " + path);
    }
    net.head = line.substr(5) == "softmax" ? Head::Softmax : Head::Linear;
    if (!std::getline(in, line) || line != "body f64-rowmajor") {
        throw ConfigError("bad checkpoint body tag in " + path);
    }
    for (size_t l = 0; l + 1 < net.dims.size(); ++l) {
        Matrix w(net.dims[l + 1], net.dims[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                double v;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                w(r, c) = v;
            }
        }
        Vector b(net.dims[l + 1]);
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(b.size())));
        if (!in) throw ConfigError("truncated checkpoint: " + path);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

}  // namespace riscell::nn

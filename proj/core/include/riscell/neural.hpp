#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "riscell/common.hpp"

namespace riscell::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Head { Linear, Softmax };
enum class InitScheme { HeNormal, XavierNormal };

// Fully connected net: affine + ReLU on every layer except the last,
// which applies the head. Batches are row-major (one sample per row).
struct DenseNet {
    std::vector<int> dims;
    std::vector<Matrix> weights;  // layer l: dims[l+1] x dims[l]
    std::vector<Vector> biases;   // layer l: dims[l+1]
    Head head = Head::Linear;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    std::int64_t num_params() const;
};

bool same_params(const DenseNet& a, const DenseNet& b);

struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> pre;  // pre-activations per layer
    std::vector<Matrix> act;  // outputs per layer (post ReLU / head)
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;  // dL/dX, used when nets are cascaded

    double squared_norm() const;
    void scale(double s);
};

DenseNet make_net(const std::vector<int>& dims, RandomStream& rng,
                  InitScheme scheme = InitScheme::HeNormal, Head head = Head::Linear);

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardTrace* trace = nullptr);

// Exact reverse-mode gradients of the traced computation for the scalar
// loss whose derivative w.r.t. the net output is `output_grad`.
Gradients backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& output_grad);

struct OptimState {
    enum class Mode { Adam, PlainDescent };

    Mode mode = Mode::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;

    static OptimState adam(const DenseNet& net, double lr);
    static OptimState plain(double lr);
};

// W <- W - lr * g (plain mode) or the moment-adjusted step (Adam).
void apply_update(DenseNet& net, const Gradients& grads, OptimState& optim);

// Scales gradients so their global l2 norm does not exceed max_norm.
// Returns the pre-clip norm.
double clip_gradient_norm(Gradients& grads, double max_norm);

// Version-tagged checkpoint: ASCII header (magic, dims, head), then the
// parameters as row-major little-endian doubles.
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

}  // namespace riscell::nn

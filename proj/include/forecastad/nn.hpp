#pragma once

#include "forecastad/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace forecastad::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// B x C x H x W tensor of doubles, sample-major.
struct Tensor {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_), data(static_cast<size_t>(b_) * c_ * h_ * w_, 0.0) {}

    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }
    double* sample(int bi) { return data.data() + bi * sample_size(); }
    const double* sample(int bi) const { return data.data() + bi * sample_size(); }
    double& at(int bi, int ci, int y, int x) {
        return data[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }
    double at(int bi, int ci, int y, int x) const {
        return data[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }
};

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, int rows, int cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

/// Named tensors that persist in checkpoints but receive no gradient
/// (batch-norm running stats, the recurrent initial state).
struct Buffer {
    std::string name;
    Matrix value;
};

class Conv2d {
public:
    Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, Rng& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

    std::vector<Parameter*> params() { return {&weight_, &bias_}; }
    int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
    int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

    int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 0, pad_ = 0;
    Parameter weight_;  // cout x cin*k*k
    Parameter bias_;    // cout x 1

private:
    Matrix cols_;  // cached im2col of the last forward input
    int in_h_ = 0, in_w_ = 0, batch_ = 0;
};

class ConvTranspose2d {
public:
    ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad,
                    int output_pad, Rng& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

    std::vector<Parameter*> params() { return {&weight_, &bias_}; }
    int out_h(int h) const { return (h - 1) * stride_ - 2 * pad_ + k_ + output_pad_; }
    int out_w(int w) const { return out_h(w); }

    int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 0, pad_ = 0, output_pad_ = 0;
    Parameter weight_;  // cin x cout*k*k  (mirror-conv layout)
    Parameter bias_;    // cout x 1

private:
    Tensor input_;  // cached forward input
};

/// Batch normalization over (B, spatial) per channel. Covers both the 2d
/// (feature-map) and 1d (feature-vector) cases.
class BatchNorm {
public:
    BatchNorm(std::string name, int channels, double eps = 1e-4, double momentum = 0.1);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);

    std::vector<Parameter*> params() { return {&gamma_, &beta_}; }
    std::vector<Buffer*> buffers() { return {&running_mean_, &running_var_}; }

    int channels_ = 0;
    double eps_ = 1e-4, momentum_ = 0.1;
    Parameter gamma_, beta_;       // channels x 1
    Buffer running_mean_, running_var_;

private:
    Tensor xhat_;
    Vector invstd_;
    bool trained_forward_ = false;
};

class MaxPool2d {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    std::vector<int> argmax_;  // flat input index per output element
    int in_b_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class Linear {
public:
    Linear(std::string name, int in, int out, Rng& rng);

    /// X is (in x B) feature-major; returns (out x B).
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& gy);

    std::vector<Parameter*> params() { return {&weight_, &bias_}; }

    int in_ = 0, out_ = 0;
    Parameter weight_;  // out x in
    Parameter bias_;    // out x 1

private:
    Matrix input_;
};

/// Stacked LSTM; only the final hidden state of the top layer is consumed, so
/// backward propagates the output gradient from that single point.
class Lstm {
public:
    Lstm(std::string name, int input_size, int hidden, int layers, Rng& rng);

    /// inputs: T matrices of shape (input_size x B). h0/c0: (hidden x layers),
    /// one column per layer, broadcast across the batch. Returns the top
    /// layer's final hidden state.
    Matrix forward(const std::vector<Matrix>& inputs, const Matrix& h0, const Matrix& c0);

    /// g_final: gradient wrt the returned hidden state. Returns per-step
    /// gradients wrt the inputs.
    std::vector<Matrix> backward(const Matrix& g_final);

    std::vector<Parameter*> params();

    int input_size_ = 0, hidden_ = 0, layers_ = 0;
    struct LayerParams {
        Parameter w_ih;  // 4H x in
        Parameter w_hh;  // 4H x H
        Parameter b_ih;  // 4H x 1
        Parameter b_hh;  // 4H x 1
    };
    std::vector<LayerParams> layer_params_;

private:
    struct StepCache {
        Matrix x, h_prev, c_prev, i, f, g, o, c, tanh_c;
    };
    std::vector<std::vector<StepCache>> cache_;  // [layer][t]
    int steps_ = 0, batch_ = 0;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, double lr, double weight_decay, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();

private:
    std::vector<Parameter*> params_;
    std::vector<Matrix> m_, v_;
    double lr_, weight_decay_, beta1_, beta2_, eps_;
    long t_ = 0;
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) fill, the usual default.
void init_uniform(Parameter& p, int fan_in, Rng& rng);

}  // namespace forecastad::nn

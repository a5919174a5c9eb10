#include "forecastad/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace forecastad::nn {

void init_uniform(Parameter& p, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            p.value(i, j) = rng.uniform(-bound, bound);
}

namespace {

/// Gathers k x k patches of one sample (c x h x w) into columns of `cols`
/// starting at column `col0`. Out-of-bounds taps read zero.
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            Matrix& cols, int col0) {
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const int col = col0 + oy * wo + ox;
            int row = 0;
            for (int ci = 0; ci < c; ++ci) {
                const double* plane = x + static_cast<size_t>(ci) * h * w;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox * stride + kx - pad;
                        cols(row, col) = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                             ? plane[static_cast<size_t>(iy) * w + ix]
                                             : 0.0;
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: accumulates columns back into the (c x h x w) image.
void col2im(const Matrix& cols, int col0, int c, int h, int w, int k, int stride, int pad, int ho,
            int wo, double* x) {
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const int col = col0 + oy * wo + ox;
            int row = 0;
            for (int ci = 0; ci < c; ++ci) {
                double* plane = x + static_cast<size_t>(ci) * h * w;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox * stride + kx - pad;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            plane[static_cast<size_t>(iy) * w + ix] += cols(row, col);
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, Rng& rng)
    : cin_(cin),
      cout_(cout),
      k_(k),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", cout, cin * k * k),
      bias_(name + ".bias", cout, 1) {
    init_uniform(weight_, cin * k * k, rng);
    init_uniform(bias_, cin * k * k, rng);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != cin_) throw std::logic_error("Conv2d: channel mismatch");
    batch_ = x.b;
    in_h_ = x.h;
    in_w_ = x.w;
    const int ho = out_h(x.h), wo = out_w(x.w);
    const int n = ho * wo;
    cols_.resize(cin_ * k_ * k_, static_cast<Eigen::Index>(x.b) * n);
    for (int bi = 0; bi < x.b; ++bi)
        im2col(x.sample(bi), cin_, x.h, x.w, k_, stride_, pad_, ho, wo, cols_, bi * n);

    Matrix y = weight_.value * cols_;
    y.colwise() += bias_.value.col(0);

    Tensor out(x.b, cout_, ho, wo);
    for (int bi = 0; bi < x.b; ++bi)
        for (int co = 0; co < cout_; ++co)
            for (int i = 0; i < n; ++i)
                out.sample(bi)[static_cast<size_t>(co) * n + i] = y(co, bi * n + i);
    return out;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int ho = gy.h, wo = gy.w, n = ho * wo;
    Matrix gy_mat(cout_, static_cast<Eigen::Index>(batch_) * n);
    for (int bi = 0; bi < batch_; ++bi)
        for (int co = 0; co < cout_; ++co)
            for (int i = 0; i < n; ++i)
                gy_mat(co, bi * n + i) = gy.sample(bi)[static_cast<size_t>(co) * n + i];

    weight_.grad.noalias() += gy_mat * cols_.transpose();
    bias_.grad.col(0) += gy_mat.rowwise().sum();

    const Matrix gcols = weight_.value.transpose() * gy_mat;
    Tensor gx(batch_, cin_, in_h_, in_w_);
    for (int bi = 0; bi < batch_; ++bi)
        col2im(gcols, bi * n, cin_, in_h_, in_w_, k_, stride_, pad_, ho, wo, gx.sample(bi));
    return gx;
}

// -------------------------------------------------------- ConvTranspose2d
//
// Implemented as the adjoint of a mirror convolution that maps the transposed
// convolution's output space back to its input space. forward == the mirror's
// backward-data pass, backward-data == the mirror's forward pass.

ConvTranspose2d::ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad,
                                 int output_pad, Rng& rng)
    : cin_(cin),
      cout_(cout),
      k_(k),
      stride_(stride),
      pad_(pad),
      output_pad_(output_pad),
      weight_(name + ".weight", cin, cout * k * k),
      bias_(name + ".bias", cout, 1) {
    init_uniform(weight_, cout * k * k, rng);
    init_uniform(bias_, cout * k * k, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    if (x.c != cin_) throw std::logic_error("ConvTranspose2d: channel mismatch");
    input_ = x;
    const int ho = out_h(x.h), wo = out_w(x.w);
    const int n = x.h * x.w;  // mirror-conv output positions

    Matrix x_mat(cin_, static_cast<Eigen::Index>(x.b) * n);
    for (int bi = 0; bi < x.b; ++bi)
        for (int ci = 0; ci < cin_; ++ci)
            for (int i = 0; i < n; ++i)
                x_mat(ci, bi * n + i) = x.sample(bi)[static_cast<size_t>(ci) * n + i];

    const Matrix gcols = weight_.value.transpose() * x_mat;  // (cout*k*k) x (B*n)
    Tensor out(x.b, cout_, ho, wo);
    for (int bi = 0; bi < x.b; ++bi)
        col2im(gcols, bi * n, cout_, ho, wo, k_, stride_, pad_, x.h, x.w, out.sample(bi));
    for (int bi = 0; bi < x.b; ++bi)
        for (int co = 0; co < cout_; ++co) {
            double* plane = out.sample(bi) + static_cast<size_t>(co) * ho * wo;
            for (int i = 0; i < ho * wo; ++i) plane[i] += bias_.value(co, 0);
        }
    return out;
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
    const int b = input_.b;
    const int n = input_.h * input_.w;
    Matrix cols(cout_ * k_ * k_, static_cast<Eigen::Index>(b) * n);
    for (int bi = 0; bi < b; ++bi)
        im2col(gy.sample(bi), cout_, gy.h, gy.w, k_, stride_, pad_, input_.h, input_.w, cols,
               bi * n);

    Matrix x_mat(cin_, static_cast<Eigen::Index>(b) * n);
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < cin_; ++ci)
            for (int i = 0; i < n; ++i)
                x_mat(ci, bi * n + i) = input_.sample(bi)[static_cast<size_t>(ci) * n + i];

    weight_.grad.noalias() += x_mat * cols.transpose();
    for (int bi = 0; bi < b; ++bi)
        for (int co = 0; co < cout_; ++co) {
            const double* plane = gy.sample(bi) + static_cast<size_t>(co) * gy.h * gy.w;
            double s = 0.0;
            for (int i = 0; i < gy.h * gy.w; ++i) s += plane[i];
            bias_.grad(co, 0) += s;
        }

    const Matrix gx_mat = weight_.value * cols;  // cin x (B*n)
    Tensor gx(b, cin_, input_.h, input_.w);
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < cin_; ++ci)
            for (int i = 0; i < n; ++i)
                gx.sample(bi)[static_cast<size_t>(ci) * n + i] = gx_mat(ci, bi * n + i);
    return gx;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(name + ".gamma", channels, 1),
      beta_(name + ".beta", channels, 1) {
    gamma_.value.setOnes();
    beta_.value.setZero();
    running_mean_ = {name + ".running_mean", Matrix::Zero(channels, 1)};
    running_var_ = {name + ".running_var", Matrix::Ones(channels, 1)};
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
    if (x.c != channels_) throw std::logic_error("BatchNorm: channel mismatch");
    const int spatial = x.h * x.w;
    const long n = static_cast<long>(x.b) * spatial;
    trained_forward_ = training;

    Tensor y(x.b, x.c, x.h, x.w);
    xhat_ = Tensor(x.b, x.c, x.h, x.w);
    invstd_.resize(channels_);

    for (int ci = 0; ci < channels_; ++ci) {
        double mu, var;
        if (training) {
            double s = 0.0;
            for (int bi = 0; bi < x.b; ++bi) {
                const double* plane = x.sample(bi) + static_cast<size_t>(ci) * spatial;
                for (int i = 0; i < spatial; ++i) s += plane[i];
            }
            mu = s / static_cast<double>(n);
            double ss = 0.0;
            for (int bi = 0; bi < x.b; ++bi) {
                const double* plane = x.sample(bi) + static_cast<size_t>(ci) * spatial;
                for (int i = 0; i < spatial; ++i) ss += (plane[i] - mu) * (plane[i] - mu);
            }
            var = ss / static_cast<double>(n);
            const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : var;
            running_mean_.value(ci, 0) =
                (1.0 - momentum_) * running_mean_.value(ci, 0) + momentum_ * mu;
            running_var_.value(ci, 0) =
                (1.0 - momentum_) * running_var_.value(ci, 0) + momentum_ * unbiased;
        } else {
            mu = running_mean_.value(ci, 0);
            var = running_var_.value(ci, 0);
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        invstd_(ci) = inv;
        const double g = gamma_.value(ci, 0), be = beta_.value(ci, 0);
        for (int bi = 0; bi < x.b; ++bi) {
            const double* in = x.sample(bi) + static_cast<size_t>(ci) * spatial;
            double* xh = xhat_.sample(bi) + static_cast<size_t>(ci) * spatial;
            double* out = y.sample(bi) + static_cast<size_t>(ci) * spatial;
            for (int i = 0; i < spatial; ++i) {
                xh[i] = (in[i] - mu) * inv;
                out[i] = g * xh[i] + be;
            }
        }
    }
    return y;
}

Tensor BatchNorm::backward(const Tensor& gy) {
    const int spatial = gy.h * gy.w;
    const double n = static_cast<double>(gy.b) * spatial;
    Tensor gx(gy.b, gy.c, gy.h, gy.w);

    for (int ci = 0; ci < channels_; ++ci) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int bi = 0; bi < gy.b; ++bi) {
            const double* g = gy.sample(bi) + static_cast<size_t>(ci) * spatial;
            const double* xh = xhat_.sample(bi) + static_cast<size_t>(ci) * spatial;
            for (int i = 0; i < spatial; ++i) {
                sum_gy += g[i];
                sum_gy_xhat += g[i] * xh[i];
            }
        }
        gamma_.grad(ci, 0) += sum_gy_xhat;
        beta_.grad(ci, 0) += sum_gy;

        const double g_ch = gamma_.value(ci, 0);
        const double inv = invstd_(ci);
        for (int bi = 0; bi < gy.b; ++bi) {
            const double* g = gy.sample(bi) + static_cast<size_t>(ci) * spatial;
            const double* xh = xhat_.sample(bi) + static_cast<size_t>(ci) * spatial;
            double* out = gx.sample(bi) + static_cast<size_t>(ci) * spatial;
            if (trained_forward_) {
                for (int i = 0; i < spatial; ++i)
                    out[i] = g_ch * inv / n * (n * g[i] - sum_gy - xh[i] * sum_gy_xhat);
            } else {
                for (int i = 0; i < spatial; ++i) out[i] = g_ch * inv * g[i];
            }
        }
    }
    return gx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::logic_error("MaxPool2d: input dims must be even");
    in_b_ = x.b;
    in_c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
    const int ho = x.h / 2, wo = x.w / 2;
    Tensor y(x.b, x.c, ho, wo);
    argmax_.assign(y.data.size(), 0);

    size_t oi = 0;
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            const double* plane = x.sample(bi) + static_cast<size_t>(ci) * x.h * x.w;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox, ++oi) {
                    int best = (2 * oy) * x.w + 2 * ox;
                    double bv = plane[best];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (2 * oy + dy) * x.w + (2 * ox + dx);
                            if (plane[idx] > bv) {
                                bv = plane[idx];
                                best = idx;
                            }
                        }
                    y.data[oi] = bv;
                    argmax_[oi] = best;
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
    Tensor gx(in_b_, in_c_, in_h_, in_w_);
    const int ho = in_h_ / 2, wo = in_w_ / 2;
    size_t oi = 0;
    for (int bi = 0; bi < in_b_; ++bi)
        for (int ci = 0; ci < in_c_; ++ci) {
            double* plane = gx.sample(bi) + static_cast<size_t>(ci) * in_h_ * in_w_;
            for (int i = 0; i < ho * wo; ++i, ++oi) plane[argmax_[oi]] += gy.data[oi];
        }
    return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in, int out, Rng& rng)
    : in_(in), out_(out), weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {
    init_uniform(weight_, in, rng);
    init_uniform(bias_, in, rng);
}

Matrix Linear::forward(const Matrix& x) {
    if (x.rows() != in_) throw std::logic_error("Linear: input dim mismatch");
    input_ = x;
    Matrix y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
}

Matrix Linear::backward(const Matrix& gy) {
    weight_.grad.noalias() += gy * input_.transpose();
    bias_.grad.col(0) += gy.rowwise().sum();
    return weight_.value.transpose() * gy;
}

// ------------------------------------------------------------------ LSTM

Lstm::Lstm(std::string name, int input_size, int hidden, int layers, Rng& rng)
    : input_size_(input_size), hidden_(hidden), layers_(layers) {
    layer_params_.reserve(layers);
    for (int l = 0; l < layers; ++l) {
        const int in = l == 0 ? input_size : hidden;
        const std::string prefix = name + ".layer" + std::to_string(l);
        LayerParams p{Parameter(prefix + ".w_ih", 4 * hidden, in),
                      Parameter(prefix + ".w_hh", 4 * hidden, hidden),
                      Parameter(prefix + ".b_ih", 4 * hidden, 1),
                      Parameter(prefix + ".b_hh", 4 * hidden, 1)};
        init_uniform(p.w_ih, hidden, rng);
        init_uniform(p.w_hh, hidden, rng);
        init_uniform(p.b_ih, hidden, rng);
        init_uniform(p.b_hh, hidden, rng);
        layer_params_.push_back(std::move(p));
    }
}

std::vector<Parameter*> Lstm::params() {
    std::vector<Parameter*> out;
    for (auto& p : layer_params_) {
        out.push_back(&p.w_ih);
        out.push_back(&p.w_hh);
        out.push_back(&p.b_ih);
        out.push_back(&p.b_hh);
    }
    return out;
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Matrix Lstm::forward(const std::vector<Matrix>& inputs, const Matrix& h0, const Matrix& c0) {
    steps_ = static_cast<int>(inputs.size());
    if (steps_ == 0) throw std::invalid_argument("Lstm: empty input sequence");
    batch_ = static_cast<int>(inputs[0].cols());
    const int H = hidden_;

    cache_.assign(layers_, std::vector<StepCache>(steps_));
    std::vector<Matrix> layer_in = inputs;

    for (int l = 0; l < layers_; ++l) {
        Matrix h = h0.col(l).replicate(1, batch_);
        Matrix c = c0.col(l).replicate(1, batch_);
        const auto& p = layer_params_[l];
        for (int t = 0; t < steps_; ++t) {
            auto& s = cache_[l][t];
            s.x = layer_in[t];
            s.h_prev = h;
            s.c_prev = c;
            Matrix z = p.w_ih.value * s.x + p.w_hh.value * h;
            z.colwise() += p.b_ih.value.col(0) + p.b_hh.value.col(0);

            s.i.resize(H, batch_);
            s.f.resize(H, batch_);
            s.g.resize(H, batch_);
            s.o.resize(H, batch_);
            for (int bi = 0; bi < batch_; ++bi)
                for (int j = 0; j < H; ++j) {
                    s.i(j, bi) = sigmoid(z(j, bi));
                    s.f(j, bi) = sigmoid(z(H + j, bi));
                    s.g(j, bi) = std::tanh(z(2 * H + j, bi));
                    s.o(j, bi) = sigmoid(z(3 * H + j, bi));
                }
            s.c = s.f.cwiseProduct(s.c_prev) + s.i.cwiseProduct(s.g);
            s.tanh_c = s.c.array().tanh();
            h = s.o.cwiseProduct(s.tanh_c);
            c = s.c;
            layer_in[t] = h;
        }
    }
    return cache_[layers_ - 1][steps_ - 1].o.cwiseProduct(cache_[layers_ - 1][steps_ - 1].tanh_c);
}

std::vector<Matrix> Lstm::backward(const Matrix& g_final) {
    const int H = hidden_;
    // Per-step output gradient for the current layer; only the top layer's
    // final step receives an external gradient.
    std::vector<Matrix> gout(steps_, Matrix::Zero(H, batch_));
    gout[steps_ - 1] = g_final;

    std::vector<Matrix> gx_below;
    for (int l = layers_ - 1; l >= 0; --l) {
        auto& p = layer_params_[l];
        const int in = l == 0 ? input_size_ : H;
        gx_below.assign(steps_, Matrix::Zero(in, batch_));

        Matrix gh_next = Matrix::Zero(H, batch_);
        Matrix gc_next = Matrix::Zero(H, batch_);
        for (int t = steps_ - 1; t >= 0; --t) {
            const auto& s = cache_[l][t];
            const Matrix gh = gout[t] + gh_next;
            const Matrix go = gh.cwiseProduct(s.tanh_c);
            const Matrix gc =
                gc_next + gh.cwiseProduct(s.o).cwiseProduct(
                              (1.0 - s.tanh_c.array().square()).matrix());
            const Matrix gi = gc.cwiseProduct(s.g);
            const Matrix gf = gc.cwiseProduct(s.c_prev);
            const Matrix gg = gc.cwiseProduct(s.i);

            Matrix gz(4 * H, batch_);
            gz.topRows(H) = gi.cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
            gz.middleRows(H, H) =
                gf.cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
            gz.middleRows(2 * H, H) = gg.cwiseProduct((1.0 - s.g.array().square()).matrix());
            gz.bottomRows(H) = go.cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());

            p.w_ih.grad.noalias() += gz * s.x.transpose();
            p.w_hh.grad.noalias() += gz * s.h_prev.transpose();
            p.b_ih.grad.col(0) += gz.rowwise().sum();
            p.b_hh.grad.col(0) += gz.rowwise().sum();

            gx_below[t] = p.w_ih.value.transpose() * gz;
            gh_next = p.w_hh.value.transpose() * gz;
            gc_next = gc.cwiseProduct(s.f);
        }
        gout = gx_below;  // becomes the output gradient of the layer below
    }
    return gout;
}

// ------------------------------------------------------------------ Adam

Adam::Adam(std::vector<Parameter*> params, double lr, double weight_decay, double beta1,
           double beta2, double eps)
    : params_(std::move(params)),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        Matrix g = p.grad;
        if (weight_decay_ != 0.0) g += weight_decay_ * p.value;
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
        const Matrix mhat = m_[k] / bc1;
        const Matrix vhat = v_[k] / bc2;
        p.value -= lr_ * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

}  // namespace forecastad::nn

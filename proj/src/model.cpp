#include "forecastad/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace forecastad {

using nn::Matrix;
using nn::Tensor;
using nn::Vector;

// ----------------------------------------------------------- preprocessing

PreprocessStats compute_preprocess_stats(const std::vector<DaySequence>& days) {
    PreprocessStats stats{std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
    for (const auto& day : days)
        for (const auto& s : day.samples)
            for (float v : s.frame.pixels) {
                stats.min = std::min(stats.min, static_cast<double>(v));
                stats.max = std::max(stats.max, static_cast<double>(v));
            }
    if (!(stats.max > stats.min))
        throw std::invalid_argument("compute_preprocess_stats: degenerate pixel range");
    return stats;
}

std::vector<double> bilinear_resize(const ThermalFrame& frame, int out_h, int out_w) {
    const int h = frame.height, w = frame.width;
    std::vector<double> out(static_cast<size_t>(out_h) * out_w);
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * frame.at(y0, x0) + wx * frame.at(y0, x1);
            const double bot = (1.0 - wx) * frame.at(y1, x0) + wx * frame.at(y1, x1);
            out[static_cast<size_t>(oy) * out_w + ox] = (1.0 - wy) * top + wy * bot;
        }
    }
    return out;
}

std::vector<double> preprocess(const ThermalFrame& frame, const PreprocessStats& stats, int hw) {
    if (!(stats.max > stats.min)) throw std::invalid_argument("preprocess: degenerate stats");
    auto resized = bilinear_resize(frame, hw, hw);
    const double range = stats.max - stats.min;
    std::vector<double> out(3 * resized.size());
    for (size_t i = 0; i < resized.size(); ++i) {
        const double v = std::clamp((resized[i] - stats.min) / range, 0.0, 1.0);
        out[i] = v;
        out[resized.size() + i] = v;
        out[2 * resized.size() + i] = v;
    }
    return out;
}

std::vector<double> encode_time(double minutes, int dim, double period) {
    if (dim % 2 != 0 || dim <= 0) throw std::invalid_argument("encode_time: dim must be even");
    std::vector<double> out(dim);
    for (int j = 0; j < dim / 2; ++j) {
        const double denom = std::pow(period, 2.0 * j / dim);
        out[2 * j] = std::sin(minutes / denom);
        out[2 * j + 1] = std::cos(minutes / denom);
    }
    return out;
}

// ------------------------------------------------------------ ModelConfig

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
    ModelConfig mc;
    mc.input_hw = 32;
    mc.enc_channels = {32, 64};
    mc.d_latent = 64;
    mc.dec_channels = {64, 32, 3};
    mc.lstm_layers = 2;
    return mc;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig mc;
    mc.input_hw = 8;
    mc.enc_channels = {8};
    mc.d_latent = 8;
    mc.dec_channels = {8, 3};
    mc.lstm_layers = 1;
    return mc;
}

int ModelConfig::encoder_out_hw() const {
    int s = input_hw;
    for (size_t i = 0; i < enc_channels.size(); ++i) {
        s = (s + 2 * 2 - kernel) / 2 + 1;  // stride-2 conv, pad 2
        if (s % 2 != 0) throw std::invalid_argument("ModelConfig: odd spatial dim before pooling");
        s /= 2;
    }
    return s;
}

int ModelConfig::decoder_stem_hw() const {
    int s = input_hw;
    for (int i = 0; i < decoder_blocks(); ++i) {
        if (s % 4 != 0) throw std::invalid_argument("ModelConfig: decoder chain does not divide");
        s /= 4;
    }
    return s;
}

void ModelConfig::validate() const {
    if (enc_channels.empty() || dec_channels.size() < 2)
        throw std::invalid_argument("ModelConfig: need at least one encoder and decoder block");
    if (dec_channels.back() != 3)
        throw std::invalid_argument("ModelConfig: decoder must end in 3 channels");
    if (d_latent < 1 || time_dim < 2 || time_dim % 2 != 0 || lstm_layers < 1)
        throw std::invalid_argument("ModelConfig: bad latent/time/lstm dimensions");
    (void)encoder_out_hw();
    if (decoder_stem_hw() < 1) throw std::invalid_argument("ModelConfig: decoder stem underflow");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (context_length < 1) throw std::invalid_argument("TrainConfig: context_length must be >= 1");
    if (pretrain_epochs < 0 || train_epochs < 0)
        throw std::invalid_argument("TrainConfig: negative epoch count");
}

// ----------------------------------------------------------- ForecastModel

ForecastModel::ForecastModel(const ModelConfig& mc, const TrainConfig& tc,
                             const PreprocessStats& stats)
    : mc_(mc), tc_(tc), stats_(stats) {
    mc_.validate();
    tc_.validate();
    Rng rng(splitmix64(tc.seed ^ 0xf0c4d0de11ULL));

    int cin = 3;
    for (size_t i = 0; i < mc_.enc_channels.size(); ++i) {
        const int cout = mc_.enc_channels[i];
        const std::string name = "encoder.block" + std::to_string(i);
        enc_convs_.emplace_back(name + ".conv", cin, cout, mc_.kernel, 2, 2, rng);
        enc_bns_.emplace_back(name + ".bn", cout, mc_.bn_eps);
        enc_pools_.emplace_back();
        cin = cout;
    }
    const int s = mc_.encoder_out_hw();
    enc_head_ = std::make_unique<nn::Linear>("encoder.head", cin * s * s, mc_.d_latent, rng);
    enc_head_bn_ = std::make_unique<nn::BatchNorm>("encoder.head.bn", mc_.d_latent, mc_.bn_eps);

    const int s0 = mc_.decoder_stem_hw();
    dec_proj_ = std::make_unique<nn::Linear>("decoder.proj", mc_.d_latent + mc_.time_dim,
                                             mc_.dec_channels[0] * s0 * s0, rng);
    for (int i = 0; i < mc_.decoder_blocks(); ++i) {
        const std::string name = "decoder.block" + std::to_string(i);
        // kernel 5, pad 2, stride 4 with output padding 3: exact 4x upsampling
        dec_convs_.emplace_back(name + ".deconv", mc_.dec_channels[i], mc_.dec_channels[i + 1],
                                mc_.kernel, 4, 2, 3, rng);
        if (i + 1 < mc_.decoder_blocks())
            dec_bns_.emplace_back(name + ".bn", mc_.dec_channels[i + 1], mc_.bn_eps);
    }

    lstm_ = std::make_unique<nn::Lstm>("context", mc_.d_latent + mc_.time_dim, mc_.d_latent,
                                       mc_.lstm_layers, rng);

    init_h_ = {"context.init_h", Matrix::Zero(mc_.d_latent, mc_.lstm_layers)};
    init_c_ = {"context.init_c", Matrix::Zero(mc_.d_latent, mc_.lstm_layers)};
    if (!mc_.zero_init_state) {
        for (int l = 0; l < mc_.lstm_layers; ++l)
            for (int j = 0; j < mc_.d_latent; ++j) {
                init_h_.value(j, l) = rng.normal();
                init_c_.value(j, l) = rng.normal();
            }
    }

    std::vector<nn::Parameter*> backbone;
    for (auto& c : enc_convs_)
        for (auto* p : c.params()) backbone.push_back(p);
    for (auto& b : enc_bns_)
        for (auto* p : b.params()) backbone.push_back(p);
    for (auto* p : enc_head_->params()) backbone.push_back(p);
    for (auto* p : enc_head_bn_->params()) backbone.push_back(p);
    for (auto* p : dec_proj_->params()) backbone.push_back(p);
    for (auto& c : dec_convs_)
        for (auto* p : c.params()) backbone.push_back(p);
    for (auto& b : dec_bns_)
        for (auto* p : b.params()) backbone.push_back(p);

    adam_pretrain_ = std::make_unique<nn::Adam>(backbone, tc_.lr, tc_.weight_decay);
    adam_full_ = std::make_unique<nn::Adam>(parameters(), tc_.lr, tc_.weight_decay);
}

std::vector<nn::Parameter*> ForecastModel::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& c : enc_convs_)
        for (auto* p : c.params()) out.push_back(p);
    for (auto& b : enc_bns_)
        for (auto* p : b.params()) out.push_back(p);
    for (auto* p : enc_head_->params()) out.push_back(p);
    for (auto* p : enc_head_bn_->params()) out.push_back(p);
    for (auto* p : dec_proj_->params()) out.push_back(p);
    for (auto& c : dec_convs_)
        for (auto* p : c.params()) out.push_back(p);
    for (auto& b : dec_bns_)
        for (auto* p : b.params()) out.push_back(p);
    for (auto* p : lstm_->params()) out.push_back(p);
    return out;
}

std::vector<nn::Buffer*> ForecastModel::buffers() {
    std::vector<nn::Buffer*> out;
    for (auto& b : enc_bns_)
        for (auto* x : b.buffers()) out.push_back(x);
    for (auto* x : enc_head_bn_->buffers()) out.push_back(x);
    for (auto& b : dec_bns_)
        for (auto* x : b.buffers()) out.push_back(x);
    out.push_back(&init_h_);
    out.push_back(&init_c_);
    return out;
}

void ForecastModel::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

void ForecastModel::adam_step_pretrain() { adam_pretrain_->step(); }
void ForecastModel::adam_step_full() { adam_full_->step(); }

void ForecastModel::load_backbone(const ForecastModel& pretrained) {
    auto self_params = parameters();
    auto other = const_cast<ForecastModel&>(pretrained).parameters();
    for (auto* p : self_params)
        for (auto* q : other)
            if (p->name == q->name && p->name.rfind("context", 0) != 0) p->value = q->value;
    auto self_bufs = buffers();
    auto other_bufs = const_cast<ForecastModel&>(pretrained).buffers();
    for (auto* b : self_bufs)
        for (auto* q : other_bufs)
            if (b->name == q->name && b->name.rfind("context", 0) != 0) b->value = q->value;
}

Tensor ForecastModel::preprocess_batch(const std::vector<const ThermalFrame*>& frames) const {
    const int hw = mc_.input_hw;
    Tensor out(static_cast<int>(frames.size()), 3, hw, hw);
    for (size_t i = 0; i < frames.size(); ++i) {
        const auto v = preprocess(*frames[i], stats_, hw);
        std::memcpy(out.sample(static_cast<int>(i)), v.data(), v.size() * sizeof(double));
    }
    return out;
}

Matrix ForecastModel::encode_frames(const Tensor& frames, bool training) {
    Tensor x = frames;
    for (size_t i = 0; i < enc_convs_.size(); ++i) {
        x = enc_convs_[i].forward(x);
        x = enc_bns_[i].forward(x, training);
        x = enc_pools_[i].forward(x);
    }
    // flatten each sample into a feature column
    Matrix flat(static_cast<Eigen::Index>(x.sample_size()), x.b);
    for (int bi = 0; bi < x.b; ++bi)
        std::memcpy(flat.col(bi).data(), x.sample(bi), x.sample_size() * sizeof(double));
    Matrix z = enc_head_->forward(flat);
    Tensor zt(static_cast<int>(z.cols()), mc_.d_latent, 1, 1);
    for (int bi = 0; bi < zt.b; ++bi)
        std::memcpy(zt.sample(bi), z.col(bi).data(), static_cast<size_t>(mc_.d_latent) * sizeof(double));
    zt = enc_head_bn_->forward(zt, training);
    Matrix out(mc_.d_latent, zt.b);
    for (int bi = 0; bi < zt.b; ++bi)
        std::memcpy(out.col(bi).data(), zt.sample(bi), static_cast<size_t>(mc_.d_latent) * sizeof(double));
    return out;
}

Tensor ForecastModel::encoder_backward(const Matrix& gz) {
    Tensor gzt(static_cast<int>(gz.cols()), mc_.d_latent, 1, 1);
    for (int bi = 0; bi < gzt.b; ++bi)
        std::memcpy(gzt.sample(bi), gz.col(bi).data(), static_cast<size_t>(mc_.d_latent) * sizeof(double));
    gzt = enc_head_bn_->backward(gzt);
    Matrix gz_mat(mc_.d_latent, gzt.b);
    for (int bi = 0; bi < gzt.b; ++bi)
        std::memcpy(gz_mat.col(bi).data(), gzt.sample(bi), static_cast<size_t>(mc_.d_latent) * sizeof(double));
    Matrix gflat = enc_head_->backward(gz_mat);

    const int s = mc_.encoder_out_hw();
    const int cn = mc_.enc_channels.back();
    Tensor gx(static_cast<int>(gflat.cols()), cn, s, s);
    for (int bi = 0; bi < gx.b; ++bi)
        std::memcpy(gx.sample(bi), gflat.col(bi).data(), gx.sample_size() * sizeof(double));
    for (int i = static_cast<int>(enc_convs_.size()) - 1; i >= 0; --i) {
        gx = enc_pools_[i].backward(gx);
        gx = enc_bns_[i].backward(gx);
        gx = enc_convs_[i].backward(gx);
    }
    return gx;
}

Tensor ForecastModel::decode(const Matrix& u, bool training) {
    const int s0 = mc_.decoder_stem_hw();
    Matrix p = dec_proj_->forward(u);
    Tensor x(static_cast<int>(p.cols()), mc_.dec_channels[0], s0, s0);
    for (int bi = 0; bi < x.b; ++bi)
        std::memcpy(x.sample(bi), p.col(bi).data(), x.sample_size() * sizeof(double));
    for (size_t i = 0; i < dec_convs_.size(); ++i) {
        x = dec_convs_[i].forward(x);
        if (i < dec_bns_.size()) x = dec_bns_[i].forward(x, training);
    }
    return x;
}

Matrix ForecastModel::decoder_backward(const Tensor& gy) {
    Tensor g = gy;
    for (int i = static_cast<int>(dec_convs_.size()) - 1; i >= 0; --i) {
        if (i < static_cast<int>(dec_bns_.size())) g = dec_bns_[i].backward(g);
        g = dec_convs_[i].backward(g);
    }
    Matrix gp(static_cast<Eigen::Index>(g.sample_size()), g.b);
    for (int bi = 0; bi < g.b; ++bi)
        std::memcpy(gp.col(bi).data(), g.sample(bi), g.sample_size() * sizeof(double));
    return dec_proj_->backward(gp);
}

std::vector<double> ForecastModel::time_embedding(const TimeOffsets& offsets) const {
    std::vector<double> out(mc_.time_dim, 0.0);
    if (tc_.use_tau) {
        const auto psi = encode_time(offsets.tau / 60.0, mc_.time_dim, mc_.sin_period);
        for (int i = 0; i < mc_.time_dim; ++i) out[i] += psi[i];
    }
    if (tc_.use_delta) {
        const auto big_psi = encode_time(offsets.delta / 60.0, mc_.time_dim, mc_.sin_period);
        for (int i = 0; i < mc_.time_dim; ++i) out[i] += big_psi[i];
    }
    return out;
}

double ForecastModel::pretrain_loss(const std::vector<const ThermalFrame*>& frames,
                                    bool with_grads) {
    const int b = static_cast<int>(frames.size());
    const Tensor target = preprocess_batch(frames);
    const Matrix z = encode_frames(target, true);
    Matrix u = Matrix::Zero(mc_.d_latent + mc_.time_dim, b);
    u.topRows(mc_.d_latent) = z;
    const Tensor recon = decode(u, true);

    double loss = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        const double d = target.data[i] - recon.data[i];
        loss += d * d;
    }
    loss /= b;

    if (with_grads) {
        Tensor grecon(recon.b, recon.c, recon.h, recon.w);
        for (size_t i = 0; i < recon.data.size(); ++i)
            grecon.data[i] = 2.0 / b * (recon.data[i] - target.data[i]);
        const Matrix gu = decoder_backward(grecon);
        encoder_backward(gu.topRows(mc_.d_latent));
    }
    return loss;
}

Tensor ForecastModel::forecast_forward(const std::vector<const ContextWindow*>& windows,
                                       bool training) {
    const int b = static_cast<int>(windows.size());
    const int k = static_cast<int>(windows[0]->context.size());
    for (const auto* w : windows)
        if (static_cast<int>(w->context.size()) != k)
            throw std::invalid_argument("forecast: ragged context lengths in batch");

    std::vector<const ThermalFrame*> ctx_frames;
    ctx_frames.reserve(static_cast<size_t>(b) * k);
    for (const auto* w : windows)
        for (const auto& e : w->context) ctx_frames.push_back(&w->day->samples[e.sample_index].frame);

    const Tensor ctx = preprocess_batch(ctx_frames);
    const Matrix z = encode_frames(ctx, training);  // d x (B*K), column b*K + k

    std::vector<Matrix> steps(k, Matrix(mc_.d_latent + mc_.time_dim, b));
    for (int bi = 0; bi < b; ++bi)
        for (int ki = 0; ki < k; ++ki) {
            steps[ki].col(bi).head(mc_.d_latent) = z.col(bi * k + ki);
            const auto emb = time_embedding(windows[bi]->context[ki].offsets);
            for (int j = 0; j < mc_.time_dim; ++j)
                steps[ki](mc_.d_latent + j, bi) = emb[j];
        }

    const Matrix c = lstm_->forward(steps, init_h_.value, init_c_.value);

    Matrix u(mc_.d_latent + mc_.time_dim, b);
    u.topRows(mc_.d_latent) = c;
    for (int bi = 0; bi < b; ++bi) {
        const auto emb = time_embedding(windows[bi]->target.offsets);
        for (int j = 0; j < mc_.time_dim; ++j) u(mc_.d_latent + j, bi) = emb[j];
    }
    last_batch_ = b;
    last_steps_ = k;
    return decode(u, training);
}

void ForecastModel::forecast_backward(const Tensor& gxhat) {
    const Matrix gu = decoder_backward(gxhat);
    const auto gsteps = lstm_->backward(gu.topRows(mc_.d_latent));
    Matrix gz(mc_.d_latent, static_cast<Eigen::Index>(last_batch_) * last_steps_);
    for (int bi = 0; bi < last_batch_; ++bi)
        for (int ki = 0; ki < last_steps_; ++ki)
            gz.col(bi * last_steps_ + ki) = gsteps[ki].col(bi).head(mc_.d_latent);
    encoder_backward(gz);
}

double ForecastModel::forecast_loss(const std::vector<const ContextWindow*>& windows,
                                    bool with_grads) {
    const int b = static_cast<int>(windows.size());
    std::vector<const ThermalFrame*> targets;
    targets.reserve(b);
    for (const auto* w : windows) targets.push_back(&w->target_sample().frame);
    const Tensor target = preprocess_batch(targets);
    const Tensor xhat = forecast_forward(windows, true);

    double loss = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        const double d = target.data[i] - xhat.data[i];
        loss += d * d;
    }
    loss /= b;

    if (with_grads) {
        Tensor gxhat(xhat.b, xhat.c, xhat.h, xhat.w);
        for (size_t i = 0; i < xhat.data.size(); ++i)
            gxhat.data[i] = 2.0 / b * (xhat.data[i] - target.data[i]);
        forecast_backward(gxhat);
    }
    return loss;
}

double ForecastModel::pretrain_step(const std::vector<const ThermalFrame*>& frames) {
    zero_grad();
    const double loss = pretrain_loss(frames, true);
    if (!std::isfinite(loss))
        throw NumericalError("pre-training loss went non-finite (lr too high or bad data)");
    adam_pretrain_->step();
    return loss;
}

double ForecastModel::train_step(const std::vector<const ContextWindow*>& windows) {
    zero_grad();
    const double loss = forecast_loss(windows, true);
    if (!std::isfinite(loss))
        throw NumericalError("training loss went non-finite (lr too high or bad data)");
    adam_full_->step();
    return loss;
}

double ForecastModel::score(const ContextWindow& window) {
    std::vector<const ContextWindow*> ws{&window};
    const Tensor xhat = forecast_forward(ws, false);
    const Tensor target = preprocess_batch({&window.target_sample().frame});
    double s = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        const double d = target.data[i] - xhat.data[i];
        s += d * d;
    }
    return s;
}

Tensor ForecastModel::forecast(const ContextWindow& window) {
    std::vector<const ContextWindow*> ws{&window};
    return forecast_forward(ws, false);
}

Vector ForecastModel::encode_context(const ContextWindow& window) {
    const int k = static_cast<int>(window.context.size());
    std::vector<const ThermalFrame*> frames;
    frames.reserve(k);
    for (const auto& e : window.context)
        frames.push_back(&window.day->samples[e.sample_index].frame);
    const Tensor ctx = preprocess_batch(frames);
    const Matrix z = encode_frames(ctx, false);
    std::vector<Matrix> steps(k, Matrix(mc_.d_latent + mc_.time_dim, 1));
    for (int ki = 0; ki < k; ++ki) {
        steps[ki].col(0).head(mc_.d_latent) = z.col(ki);
        const auto emb = time_embedding(window.context[ki].offsets);
        for (int j = 0; j < mc_.time_dim; ++j) steps[ki](mc_.d_latent + j, 0) = emb[j];
    }
    return lstm_->forward(steps, init_h_.value, init_c_.value).col(0);
}

double ForecastModel::reconstruction_error(const ThermalFrame& frame) {
    const Tensor target = preprocess_batch({&frame});
    const Matrix z = encode_frames(target, false);
    Matrix u = Matrix::Zero(mc_.d_latent + mc_.time_dim, 1);
    u.topRows(mc_.d_latent) = z;
    const Tensor recon = decode(u, false);
    double s = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        const double d = target.data[i] - recon.data[i];
        s += d * d;
    }
    return s;
}

// ------------------------------------------------------------ anomaly maps

std::vector<double> anomaly_map_raw(const Tensor& x, const Tensor& xhat, double sigma) {
    if (x.b != 1 || xhat.b != 1 || x.data.size() != xhat.data.size())
        throw std::invalid_argument("anomaly_map_raw: expects matching single-sample tensors");
    const int h = x.h, w = x.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> map(plane, 0.0);
    for (int ci = 0; ci < x.c; ++ci)
        for (size_t i = 0; i < plane; ++i) {
            const double d = x.data[ci * plane + i] - xhat.data[ci * plane + i];
            map[i] += d * d / x.c;
        }

    // separable Gaussian, radius 2*sigma, zero padding
    const int radius = static_cast<int>(std::ceil(2.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        kernel[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));
        ksum += kernel[d + radius];
    }
    for (auto& v : kernel) v /= ksum;

    std::vector<double> tmp(plane, 0.0), out(plane, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const int cc = c + d;
                if (cc >= 0 && cc < w) s += kernel[d + radius] * map[static_cast<size_t>(r) * w + cc];
            }
            tmp[static_cast<size_t>(r) * w + c] = s;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const int rr = r + d;
                if (rr >= 0 && rr < h) s += kernel[d + radius] * tmp[static_cast<size_t>(rr) * w + c];
            }
            out[static_cast<size_t>(r) * w + c] = s;
        }
    return out;
}

std::vector<double> normalize_map(const std::vector<double>& raw, const MapStats& stats) {
    std::vector<double> out(raw.size(), 0.0);
    if (!(stats.max > stats.min)) return out;  // degenerate stats: all zeros
    for (size_t i = 0; i < raw.size(); ++i)
        out[i] = std::clamp((raw[i] - stats.min) / (stats.max - stats.min), 0.0, 1.0);
    return out;
}

// --------------------------------------------------------- training drivers

std::vector<DaySequence> apply_setup_filter(const std::vector<DaySequence>& days, SetupTag setup) {
    if (setup == SetupTag::Tr2) return days;
    std::vector<DaySequence> out;
    for (const auto& day : days) {
        DaySequence filtered;
        filtered.day_id = day.day_id;
        for (const auto& s : day.samples)
            if (s.segment == Segment::M) filtered.samples.push_back(s);
        if (!filtered.empty()) out.push_back(std::move(filtered));
    }
    return out;
}

namespace {

template <typename T>
void shuffle_indices(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.uniform_int(0, static_cast<int>(i) - 1)]);
}

}  // namespace

void run_pretrain(ForecastModel& model, const std::vector<DaySequence>& days,
                  std::vector<double>* epoch_losses) {
    std::vector<const ThermalFrame*> frames;
    for (const auto& day : days)
        for (const auto& s : day.samples) frames.push_back(&s.frame);
    if (frames.size() < 2) throw std::invalid_argument("run_pretrain: need at least two frames");

    const auto& tc = model.train_config();
    Rng rng(splitmix64(tc.seed ^ 0x9e7ea11ULL));
    std::vector<size_t> order(frames.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.pretrain_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double total = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += tc.batch_size) {
            const size_t end = std::min(order.size(), start + tc.batch_size);
            if (end - start < 2) break;  // batch norm needs more than one sample
            std::vector<const ThermalFrame*> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(frames[order[i]]);
            total += model.pretrain_step(batch);
            ++batches;
        }
        if (epoch_losses) epoch_losses->push_back(batches ? total / batches : 0.0);
    }
}

void run_train(ForecastModel& model, const std::vector<DaySequence>& days,
               std::vector<double>* epoch_losses) {
    const auto& tc = model.train_config();
    std::vector<ContextWindow> windows;
    for (const auto& day : days) {
        auto ws = build_context_windows(day, tc.context_length);
        for (auto& w : ws) windows.push_back(std::move(w));
    }
    if (windows.size() < 2) throw std::invalid_argument("run_train: need at least two windows");

    Rng rng(splitmix64(tc.seed ^ 0x7a41ULL));
    std::vector<size_t> order(windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.train_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double total = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += tc.batch_size) {
            const size_t end = std::min(order.size(), start + tc.batch_size);
            if (end - start < 2) break;
            std::vector<const ContextWindow*> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(&windows[order[i]]);
            total += model.train_step(batch);
            ++batches;
        }
        if (epoch_losses) epoch_losses->push_back(batches ? total / batches : 0.0);
    }
}

std::vector<ScoreRow> score_days(ForecastModel& model, const std::vector<DaySequence>& days) {
    std::vector<ScoreRow> rows;
    const int k = model.train_config().context_length;
    for (const auto& day : days) {
        const auto windows = build_context_windows(day, k);
        for (const auto& w : windows) {
            const auto& s = w.target_sample();
            rows.push_back({day.day_id, s.t, model.score(w), s.y, s.segment});
        }
    }
    return rows;
}

// -------------------------------------------------------------- checkpoints

namespace {

nlohmann::json model_config_to_json(const ModelConfig& mc) {
    return {{"input_hw", mc.input_hw},       {"enc_channels", mc.enc_channels},
            {"d_latent", mc.d_latent},       {"dec_channels", mc.dec_channels},
            {"time_dim", mc.time_dim},       {"sin_period", mc.sin_period},
            {"lstm_layers", mc.lstm_layers}, {"kernel", mc.kernel},
            {"bn_eps", mc.bn_eps},           {"zero_init_state", mc.zero_init_state}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig mc;
    mc.input_hw = j.at("input_hw");
    mc.enc_channels = j.at("enc_channels").get<std::vector<int>>();
    mc.d_latent = j.at("d_latent");
    mc.dec_channels = j.at("dec_channels").get<std::vector<int>>();
    mc.time_dim = j.at("time_dim");
    mc.sin_period = j.at("sin_period");
    mc.lstm_layers = j.at("lstm_layers");
    mc.kernel = j.at("kernel");
    mc.bn_eps = j.at("bn_eps");
    mc.zero_init_state = j.at("zero_init_state");
    return mc;
}

nlohmann::json train_config_to_json(const TrainConfig& tc) {
    return {{"lr", tc.lr},
            {"weight_decay", tc.weight_decay},
            {"batch_size", tc.batch_size},
            {"pretrain_epochs", tc.pretrain_epochs},
            {"train_epochs", tc.train_epochs},
            {"context_length", tc.context_length},
            {"seed", tc.seed},
            {"use_tau", tc.use_tau},
            {"use_delta", tc.use_delta},
            {"use_pretrained", tc.use_pretrained}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig tc;
    tc.lr = j.at("lr");
    tc.weight_decay = j.at("weight_decay");
    tc.batch_size = j.at("batch_size");
    tc.pretrain_epochs = j.at("pretrain_epochs");
    tc.train_epochs = j.at("train_epochs");
    tc.context_length = j.at("context_length");
    tc.seed = j.at("seed");
    tc.use_tau = j.at("use_tau");
    tc.use_delta = j.at("use_delta");
    tc.use_pretrained = j.at("use_pretrained");
    return tc;
}

void write_blob(std::ostream& os, const std::string& name, const Matrix& m) {
    const auto name_len = static_cast<uint16_t>(name.size());
    os.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    os.write(name.data(), name_len);
    const uint32_t rows = static_cast<uint32_t>(m.rows());
    const uint32_t cols = static_cast<uint32_t>(m.cols());
    os.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    os.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

std::pair<std::string, Matrix> read_blob(std::istream& is) {
    uint16_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rows = 0, cols = 0;
    is.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    is.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Matrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    return {std::move(name), std::move(m)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model) {
    auto& m = const_cast<ForecastModel&>(model);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error(tmp.string() + ": cannot open for writing");
        os.write("FADC", 4);
        const uint16_t version = kCheckpointVersion;
        os.write(reinterpret_cast<const char*>(&version), sizeof(version));
        nlohmann::json j;
        j["model"] = model_config_to_json(model.model_config());
        j["train"] = train_config_to_json(model.train_config());
        j["stats"] = {{"min", model.stats().min}, {"max", model.stats().max}};
        const std::string js = j.dump();
        const uint32_t js_len = static_cast<uint32_t>(js.size());
        os.write(reinterpret_cast<const char*>(&js_len), sizeof(js_len));
        os.write(js.data(), js_len);

        const auto params = m.parameters();
        const auto bufs = m.buffers();
        const uint32_t n_params = static_cast<uint32_t>(params.size());
        const uint32_t n_bufs = static_cast<uint32_t>(bufs.size());
        os.write(reinterpret_cast<const char*>(&n_params), sizeof(n_params));
        for (auto* p : params) write_blob(os, p->name, p->value);
        os.write(reinterpret_cast<const char*>(&n_bufs), sizeof(n_bufs));
        for (auto* b : bufs) write_blob(os, b->name, b->value);
        if (!os) throw std::runtime_error(tmp.string() + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

ForecastModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path.string() + ": cannot open checkpoint");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FADC", 4) != 0)
        throw std::runtime_error(path.string() + ": not a checkpoint file");
    uint16_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version");
    uint32_t js_len = 0;
    is.read(reinterpret_cast<char*>(&js_len), sizeof(js_len));
    std::string js(js_len, '\0');
    is.read(js.data(), js_len);
    const auto j = nlohmann::json::parse(js);
    const auto mc = model_config_from_json(j.at("model"));
    const auto tc = train_config_from_json(j.at("train"));
    const PreprocessStats stats{j.at("stats").at("min"), j.at("stats").at("max")};

    ForecastModel model(mc, tc, stats);
    uint32_t n_params = 0;
    is.read(reinterpret_cast<char*>(&n_params), sizeof(n_params));
    auto params = model.parameters();
    for (uint32_t i = 0; i < n_params; ++i) {
        auto [name, value] = read_blob(is);
        bool found = false;
        for (auto* p : params)
            if (p->name == name) {
                if (p->value.rows() != value.rows() || p->value.cols() != value.cols())
                    throw std::runtime_error("checkpoint: shape mismatch for " + name);
                p->value = std::move(value);
                found = true;
                break;
            }
        if (!found) throw std::runtime_error("checkpoint: unknown parameter " + name);
    }
    uint32_t n_bufs = 0;
    is.read(reinterpret_cast<char*>(&n_bufs), sizeof(n_bufs));
    auto bufs = model.buffers();
    for (uint32_t i = 0; i < n_bufs; ++i) {
        auto [name, value] = read_blob(is);
        bool found = false;
        for (auto* b : bufs)
            if (b->name == name) {
                b->value = std::move(value);
                found = true;
                break;
            }
        if (!found) throw std::runtime_error("checkpoint: unknown buffer " + name);
    }
    if (!is) throw std::runtime_error(path.string() + ": truncated checkpoint");
    return model;
}

}  // namespace forecastad

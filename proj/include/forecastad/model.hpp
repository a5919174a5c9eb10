#pragma once

#include "forecastad/context.hpp"
#include "forecastad/nn.hpp"
#include "forecastad/types.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace forecastad {

struct PreprocessStats {
    double min = 0.0;
    double max = 1.0;
};

/// Global min/max over every pixel of the given days (the training set).
PreprocessStats compute_preprocess_stats(const std::vector<DaySequence>& days);

/// Bilinear resize (pixel-center alignment) to out_h x out_w.
std::vector<double> bilinear_resize(const ThermalFrame& frame, int out_h, int out_w);

/// Resize to hw x hw, min-max normalize into [0,1] (clamped), replicate the
/// thermal channel to 3 channels. Output is c-major, size 3*hw*hw.
std::vector<double> preprocess(const ThermalFrame& frame, const PreprocessStats& stats, int hw);

/// Sinusoidal time encoding of a scalar in minutes: component 2j is
/// sin(s / period^(2j/dim)), component 2j+1 the matching cosine.
std::vector<double> encode_time(double minutes, int dim = 16, double period = 1000.0);

struct ModelConfig {
    int input_hw = 256;
    std::vector<int> enc_channels = {32, 64, 128, 128};
    int d_latent = 128;  // also the LSTM hidden size
    std::vector<int> dec_channels = {128, 64, 64, 32, 3};  // transposed-conv chain
    int time_dim = 16;
    double sin_period = 1000.0;
    int lstm_layers = 4;
    int kernel = 5;
    double bn_eps = 1e-4;
    bool zero_init_state = false;  // use zeros instead of the random LSTM start state

    static ModelConfig full();
    static ModelConfig desk();
    static ModelConfig tiny();

    int encoder_blocks() const { return static_cast<int>(enc_channels.size()); }
    int decoder_blocks() const { return static_cast<int>(dec_channels.size()) - 1; }
    /// Spatial side of the flattened encoder output / decoder stem; derived
    /// from the stride-2 conv + 2x2 pool arithmetic and checked at build time.
    int encoder_out_hw() const;
    int decoder_stem_hw() const;
    void validate() const;
};

struct TrainConfig {
    double lr = 0.001;
    double weight_decay = 1e-5;
    int batch_size = 32;
    int pretrain_epochs = 20;
    int train_epochs = 20;
    int context_length = 30;  // K
    uint64_t seed = 1;
    bool use_tau = true;
    bool use_delta = true;
    bool use_pretrained = true;

    void validate() const;
};

/// Raised when a training loss goes non-finite.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ForecastModel {
public:
    ForecastModel(const ModelConfig& mc, const TrainConfig& tc, const PreprocessStats& stats);

    // --- training ---------------------------------------------------------
    /// One Adam step of the reconstruction (pre-training) objective on a
    /// batch of frames; returns the batch loss.
    double pretrain_step(const std::vector<const ThermalFrame*>& frames);
    /// One Adam step of the forecasting objective; returns the batch loss.
    double train_step(const std::vector<const ContextWindow*>& windows);

    // --- inference (eval mode, frozen statistics) ---------------------------
    /// Anomaly score: squared Frobenius norm between the preprocessed target
    /// and its forecast.
    double score(const ContextWindow& window);
    /// Forecast for one window, as a 3 x hw x hw tensor (batch of 1).
    nn::Tensor forecast(const ContextWindow& window);
    /// Context embedding c for one window (d_latent entries).
    nn::Vector encode_context(const ContextWindow& window);
    /// Plain autoencoder reconstruction error of a single frame.
    double reconstruction_error(const ThermalFrame& frame);

    // --- loss/grad entry points used by the finite-difference checks --------
    double pretrain_loss(const std::vector<const ThermalFrame*>& frames, bool with_grads);
    double forecast_loss(const std::vector<const ContextWindow*>& windows, bool with_grads);

    std::vector<nn::Parameter*> parameters();
    std::vector<nn::Buffer*> buffers();
    void zero_grad();
    void adam_step_pretrain();  // steps encoder+decoder parameters only
    void adam_step_full();

    /// Copies encoder/decoder weights and normalization buffers from a
    /// pre-trained model (the use_pretrained path).
    void load_backbone(const ForecastModel& pretrained);

    const ModelConfig& model_config() const { return mc_; }
    const TrainConfig& train_config() const { return tc_; }
    const PreprocessStats& stats() const { return stats_; }

    std::vector<double> time_embedding(const TimeOffsets& offsets) const;

private:
    friend void save_checkpoint(const std::filesystem::path&, const ForecastModel&);
    friend ForecastModel load_checkpoint(const std::filesystem::path&);

    nn::Matrix encode_frames(const nn::Tensor& frames, bool training);
    nn::Tensor encoder_backward(const nn::Matrix& gz);
    nn::Tensor decode(const nn::Matrix& u, bool training);
    nn::Matrix decoder_backward(const nn::Tensor& gy);
    nn::Tensor preprocess_batch(const std::vector<const ThermalFrame*>& frames) const;
    /// Forward pass of the forecaster over a batch of windows. Returns x-hat.
    nn::Tensor forecast_forward(const std::vector<const ContextWindow*>& windows, bool training);
    void forecast_backward(const nn::Tensor& gxhat);

    ModelConfig mc_;
    TrainConfig tc_;
    PreprocessStats stats_;

    // encoder
    std::vector<nn::Conv2d> enc_convs_;
    std::vector<nn::BatchNorm> enc_bns_;
    std::vector<nn::MaxPool2d> enc_pools_;
    std::unique_ptr<nn::Linear> enc_head_;
    std::unique_ptr<nn::BatchNorm> enc_head_bn_;

    // decoder (projection shared between pre-training and forecasting)
    std::unique_ptr<nn::Linear> dec_proj_;
    std::vector<nn::ConvTranspose2d> dec_convs_;
    std::vector<nn::BatchNorm> dec_bns_;

    // context encoder
    std::unique_ptr<nn::Lstm> lstm_;
    nn::Buffer init_h_;  // hidden x layers
    nn::Buffer init_c_;

    std::unique_ptr<nn::Adam> adam_pretrain_;
    std::unique_ptr<nn::Adam> adam_full_;

    int last_batch_ = 0, last_steps_ = 0;  // shape of the last forecast forward
};

constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model);
ForecastModel load_checkpoint(const std::filesystem::path& path);

/// Per-pixel squared forecast error (channel-averaged), Gaussian-smoothed
/// with sigma and kernel radius 2*sigma. x and xhat are 3 x hw x hw batches
/// of one.
std::vector<double> anomaly_map_raw(const nn::Tensor& x, const nn::Tensor& xhat,
                                    double sigma = 4.0);

struct MapStats {
    double min = 0.0;
    double max = 1.0;
};

/// Normalizes a raw map to [0,1] with validation-set min/max; degenerate
/// stats yield an all-zeros map.
std::vector<double> normalize_map(const std::vector<double>& raw, const MapStats& stats);

// --- training drivers -------------------------------------------------------

/// Under Tr#1 restricts days to their M-segment samples; Tr#2 keeps all.
std::vector<DaySequence> apply_setup_filter(const std::vector<DaySequence>& days, SetupTag setup);

/// Pre-training (reconstruction objective) over all frames of the given days.
void run_pretrain(ForecastModel& model, const std::vector<DaySequence>& days,
                  std::vector<double>* epoch_losses = nullptr);

/// Forecast training over context windows built per day.
void run_train(ForecastModel& model, const std::vector<DaySequence>& days,
               std::vector<double>* epoch_losses = nullptr);

struct ScoreRow {
    std::string day_id;
    double t = 0.0;
    double score = 0.0;
    Label y = Label::Unlabeled;
    Segment segment = Segment::Unassigned;
};

/// Forecast anomaly scores for every sample of the given days.
std::vector<ScoreRow> score_days(ForecastModel& model, const std::vector<DaySequence>& days);

}  // namespace forecastad

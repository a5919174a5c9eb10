#pragma once

#include "forecastad/dayfile.hpp"
#include "forecastad/rng.hpp"
#include "forecastad/types.hpp"

#include <array>
#include <filesystem>

namespace forecastad {

/// Parametric generator of synthetic operational days: ramp-up (S), plateau
/// with a flow-direction gradient (M), ramp-down (E), irregular sampling, and
/// injected ground-truth anomalies.
struct SimConfig {
    int height = 64;
    int width = 64;
    double day_length = 36000.0;        // seconds of operation per day
    double interarrival_min = 60.0;     // seconds
    double interarrival_max = 300.0;
    double base_temp = 40.0;            // degC at the cold ends of the cycle
    double peak_temp = 400.0;           // plateau temperature
    double ramp_fraction = 0.15;        // fraction of the day in each of S and E
    double gradient_span = 60.0;        // degC across the width axis at full plateau
    double pixel_noise_sd = 2.0;
    double anomaly_rate = 0.08;         // per-sample probability on non-clean days
    double clean_day_fraction = 0.5;    // fraction of days generated anomaly-free
    double anomaly_delta = 80.0;        // magnitude of localized injections
    // plateau (M) anomaly mix: streak/patch/drop/spot. Ramp samples instead
    // get schedule anomalies: resets to the segment start (S and E) and
    // early temperature drops (S).
    std::array<double, 4> kind_weights = {0.25, 0.25, 0.25, 0.25};
    uint64_t seed = 1;

    void validate() const;
};

/// Deterministic in (config.seed, day_index).
DaySequence simulate_day(const SimConfig& config, int day_index);

/// Clean-frame template: the frame simulate_day would emit at elapsed time
/// `delta` with zero noise and no anomaly. Exposed for oracle tests.
ThermalFrame clean_frame(const SimConfig& config, double delta);

/// Mean temperature of the clean template at elapsed time `delta`.
double schedule_mean_temp(const SimConfig& config, double delta);

/// Ground-truth segment for elapsed time `delta` within the schedule.
Segment schedule_segment(const SimConfig& config, double delta);

/// Applies one anomaly transform; output pixels are clamped to >= 0.
ThermalFrame inject_anomaly(const ThermalFrame& frame, AnomalyKind kind, Rng& rng,
                            const SimConfig& config);

/// Writes n_days day files plus a manifest (all days listed as "train";
/// the split command rewrites membership).
Manifest simulate_dataset(const SimConfig& config, int n_days,
                          const std::filesystem::path& out_dir);

}  // namespace forecastad

#include "forecastad/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace forecastad {

void SimConfig::validate() const {
    if (height <= 0 || width <= 0) throw std::invalid_argument("sim: frame dims must be positive");
    if (!(interarrival_min > 0.0) || interarrival_min > interarrival_max)
        throw std::invalid_argument("sim: need 0 < interarrival_min <= interarrival_max");
    if (!(ramp_fraction > 0.0 && ramp_fraction < 0.5))
        throw std::invalid_argument("sim: ramp_fraction must be in (0, 0.5)");
    if (!(peak_temp > base_temp)) throw std::invalid_argument("sim: peak_temp must exceed base_temp");
    if (anomaly_rate < 0.0 || anomaly_rate > 1.0 || clean_day_fraction < 0.0 ||
        clean_day_fraction > 1.0)
        throw std::invalid_argument("sim: rates must be in [0, 1]");
    if (pixel_noise_sd < 0.0) throw std::invalid_argument("sim: pixel_noise_sd must be >= 0");
}

double schedule_mean_temp(const SimConfig& c, double delta) {
    const double ramp = c.ramp_fraction * c.day_length;
    double mu;
    if (delta < ramp) {
        mu = c.base_temp + (c.peak_temp - c.base_temp) * delta / ramp;
    } else if (delta > c.day_length - ramp) {
        mu = c.base_temp + (c.peak_temp - c.base_temp) * (c.day_length - delta) / ramp;
    } else {
        mu = c.peak_temp;
    }
    return std::max(mu, c.base_temp);
}

Segment schedule_segment(const SimConfig& c, double delta) {
    const double ramp = c.ramp_fraction * c.day_length;
    if (delta < ramp) return Segment::S;
    if (delta > c.day_length - ramp) return Segment::E;
    return Segment::M;
}

ThermalFrame clean_frame(const SimConfig& c, double delta) {
    const double mu = schedule_mean_temp(c, delta);
    // The flow-direction gradient fades in with the plateau level, so S/E
    // frames stay close to spatially uniform.
    const double gradient_weight = (mu - c.base_temp) / (c.peak_temp - c.base_temp);
    ThermalFrame frame(c.height, c.width);
    for (int col = 0; col < c.width; ++col) {
        const double axis = c.width > 1 ? static_cast<double>(col) / (c.width - 1) - 0.5 : 0.0;
        const float v = static_cast<float>(
            std::max(0.0, mu + c.gradient_span * axis * gradient_weight));
        for (int row = 0; row < c.height; ++row) frame.at(row, col) = v;
    }
    return frame;
}

ThermalFrame inject_anomaly(const ThermalFrame& frame, AnomalyKind kind, Rng& rng,
                            const SimConfig& c) {
    ThermalFrame out = frame;
    const int h = out.height, w = out.width;
    switch (kind) {
        case AnomalyKind::FreezeStreak: {
            const int bands = rng.uniform_int(1, 3);
            for (int b = 0; b < bands; ++b) {
                const int band_width = rng.uniform_int(2, std::min(5, w));
                const int start = rng.uniform_int(0, w - band_width);
                for (int row = 0; row < h; ++row)
                    for (int col = start; col < start + band_width; ++col)
                        out.at(row, col) += static_cast<float>(c.anomaly_delta);
            }
            break;
        }
        case AnomalyKind::ColdPatch: {
            const double area_fraction = rng.uniform(0.05, 0.15);
            const double aspect = rng.uniform(0.5, 2.0);
            int rect_w = static_cast<int>(std::lround(std::sqrt(area_fraction * h * w * aspect)));
            rect_w = std::clamp(rect_w, 1, w);
            int rect_h = static_cast<int>(std::lround(area_fraction * h * w / rect_w));
            rect_h = std::clamp(rect_h, 1, h);
            const int r0 = rng.uniform_int(0, h - rect_h);
            const int c0 = rng.uniform_int(0, w - rect_w);
            for (int row = r0; row < r0 + rect_h; ++row)
                for (int col = c0; col < c0 + rect_w; ++col)
                    out.at(row, col) -= static_cast<float>(c.anomaly_delta);
            break;
        }
        case AnomalyKind::GlobalDrop: {
            const double factor = rng.uniform(0.5, 0.8);
            const double drop = factor * std::max(0.0, out.mean() - c.base_temp);
            for (auto& v : out.pixels) v -= static_cast<float>(drop);
            break;
        }
        case AnomalyKind::HotSpot: {
            const int max_radius = std::max(3, std::min(h, w) / 8);
            const int radius = rng.uniform_int(2, max_radius);
            const int cy = rng.uniform_int(0, h - 1);
            const int cx = rng.uniform_int(0, w - 1);
            for (int row = 0; row < h; ++row)
                for (int col = 0; col < w; ++col)
                    if ((row - cy) * (row - cy) + (col - cx) * (col - cx) <= radius * radius)
                        out.at(row, col) += static_cast<float>(c.anomaly_delta);
            break;
        }
        default:
            throw std::invalid_argument("inject_anomaly: unknown anomaly kind");
    }
    for (auto& v : out.pixels) v = std::max(v, 0.0f);
    return out;
}

namespace {

AnomalyKind pick_kind(Rng& rng, const std::array<double, 4>& weights) {
    double total = 0.0;
    for (double wgt : weights) total += wgt;
    if (total <= 0.0) throw std::invalid_argument("sim: kind_weights must not all be zero");
    double u = rng.uniform() * total;
    for (int i = 0; i < 4; ++i) {
        u -= weights[i];
        if (u < 0.0) return static_cast<AnomalyKind>(i + 1);
    }
    return AnomalyKind::HotSpot;
}

}  // namespace

DaySequence simulate_day(const SimConfig& config, int day_index) {
    config.validate();
    Rng rng(splitmix64(config.seed ^ splitmix64(static_cast<uint64_t>(day_index) + 0x5eedULL)));

    const bool clean_day = rng.uniform() < config.clean_day_fraction;

    std::vector<double> offsets{0.0};
    for (double t = rng.uniform(config.interarrival_min, config.interarrival_max);
         t <= config.day_length;
         t += rng.uniform(config.interarrival_min, config.interarrival_max))
        offsets.push_back(t);

    DaySequence day;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "day_%04d", day_index);
    day.day_id = buf;
    const double day_start = static_cast<double>(day_index) * 86400.0 + 6.0 * 3600.0;

    day.samples.reserve(offsets.size());
    for (size_t i = 0; i < offsets.size(); ++i) {
        const double delta = offsets[i];
        Sample s;
        s.day_id = day.day_id;
        s.t = day_start + delta;
        s.segment = schedule_segment(config, delta);
        s.frame = clean_frame(config, delta);
        for (auto& v : s.frame.pixels)
            v = std::max(0.0f, v + static_cast<float>(rng.normal(0.0, config.pixel_noise_sd)));
        // Ramp anomalies only once the previous sample has progressed at
        // least 30% along its ramp; before that a schedule failure is
        // indistinguishable from the segment's normal starting state.
        bool eligible = i > 0;
        if (eligible && s.segment != Segment::M) {
            const double anchor =
                s.segment == Segment::S ? config.base_temp : config.peak_temp;
            const double progress =
                std::abs(schedule_mean_temp(config, offsets[i - 1]) - anchor);
            eligible = progress > 0.3 * (config.peak_temp - config.base_temp);
        }
        const bool anomalous = eligible && !clean_day && rng.uniform() < config.anomaly_rate;
        if (anomalous) {
            // Localized defects show up during stable plateau operation; on
            // the ramps the failure mode is the schedule itself going wrong
            // (the process reverting to the segment's start, or the
            // temperature collapsing early).
            if (s.segment == Segment::M)
                s.anomaly_kind = pick_kind(rng, config.kind_weights);
            else if (s.segment == Segment::S)
                s.anomaly_kind = rng.uniform() < 0.5 ? AnomalyKind::GlobalDrop
                                                     : AnomalyKind::ScheduleReset;
            else
                s.anomaly_kind = AnomalyKind::ScheduleReset;
            if (s.anomaly_kind == AnomalyKind::ScheduleReset) {
                // the process falls back along its schedule: the frame shows
                // the state from several minutes earlier (colder in the
                // ramp-up, hotter in the ramp-down). Spatially a perfectly
                // normal frame, just at the wrong time.
                const double slip = rng.uniform(450.0, 750.0);
                const double reset_delta = std::max(0.0, delta - slip);
                s.frame = clean_frame(config, reset_delta);
                for (auto& v : s.frame.pixels)
                    v = std::max(0.0f,
                                 v + static_cast<float>(rng.normal(0.0, config.pixel_noise_sd)));
            } else {
                s.frame = inject_anomaly(s.frame, s.anomaly_kind, rng, config);
            }
            s.y = Label::Anomalous;
        } else {
            s.anomaly_kind = AnomalyKind::None;
            s.y = Label::Normal;
        }
        day.samples.push_back(std::move(s));
    }
    return day;
}

Manifest simulate_dataset(const SimConfig& config, int n_days,
                          const std::filesystem::path& out_dir) {
    if (n_days < 1) throw std::invalid_argument("simulate_dataset: n_days must be >= 1");
    std::filesystem::create_directories(out_dir);
    Manifest manifest;
    for (int d = 0; d < n_days; ++d) {
        const auto day = simulate_day(config, d);
        const auto file = day.day_id + ".fcad";
        write_day_file(out_dir / file, day);
        manifest.train.push_back(file);
    }
    write_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace forecastad

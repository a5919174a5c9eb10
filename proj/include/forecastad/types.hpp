#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace forecastad {

/// One H x W grid of surface temperatures in degrees Celsius, row-major.
struct ThermalFrame {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // size height * width

    ThermalFrame() = default;
    ThermalFrame(int h, int w, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("ThermalFrame: dims must be positive");
    }

    float& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return pixels.size(); }

    double mean() const {
        double s = 0.0;
        for (float v : pixels) s += v;
        return pixels.empty() ? 0.0 : s / static_cast<double>(pixels.size());
    }
};

enum class Label : int8_t { Normal = 0, Anomalous = 1, Unlabeled = -1 };

enum class Segment : int8_t { Unassigned = -1, S = 0, M = 1, E = 2 };

enum class AnomalyKind : uint8_t {
    None = 0,
    FreezeStreak = 1,
    ColdPatch = 2,
    GlobalDrop = 3,
    HotSpot = 4,
    ScheduleReset = 5,  // frame falls back several minutes in the schedule (ramps only)
};

std::string to_string(Segment s);
std::string to_string(AnomalyKind k);

struct Sample {
    ThermalFrame frame;
    double t = 0.0;  // seconds since epoch
    Label y = Label::Unlabeled;
    Segment segment = Segment::Unassigned;
    std::string day_id;
    AnomalyKind anomaly_kind = AnomalyKind::None;
};

/// Strictly time-ordered samples of one operational day.
struct DaySequence {
    std::string day_id;
    std::vector<Sample> samples;

    bool empty() const { return samples.empty(); }
    size_t size() const { return samples.size(); }
    double t0() const {
        if (samples.empty()) throw std::logic_error("DaySequence::t0 on empty day");
        return samples.front().t;
    }
    /// Throws if timestamps are not strictly increasing, naming the offending index.
    void validate() const;
};

enum class SetupTag { Tr1, Tr2 };

std::string to_string(SetupTag t);
SetupTag setup_tag_from_string(const std::string& s);

/// Disjoint-by-day train / validation / test sets.
struct DatasetSplit {
    std::vector<DaySequence> train;       // D_N, all-normal
    std::vector<DaySequence> validation;  // D_V
    std::vector<DaySequence> test;        // D_T
    SetupTag setup = SetupTag::Tr2;
};

struct CoreConfig {
    int context_length = 30;  // K
    double epsilon = 1e-5;    // tau/delta stand-in for the first sample of a day
};

}  // namespace forecastad

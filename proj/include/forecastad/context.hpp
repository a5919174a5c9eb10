#pragma once

#include "forecastad/types.hpp"

namespace forecastad {

struct TimeOffsets {
    double tau = 0.0;    // inter-arrival time, seconds
    double delta = 0.0;  // elapsed time since the day's first sample, seconds
};

/// Per-sample (tau, delta) offsets for one day. The first sample of a day
/// gets tau = delta = epsilon.
std::vector<TimeOffsets> compute_time_offsets(const DaySequence& day, double epsilon = 1e-5);

struct ContextEntry {
    int sample_index = 0;  // index into the day's samples
    TimeOffsets offsets;
    bool padding = false;  // duplicated first sample
};

/// The K entries preceding one target sample, plus the target itself.
struct ContextWindow {
    const DaySequence* day = nullptr;
    std::vector<ContextEntry> context;  // exactly K entries, oldest first
    ContextEntry target;

    const Sample& context_sample(int k) const { return day->samples[context[k].sample_index]; }
    const Sample& target_sample() const { return day->samples[target.sample_index]; }
};

/// One window per sample of the day. Windows never cross day boundaries;
/// short histories are front-padded with the day's first sample.
std::vector<ContextWindow> build_context_windows(const DaySequence& day, int K,
                                                 double epsilon = 1e-5);

}  // namespace forecastad

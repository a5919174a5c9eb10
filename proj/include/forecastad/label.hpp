#pragma once

#include "forecastad/types.hpp"

#include <optional>

namespace forecastad {

struct LabelConfig {
    double r1_pair_percentile = 95.0;     // percentile of pixel-wise squared diffs per pair
    double r1_dataset_percentile = 99.9;  // dataset-level flag threshold for R1 and R3
    double r2_percentile = 1.0;           // flag scores below this dataset percentile
    int r3_template_count = 5;
    double r4_horizontal_threshold = 13.5;  // ~99.5th pct of clean simulated frames
    double r4_vertical_threshold = 9.0;
    double trend_threshold = 5.0;  // degC over trend_window samples
    int trend_window = 1;          // immediate predecessor: recovers right after an anomaly
    int min_day_samples = 20;
    double m_plateau_fraction = 0.9;
    int smoothing_window = 5;  // centered moving median for segmentation

    void validate() const;
};

struct FilterResult {
    std::vector<DaySequence> kept;
    std::vector<std::pair<DaySequence, std::string>> dropped;  // day + reason
};

/// Drops days with too few samples or a consistently low M-segment
/// temperature. Days without segments are segmented first.
FilterResult filter_days(std::vector<DaySequence> days, const LabelConfig& config);

/// Assigns S/M/E segments from the smoothed mean-temperature profile:
/// M is the longest run at >= m_plateau_fraction of the peak, S before, E after.
void segment_day(DaySequence& day, const LabelConfig& config);

/// Dataset-level rule output: one entry per (day, sample); nullopt where the
/// rule does not apply. `flags` is index-aligned with `scores`.
struct RuleScores {
    std::vector<std::vector<std::optional<double>>> scores;
    std::vector<std::vector<bool>> flags;
    double threshold = 0.0;  // dataset-level threshold actually used
};

/// R1: 95th percentile of pixel-wise squared diffs between consecutive
/// M-segment frames; flagged above the dataset's 99.9th score percentile.
RuleScores rule_r1(const std::vector<DaySequence>& days, const LabelConfig& config);

/// R2: frame mean minus the day's M-segment mean; flagged below the
/// dataset's 1st score percentile.
RuleScores rule_r2(const std::vector<DaySequence>& days, const LabelConfig& config);

/// R3: mean R1-style score against the day's first template_count M frames;
/// flagged like R1.
RuleScores rule_r3(const std::vector<DaySequence>& days, const LabelConfig& config);

struct R4Scores {
    double horizontal = 0.0;  // max of consecutive-row differences
    double vertical = 0.0;    // mean |Sobel| of consecutive-column differences
    bool flag = false;
};

R4Scores rule_r4(const ThermalFrame& frame, const LabelConfig& config);

/// Trend rule for S and E samples: S must rise by more than trend_threshold
/// over trend_window samples, E must fall by more than it. Returns one flag
/// per sample of the day (false for M samples).
std::vector<bool> label_se_segments(const DaySequence& day, const LabelConfig& config);

struct SampleVerdict {
    std::optional<double> r1, r2, r3;
    std::optional<double> r4_horizontal, r4_vertical;
    bool r1_flag = false, r2_flag = false, r3_flag = false, r4_flag = false;
    bool trend_flag = false;
    Label final_label = Label::Normal;
};

struct LabelReport {
    std::vector<std::vector<SampleVerdict>> verdicts;  // aligned with the day list
    double r1_threshold = 0.0;
    double r2_threshold = 0.0;
    double r3_threshold = 0.0;
    int r1_flags = 0, r2_flags = 0, r3_flags = 0, r4_flags = 0, trend_flags = 0;
    int final_anomalies = 0;
    int short_template_days = 0;  // days with fewer than template_count M samples
};

/// Runs segmentation and all rules over the given days and writes the
/// combined (logical OR) labels into the samples.
LabelReport label_days(std::vector<DaySequence>& days, const LabelConfig& config);

}  // namespace forecastad

#pragma once

#include "forecastad/model.hpp"
#include "forecastad/types.hpp"

namespace forecastad {

enum class FeatureBaseline { TimeOfDay, NegativeMean, NegativeMax, NegativeStd };

std::string to_string(FeatureBaseline kind);
FeatureBaseline feature_baseline_from_string(const std::string& s);

/// Statistical per-sample scores. day_t0 anchors the time-of-day feature at
/// the day's first sample.
double feature_score(const Sample& sample, double day_t0, FeatureBaseline kind);

/// Scores every sample of every day with the given feature.
std::vector<ScoreRow> feature_score_days(const std::vector<DaySequence>& days,
                                         FeatureBaseline kind);

/// Reconstruction error of the pre-trained autoencoder, one row per sample.
std::vector<ScoreRow> autoencoder_score_days(ForecastModel& model,
                                             const std::vector<DaySequence>& days);

}  // namespace forecastad

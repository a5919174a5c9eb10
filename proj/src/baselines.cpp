#include "forecastad/baselines.hpp"

#include "forecastad/stats.hpp"

#include <algorithm>
#include <stdexcept>

namespace forecastad {

std::string to_string(FeatureBaseline kind) {
    switch (kind) {
        case FeatureBaseline::TimeOfDay: return "time_of_day";
        case FeatureBaseline::NegativeMean: return "negative_mean";
        case FeatureBaseline::NegativeMax: return "negative_max";
        case FeatureBaseline::NegativeStd: return "negative_std";
    }
    throw std::logic_error("unreachable");
}

FeatureBaseline feature_baseline_from_string(const std::string& s) {
    if (s == "time_of_day") return FeatureBaseline::TimeOfDay;
    if (s == "negative_mean") return FeatureBaseline::NegativeMean;
    if (s == "negative_max") return FeatureBaseline::NegativeMax;
    if (s == "negative_std") return FeatureBaseline::NegativeStd;
    throw std::invalid_argument("unknown feature baseline: " + s);
}

double feature_score(const Sample& sample, double day_t0, FeatureBaseline kind) {
    switch (kind) {
        case FeatureBaseline::TimeOfDay:
            return sample.t - day_t0;
        case FeatureBaseline::NegativeMean:
            return -sample.frame.mean();
        case FeatureBaseline::NegativeMax:
            return -static_cast<double>(
                *std::max_element(sample.frame.pixels.begin(), sample.frame.pixels.end()));
        case FeatureBaseline::NegativeStd: {
            std::vector<double> v(sample.frame.pixels.begin(), sample.frame.pixels.end());
            return -stddev_of(v);
        }
    }
    throw std::logic_error("unreachable");
}

std::vector<ScoreRow> feature_score_days(const std::vector<DaySequence>& days,
                                         FeatureBaseline kind) {
    std::vector<ScoreRow> rows;
    for (const auto& day : days) {
        const double t0 = day.t0();
        for (const auto& s : day.samples)
            rows.push_back({day.day_id, s.t, feature_score(s, t0, kind), s.y, s.segment});
    }
    return rows;
}

std::vector<ScoreRow> autoencoder_score_days(ForecastModel& model,
                                             const std::vector<DaySequence>& days) {
    std::vector<ScoreRow> rows;
    for (const auto& day : days)
        for (const auto& s : day.samples)
            rows.push_back({day.day_id, s.t, model.reconstruction_error(s.frame), s.y, s.segment});
    return rows;
}

}  // namespace forecastad

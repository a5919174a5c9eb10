#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace forecastad {

/// Percentile with linear interpolation between order statistics,
/// p in [0, 100]. Input need not be sorted.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile: p out of range");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(rank));
    const auto hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double mean_of(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean_of: empty input");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

inline double median_of(std::vector<double> values) { return percentile(std::move(values), 50.0); }

/// Population standard deviation.
inline double stddev_of(const std::vector<double>& values) {
    const double m = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size()));
}

}  // namespace forecastad

#include "forecastad/label.hpp"

#include "forecastad/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace forecastad {

void LabelConfig::validate() const {
    auto pct_ok = [](double p) { return p > 0.0 && p < 100.0; };
    if (!pct_ok(r1_pair_percentile) || !pct_ok(r1_dataset_percentile) || !pct_ok(r2_percentile))
        throw std::invalid_argument("label: percentiles must lie in (0, 100)");
    if (r4_horizontal_threshold <= 0.0 || r4_vertical_threshold <= 0.0 || trend_threshold <= 0.0)
        throw std::invalid_argument("label: thresholds must be positive");
    if (r3_template_count < 1) throw std::invalid_argument("label: r3_template_count must be >= 1");
    if (trend_window < 1 || smoothing_window < 1 || min_day_samples < 1)
        throw std::invalid_argument("label: window sizes must be >= 1");
    if (m_plateau_fraction <= 0.0 || m_plateau_fraction > 1.0)
        throw std::invalid_argument("label: m_plateau_fraction must be in (0, 1]");
}

namespace {

std::vector<int> m_indices(const DaySequence& day) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(day.size()); ++i)
        if (day.samples[i].segment == Segment::M) idx.push_back(i);
    return idx;
}

/// Percentile-of-squared-differences score shared by R1 and R3.
double pair_score(const ThermalFrame& a, const ThermalFrame& b, double pct) {
    if (a.size() != b.size()) throw std::invalid_argument("pair_score: frame size mismatch");
    std::vector<double> diffs(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        diffs[i] = d * d;
    }
    return percentile(std::move(diffs), pct);
}

std::vector<double> collect(const RuleScores& rs) {
    std::vector<double> all;
    for (const auto& day : rs.scores)
        for (const auto& s : day)
            if (s) all.push_back(*s);
    return all;
}

void flag_above(RuleScores& rs, double dataset_percentile) {
    const auto all = collect(rs);
    if (all.empty()) return;
    rs.threshold = percentile(all, dataset_percentile);
    for (size_t d = 0; d < rs.scores.size(); ++d)
        for (size_t i = 0; i < rs.scores[d].size(); ++i)
            rs.flags[d][i] = rs.scores[d][i] && *rs.scores[d][i] > rs.threshold;
}

RuleScores make_empty(const std::vector<DaySequence>& days) {
    RuleScores rs;
    rs.scores.resize(days.size());
    rs.flags.resize(days.size());
    for (size_t d = 0; d < days.size(); ++d) {
        rs.scores[d].resize(days[d].size());
        rs.flags[d].assign(days[d].size(), false);
    }
    return rs;
}

}  // namespace

void segment_day(DaySequence& day, const LabelConfig& config) {
    if (day.empty()) return;
    const int n = static_cast<int>(day.size());
    std::vector<double> means(n);
    for (int i = 0; i < n; ++i) means[i] = day.samples[i].frame.mean();

    // Centered moving median, truncated at the edges; robust against single
    // anomalous frames that would otherwise shift the segment boundaries.
    const int half = config.smoothing_window / 2;
    std::vector<double> smoothed(n);
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        std::vector<double> window(means.begin() + lo, means.begin() + hi + 1);
        smoothed[i] = median_of(window);
    }

    const double peak = *std::max_element(smoothed.begin(), smoothed.end());
    const double cutoff = config.m_plateau_fraction * peak;

    // Longest contiguous run at or above the plateau cutoff becomes M.
    int best_start = -1, best_len = 0;
    for (int i = 0; i < n;) {
        if (smoothed[i] >= cutoff) {
            int j = i;
            while (j < n && smoothed[j] >= cutoff) ++j;
            if (j - i > best_len) {
                best_len = j - i;
                best_start = i;
            }
            i = j;
        } else {
            ++i;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (best_len == 0) {
            day.samples[i].segment = Segment::S;
        } else if (i < best_start) {
            day.samples[i].segment = Segment::S;
        } else if (i < best_start + best_len) {
            day.samples[i].segment = Segment::M;
        } else {
            day.samples[i].segment = Segment::E;
        }
    }
}

FilterResult filter_days(std::vector<DaySequence> days, const LabelConfig& config) {
    config.validate();
    for (auto& day : days) {
        const bool unsegmented = std::any_of(day.samples.begin(), day.samples.end(),
                                             [](const Sample& s) {
                                                 return s.segment == Segment::Unassigned;
                                             });
        if (unsegmented) segment_day(day, config);
    }

    std::vector<std::optional<double>> m_means(days.size());
    std::vector<double> all_means;
    for (size_t d = 0; d < days.size(); ++d) {
        std::vector<double> means;
        for (int i : m_indices(days[d])) means.push_back(days[d].samples[i].frame.mean());
        if (!means.empty()) {
            m_means[d] = mean_of(means);
            all_means.push_back(*m_means[d]);
        }
    }
    const double median_m = all_means.empty() ? 0.0 : median_of(all_means);

    FilterResult result;
    for (size_t d = 0; d < days.size(); ++d) {
        if (static_cast<int>(days[d].size()) < config.min_day_samples) {
            result.dropped.emplace_back(std::move(days[d]), "too_few_samples");
        } else if (!m_means[d] || *m_means[d] <= 0.5 * median_m) {
            result.dropped.emplace_back(std::move(days[d]), "low_M_temperature");
        } else {
            result.kept.push_back(std::move(days[d]));
        }
    }
    return result;
}

RuleScores rule_r1(const std::vector<DaySequence>& days, const LabelConfig& config) {
    auto rs = make_empty(days);
    for (size_t d = 0; d < days.size(); ++d) {
        const auto idx = m_indices(days[d]);
        for (size_t k = 1; k < idx.size(); ++k)
            rs.scores[d][idx[k]] = pair_score(days[d].samples[idx[k]].frame,
                                              days[d].samples[idx[k - 1]].frame,
                                              config.r1_pair_percentile);
    }
    flag_above(rs, config.r1_dataset_percentile);
    return rs;
}

RuleScores rule_r2(const std::vector<DaySequence>& days, const LabelConfig& config) {
    auto rs = make_empty(days);
    for (size_t d = 0; d < days.size(); ++d) {
        const auto idx = m_indices(days[d]);
        if (idx.empty()) continue;
        std::vector<double> means;
        means.reserve(idx.size());
        for (int i : idx) means.push_back(days[d].samples[i].frame.mean());
        const double day_mean = mean_of(means);
        for (size_t k = 0; k < idx.size(); ++k) rs.scores[d][idx[k]] = means[k] - day_mean;
    }
    const auto all = collect(rs);
    if (all.empty()) return rs;
    rs.threshold = percentile(all, config.r2_percentile);
    for (size_t d = 0; d < rs.scores.size(); ++d)
        for (size_t i = 0; i < rs.scores[d].size(); ++i)
            rs.flags[d][i] = rs.scores[d][i] && *rs.scores[d][i] < rs.threshold;
    return rs;
}

RuleScores rule_r3(const std::vector<DaySequence>& days, const LabelConfig& config) {
    auto rs = make_empty(days);
    for (size_t d = 0; d < days.size(); ++d) {
        const auto idx = m_indices(days[d]);
        if (idx.empty()) continue;
        const size_t n_templates = std::min<size_t>(config.r3_template_count, idx.size());
        for (int i : idx) {
            double s = 0.0;
            for (size_t t = 0; t < n_templates; ++t)
                s += pair_score(days[d].samples[i].frame, days[d].samples[idx[t]].frame,
                                config.r1_pair_percentile);
            rs.scores[d][i] = s / static_cast<double>(n_templates);
        }
    }
    flag_above(rs, config.r1_dataset_percentile);
    return rs;
}

R4Scores rule_r4(const ThermalFrame& frame, const LabelConfig& config) {
    const int h = frame.height, w = frame.width;
    if (h < 4 || w < 4) throw std::invalid_argument("rule_r4: frame must be at least 4x4");

    R4Scores out;
    out.horizontal = -std::numeric_limits<double>::infinity();
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c < w; ++c)
            out.horizontal = std::max(
                out.horizontal,
                static_cast<double>(frame.at(r + 1, c)) - static_cast<double>(frame.at(r, c)));

    // Column-difference matrix, h x (w-1).
    std::vector<double> diff(static_cast<size_t>(h) * (w - 1));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c + 1 < w; ++c)
            diff[static_cast<size_t>(r) * (w - 1) + c] =
                static_cast<double>(frame.at(r, c + 1)) - static_cast<double>(frame.at(r, c));

    // Vertical-edge Sobel over the valid region; the score is sign-free, so
    // correlation and convolution agree.
    static const double kSobel[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    const int dh = h, dw = w - 1;
    double acc = 0.0;
    int count = 0;
    for (int r = 0; r + 2 < dh; ++r) {
        for (int c = 0; c + 2 < dw; ++c) {
            double v = 0.0;
            for (int kr = 0; kr < 3; ++kr)
                for (int kc = 0; kc < 3; ++kc)
                    v += kSobel[kr][kc] * diff[static_cast<size_t>(r + kr) * dw + (c + kc)];
            acc += std::abs(v);
            ++count;
        }
    }
    out.vertical = count > 0 ? acc / count : 0.0;
    out.flag = out.horizontal > config.r4_horizontal_threshold ||
               out.vertical > config.r4_vertical_threshold;
    return out;
}

std::vector<bool> label_se_segments(const DaySequence& day, const LabelConfig& config) {
    const int n = static_cast<int>(day.size());
    std::vector<bool> flags(n, false);
    std::vector<double> means(n);
    for (int i = 0; i < n; ++i) means[i] = day.samples[i].frame.mean();

    for (int i = 0; i < n;) {
        const Segment seg = day.samples[i].segment;
        int j = i;
        while (j < n && day.samples[j].segment == seg) ++j;
        if (seg == Segment::S || seg == Segment::E) {
            for (int k = i; k < j; ++k) {
                const int prev = std::max(i, k - config.trend_window);
                if (prev == k) continue;  // no in-segment predecessor
                const double d = means[k] - means[prev];
                const bool normal = seg == Segment::S ? d > config.trend_threshold
                                                      : d < -config.trend_threshold;
                flags[k] = !normal;
            }
        }
        i = j;
    }
    return flags;
}

LabelReport label_days(std::vector<DaySequence>& days, const LabelConfig& config) {
    config.validate();
    for (auto& day : days) segment_day(day, config);

    const auto r1 = rule_r1(days, config);
    const auto r2 = rule_r2(days, config);
    const auto r3 = rule_r3(days, config);

    LabelReport report;
    report.r1_threshold = r1.threshold;
    report.r2_threshold = r2.threshold;
    report.r3_threshold = r3.threshold;
    report.verdicts.resize(days.size());

    for (size_t d = 0; d < days.size(); ++d) {
        auto& day = days[d];
        if (static_cast<int>(m_indices(day).size()) < config.r3_template_count)
            ++report.short_template_days;
        const auto trend = label_se_segments(day, config);
        report.verdicts[d].resize(day.size());
        for (size_t i = 0; i < day.size(); ++i) {
            auto& v = report.verdicts[d][i];
            v.r1 = r1.scores[d][i];
            v.r2 = r2.scores[d][i];
            v.r3 = r3.scores[d][i];
            v.r1_flag = r1.flags[d][i];
            v.r2_flag = r2.flags[d][i];
            v.r3_flag = r3.flags[d][i];
            bool anomalous = false;
            if (day.samples[i].segment == Segment::M) {
                const auto r4 = rule_r4(day.samples[i].frame, config);
                v.r4_horizontal = r4.horizontal;
                v.r4_vertical = r4.vertical;
                v.r4_flag = r4.flag;
                anomalous = v.r1_flag || v.r2_flag || v.r3_flag || v.r4_flag;
            } else {
                v.trend_flag = trend[i];
                anomalous = v.trend_flag;
            }
            v.final_label = anomalous ? Label::Anomalous : Label::Normal;
            day.samples[i].y = v.final_label;
            report.r1_flags += v.r1_flag;
            report.r2_flags += v.r2_flag;
            report.r3_flags += v.r3_flag;
            report.r4_flags += v.r4_flag;
            report.trend_flags += v.trend_flag;
            report.final_anomalies += anomalous;
        }
    }
    return report;
}

}  // namespace forecastad

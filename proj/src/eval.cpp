#include "forecastad/eval.hpp"

#include "forecastad/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace forecastad {

std::string to_string(TestSetup ts) {
    switch (ts) {
        case TestSetup::Ts1: return "Ts#1";
        case TestSetup::Ts2: return "Ts#2";
        case TestSetup::Ts3: return "Ts#3";
    }
    throw std::logic_error("unreachable");
}

std::vector<ScoreRow> filter_setup(const std::vector<ScoreRow>& rows, TestSetup setup) {
    std::vector<ScoreRow> out;
    for (const auto& r : rows) {
        const bool keep = setup == TestSetup::Ts3 ||
                          (setup == TestSetup::Ts1 && r.segment == Segment::M) ||
                          (setup == TestSetup::Ts2 &&
                           (r.segment == Segment::S || r.segment == Segment::E));
        if (keep) out.push_back(r);
    }
    return out;
}

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels differ in length");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auroc: both classes must be present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks over ties
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double rank = 0.5 * ((i + 1) + j);  // mean of 1-based ranks i+1..j
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += rank;
        i = j;
    }
    return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0) throw UndefinedMetricError("aupr: needs at least one anomalous sample");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double area = 0.0, prev_recall = 0.0;
    size_t tp = 0, predicted = 0, i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (size_t k = i; k < j; ++k) {
            ++predicted;
            if (labels[order[k]] == 1) ++tp;
        }
        const double precision = static_cast<double>(tp) / predicted;
        const double recall = static_cast<double>(tp) / n_pos;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

std::vector<int> classify(const std::vector<double>& scores, double lambda) {
    std::vector<int> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= lambda ? 1 : 0;
    return out;
}

BinaryMetrics metrics_at(const std::vector<double>& scores, const std::vector<int>& labels,
                         double lambda) {
    check_sizes(scores, labels);
    if (scores.empty()) throw UndefinedMetricError("metrics_at: empty input");
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const int yhat = scores[i] >= lambda ? 1 : 0;
        if (labels[i] == 1)
            (yhat ? tp : fn)++;
        else
            (yhat ? fp : tn)++;
    }
    BinaryMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / scores.size();
    m.f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    const double tpr = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double fpr = (fp + tn) > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
    m.gmean = std::sqrt((1.0 - fpr) * tpr);
    return m;
}

ThresholdChoice select_thresholds(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
    check_sizes(scores, labels);
    size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0 || n_pos == labels.size())
        throw UndefinedMetricError("select_thresholds: both classes must be present");

    std::vector<double> distinct = scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> candidates;
    candidates.push_back(-std::numeric_limits<double>::infinity());
    for (size_t i = 0; i + 1 < distinct.size(); ++i)
        candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    candidates.push_back(std::numeric_limits<double>::infinity());

    ThresholdChoice choice;
    choice.best_f1 = -1.0;
    choice.best_gmean = -1.0;
    for (double lambda : candidates) {  // ascending, so ties keep the smaller threshold
        const auto m = metrics_at(scores, labels, lambda);
        if (m.f1 > choice.best_f1) {
            choice.best_f1 = m.f1;
            choice.lambda_f = lambda;
        }
        if (m.gmean > choice.best_gmean) {
            choice.best_gmean = m.gmean;
            choice.lambda_g = lambda;
        }
    }
    return choice;
}

namespace {

/// Splits labelled rows into score/label arrays, dropping unlabeled samples.
void rows_to_arrays(const std::vector<ScoreRow>& rows, std::vector<double>& scores,
                    std::vector<int>& labels) {
    scores.clear();
    labels.clear();
    for (const auto& r : rows) {
        if (r.y == Label::Unlabeled) continue;
        scores.push_back(r.score);
        labels.push_back(r.y == Label::Anomalous ? 1 : 0);
    }
}

SetupMetrics eval_filter(const std::vector<ScoreRow>& rows, TestSetup setup,
                         const ThresholdChoice& th) {
    SetupMetrics out;
    std::vector<double> scores;
    std::vector<int> labels;
    rows_to_arrays(filter_setup(rows, setup), scores, labels);
    if (scores.empty()) return out;
    try {
        out.auroc = auroc(scores, labels);
    } catch (const UndefinedMetricError&) {}
    try {
        out.aupr = aupr(scores, labels);
    } catch (const UndefinedMetricError&) {}
    const auto mf = metrics_at(scores, labels, th.lambda_f);
    const auto mg = metrics_at(scores, labels, th.lambda_g);
    out.accuracy_f = mf.accuracy;
    out.f1_f = mf.f1;
    out.accuracy_g = mg.accuracy;
    out.f1_g = mg.f1;
    return out;
}

}  // namespace

SeedEval evaluate_scores(const std::vector<ScoreRow>& validation,
                         const std::vector<ScoreRow>& test) {
    std::vector<double> vs;
    std::vector<int> vy;
    rows_to_arrays(validation, vs, vy);
    SeedEval eval;
    eval.thresholds = select_thresholds(vs, vy);
    for (int i = 0; i < 3; ++i)
        eval.ts[i] = eval_filter(test, static_cast<TestSetup>(i), eval.thresholds);
    return eval;
}

namespace {

std::optional<Aggregate> aggregate_metric(const std::vector<SeedEval>& seeds, int ts,
                                          std::optional<double> SetupMetrics::*field) {
    std::vector<double> values;
    for (const auto& s : seeds)
        if (s.ts[ts].*field) values.push_back(*(s.ts[ts].*field));
    if (values.empty()) return std::nullopt;
    Aggregate a;
    a.n = static_cast<int>(values.size());
    a.mean = mean_of(values);
    a.stderr_ = values.size() > 1 ? stddev_of(values) / std::sqrt(static_cast<double>(values.size()))
                                  : 0.0;
    return a;
}

}  // namespace

EvalReport aggregate_evals(const std::vector<SeedEval>& seeds, const std::string& detector,
                           const std::string& setup) {
    if (seeds.empty()) throw std::invalid_argument("aggregate_evals: no seeds");
    EvalReport report;
    report.detector = detector;
    report.setup = setup;
    report.n_seeds = static_cast<int>(seeds.size());
    for (int i = 0; i < 3; ++i) {
        report.ts[i].auroc = aggregate_metric(seeds, i, &SetupMetrics::auroc);
        report.ts[i].aupr = aggregate_metric(seeds, i, &SetupMetrics::aupr);
        report.ts[i].accuracy_f = aggregate_metric(seeds, i, &SetupMetrics::accuracy_f);
        report.ts[i].f1_f = aggregate_metric(seeds, i, &SetupMetrics::f1_f);
        report.ts[i].accuracy_g = aggregate_metric(seeds, i, &SetupMetrics::accuracy_g);
        report.ts[i].f1_g = aggregate_metric(seeds, i, &SetupMetrics::f1_g);
    }
    return report;
}

namespace {

using nlohmann::json;

json aggregate_to_json(const std::optional<Aggregate>& a) {
    if (!a) return nullptr;
    return {{"mean", a->mean}, {"stderr", a->stderr_}, {"n", a->n}};
}

std::optional<Aggregate> aggregate_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    Aggregate a;
    a.mean = j.at("mean");
    a.stderr_ = j.at("stderr");
    a.n = j.at("n");
    return a;
}

const char* const kMetricNames[] = {"auroc", "aupr", "accuracy_f", "f1_f", "accuracy_g", "f1_g"};

std::optional<Aggregate> AggregateSetup::* metric_field(int m) {
    static std::optional<Aggregate> AggregateSetup::* const fields[] = {
        &AggregateSetup::auroc,      &AggregateSetup::aupr, &AggregateSetup::accuracy_f,
        &AggregateSetup::f1_f,       &AggregateSetup::accuracy_g, &AggregateSetup::f1_g};
    return fields[m];
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    json j;
    j["detector"] = report.detector;
    j["setup"] = report.setup;
    j["n_seeds"] = report.n_seeds;
    for (int i = 0; i < 3; ++i) {
        json ts;
        for (int m = 0; m < 6; ++m)
            ts[kMetricNames[m]] = aggregate_to_json(report.ts[i].*metric_field(m));
        j[to_string(static_cast<TestSetup>(i))] = ts;
    }
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    const auto j = json::parse(text);
    EvalReport report;
    report.detector = j.at("detector");
    report.setup = j.at("setup");
    report.n_seeds = j.at("n_seeds");
    for (int i = 0; i < 3; ++i) {
        const auto& ts = j.at(to_string(static_cast<TestSetup>(i)));
        for (int m = 0; m < 6; ++m)
            report.ts[i].*metric_field(m) = aggregate_from_json(ts.at(kMetricNames[m]));
    }
    return report;
}

std::string render_report(const EvalReport& report) {
    std::ostringstream os;
    os << report.detector << " (" << report.setup << ", " << report.n_seeds << " seed"
       << (report.n_seeds == 1 ? "" : "s") << ")\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s %14s %14s %14s\n", "metric", "Ts#1", "Ts#2", "Ts#3");
    os << buf;
    for (int m = 0; m < 6; ++m) {
        std::snprintf(buf, sizeof(buf), "%-12s", kMetricNames[m]);
        os << buf;
        for (int i = 0; i < 3; ++i) {
            const auto& a = report.ts[i].*metric_field(m);
            if (a)
                std::snprintf(buf, sizeof(buf), " %6.2f ± %5.2f", 100.0 * a->mean,
                              100.0 * a->stderr_);
            else
                std::snprintf(buf, sizeof(buf), " %14s", "-");
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

CleanResult clean_deployment(const std::vector<nn::Vector>& deployment,
                             const std::vector<nn::Vector>& training, double threshold) {
    if (deployment.empty() || training.empty())
        throw std::invalid_argument("clean_deployment: empty embedding set");
    CleanResult result;
    result.threshold = threshold;
    result.xi.reserve(deployment.size());
    for (size_t i = 0; i < deployment.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : training) best = std::min(best, (deployment[i] - c).norm());
        result.xi.push_back(best);
        (best > threshold ? result.removed : result.kept).push_back(i);
    }
    return result;
}

double default_clean_threshold(const std::vector<nn::Vector>& training) {
    if (training.size() < 2)
        throw std::invalid_argument("default_clean_threshold: need at least two embeddings");
    std::vector<double> nn_dist;
    nn_dist.reserve(training.size());
    for (size_t i = 0; i < training.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < training.size(); ++j)
            if (j != i) best = std::min(best, (training[i] - training[j]).norm());
        nn_dist.push_back(best);
    }
    return percentile(std::move(nn_dist), 99.0);
}

}  // namespace forecastad

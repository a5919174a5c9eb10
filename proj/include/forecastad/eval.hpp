#pragma once

#include "forecastad/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace forecastad {

/// A metric was requested on input where it is not defined (single-class
/// label sets, no anomalies, ...).
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Test-time segment filters: Ts1 = M only, Ts2 = S and E, Ts3 = everything.
enum class TestSetup { Ts1, Ts2, Ts3 };

std::string to_string(TestSetup ts);

std::vector<ScoreRow> filter_setup(const std::vector<ScoreRow>& rows, TestSetup setup);

/// Rank-based AUROC, ties counted one half. Throws UndefinedMetricError
/// unless both classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Step-wise (non-interpolated) area under the precision-recall curve,
/// descending-score sweep. Throws if there is no anomalous sample.
double aupr(const std::vector<double>& scores, const std::vector<int>& labels);

/// Predicted label is 1 iff score >= lambda.
std::vector<int> classify(const std::vector<double>& scores, double lambda);

struct BinaryMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double gmean = 0.0;  // sqrt((1 - FPR) * TPR)
};

BinaryMetrics metrics_at(const std::vector<double>& scores, const std::vector<int>& labels,
                         double lambda);

struct ThresholdChoice {
    double lambda_f = 0.0;  // maximizes F1 on validation
    double lambda_g = 0.0;  // maximizes G-Mean
    double best_f1 = 0.0;
    double best_gmean = 0.0;
};

/// Evaluates every candidate threshold (midpoints of consecutive distinct
/// scores plus -inf/+inf sentinels); ties resolve to the smaller threshold.
ThresholdChoice select_thresholds(const std::vector<double>& scores,
                                  const std::vector<int>& labels);

/// Metrics of one detector on one test filter; absent when the filter is
/// empty or single-class.
struct SetupMetrics {
    std::optional<double> auroc, aupr;
    std::optional<double> accuracy_f, f1_f;  // at lambda_f
    std::optional<double> accuracy_g, f1_g;  // at lambda_g
};

struct SeedEval {
    ThresholdChoice thresholds;
    SetupMetrics ts[3];  // indexed by TestSetup
};

/// One seed: thresholds from the validation rows, metrics per Ts filter on
/// the test rows. Unlabeled samples are ignored.
SeedEval evaluate_scores(const std::vector<ScoreRow>& validation,
                         const std::vector<ScoreRow>& test);

struct Aggregate {
    double mean = 0.0;
    double stderr_ = 0.0;  // std / sqrt(n), zero for a single seed
    int n = 0;
};

struct AggregateSetup {
    std::optional<Aggregate> auroc, aupr, accuracy_f, f1_f, accuracy_g, f1_g;
};

struct EvalReport {
    std::string detector;
    std::string setup;  // Tr#1 / Tr#2
    int n_seeds = 0;
    AggregateSetup ts[3];
};

EvalReport aggregate_evals(const std::vector<SeedEval>& seeds, const std::string& detector,
                           const std::string& setup);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Aligned text table, one row per metric, Ts#1..Ts#3 columns.
std::string render_report(const EvalReport& report);

// --- deployment-set cleaning -------------------------------------------------

struct CleanResult {
    std::vector<size_t> kept;     // indices into the deployment set
    std::vector<size_t> removed;
    std::vector<double> xi;       // nearest-training-embedding distance per sample
    double threshold = 0.0;
};

/// Removes deployment samples whose context embedding lies farther than
/// `threshold` from every training embedding.
CleanResult clean_deployment(const std::vector<nn::Vector>& deployment,
                             const std::vector<nn::Vector>& training, double threshold);

/// Default threshold: 99th percentile of leave-one-out nearest-neighbor
/// distances within the training embeddings.
double default_clean_threshold(const std::vector<nn::Vector>& training);

}  // namespace forecastad

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slidemil/core.hpp"

namespace slidemil::metrics {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // predict positive iff score >= threshold;
                             // +inf for the (0,0) sentinel
};

// Points sorted by fpr (then tpr), from (0,0) to (1,1).
struct RocCurve {
    std::vector<RocPoint> points;
};

struct ClassificationRates {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    double auc = 0.0;
    ConfusionMatrix confusion;
    std::uint64_t n_pos = 0;
    std::uint64_t n_neg = 0;
    RocCurve roc;
};

ConfusionMatrix confusion_at(std::span<const double> scores,
                             std::span<const core::Label> labels,
                             double threshold = 0.5);

// Standard formulas; every 0/0 ratio is defined as 0 so fold aggregation
// never propagates NaN.
ClassificationRates classification_metrics(const ConfusionMatrix& cm);

// (tp*tn - fp*fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)); 0 when any factor is
// zero. The product is taken in 128-bit integer arithmetic before the root.
double mcc(const ConfusionMatrix& cm);

struct RocResult {
    RocCurve curve;
    double auc = 0.0;
};

// Threshold sweep over the distinct score values; AUC by trapezoid, which
// equals the Mann-Whitney statistic (concordant + 0.5*ties) / (n_pos*n_neg).
// Throws UndefinedMetricError when only one class is present.
RocResult roc_auc(std::span<const double> scores,
                  std::span<const core::Label> labels);

// Full report at a decision threshold (confusion metrics + MCC + ROC/AUC).
MetricReport evaluate_scores(std::span<const double> scores,
                             std::span<const core::Label> labels,
                             double threshold = 0.5);

struct MetricStats {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;            // sample (n-1) convention
    std::vector<double> values;     // per fold
    std::string rendered;           // "0.933 ± 0.010"
};

struct FoldSummary {
    std::vector<MetricStats> metrics;  // accuracy, precision, recall, f1, mcc, auc
    const MetricStats* find(std::string_view name) const;
};

FoldSummary aggregate_folds(std::span<const MetricReport> reports);

// "m ± s", three decimals — the reporting convention for fold aggregates.
std::string format_mean_std(double mean, double stddev);

// Exports; layouts are part of the tool's file contract.
std::string roc_to_csv(const RocCurve& curve);        // fpr,tpr,threshold
std::string confusion_to_json(const ConfusionMatrix& cm);

}  // namespace slidemil::metrics

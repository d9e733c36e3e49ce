#include "slidemil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "slidemil/io_util.hpp"

namespace slidemil::metrics {

using core::Label;

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const Label> labels,
                             double threshold) {
    require(scores.size() == labels.size(), "confusion_at: scores/labels length mismatch");
    require(!scores.empty(), "confusion_at: need at least one sample");

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool predicted_pos = scores[i] >= threshold;
        bool actual_pos = labels[i] == Label::EgfrPos;
        if (predicted_pos)
            (actual_pos ? cm.tp : cm.fp) += 1;
        else
            (actual_pos ? cm.fn : cm.tn) += 1;
    }
    return cm;
}

ClassificationRates classification_metrics(const ConfusionMatrix& cm) {
    require(cm.total() >= 1, "classification_metrics: empty confusion matrix");
    auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    ClassificationRates r;
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.recall = ratio(cm.tp, cm.tp + cm.fn);
    r.f1 = (r.precision + r.recall) == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double mcc(const ConfusionMatrix& cm) {
    require(cm.total() >= 1, "mcc: empty confusion matrix");
    std::uint64_t f1 = cm.tp + cm.fp;
    std::uint64_t f2 = cm.tp + cm.fn;
    std::uint64_t f3 = cm.tn + cm.fp;
    std::uint64_t f4 = cm.tn + cm.fn;
    if (f1 == 0 || f2 == 0 || f3 == 0 || f4 == 0) return 0.0;

    // product under a single root; 128-bit keeps it exact for any counts
    // that fit the matrix
    unsigned __int128 prod = static_cast<unsigned __int128>(f1) * f2;
    prod *= f3;
    prod *= f4;
    double numerator = static_cast<double>(cm.tp) * static_cast<double>(cm.tn) -
                       static_cast<double>(cm.fp) * static_cast<double>(cm.fn);
    return numerator / std::sqrt(static_cast<double>(prod));
}

RocResult roc_auc(std::span<const double> scores, std::span<const Label> labels) {
    require(scores.size() == labels.size(), "roc_auc: scores/labels length mismatch");
    std::uint64_t n_pos = 0, n_neg = 0;
    for (Label l : labels) (l == Label::EgfrPos ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("roc_auc: need at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocResult result;
    result.curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});

    // sweep distinct scores descending; each threshold t predicts positive
    // for every score >= t. The area accumulates in exact integer counts:
    // sum of dFP * (TP_prev + TP_cur) over curve segments = 2*concordant + ties.
    std::uint64_t tp = 0, fp = 0;
    unsigned __int128 twice_area = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        double t = scores[order[i]];
        std::uint64_t tp_prev = tp, fp_prev = fp;
        while (i < order.size() && scores[order[i]] == t) {
            (labels[order[i]] == Label::EgfrPos ? tp : fp) += 1;
            ++i;
        }
        twice_area += static_cast<unsigned __int128>(fp - fp_prev) * (tp + tp_prev);
        result.curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                                       static_cast<double>(tp) / static_cast<double>(n_pos), t});
    }
    result.auc = static_cast<double>(twice_area) /
                 (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return result;
}

MetricReport evaluate_scores(std::span<const double> scores, std::span<const Label> labels,
                             double threshold) {
    MetricReport report;
    report.confusion = confusion_at(scores, labels, threshold);
    ClassificationRates rates = classification_metrics(report.confusion);
    report.accuracy = rates.accuracy;
    report.precision = rates.precision;
    report.recall = rates.recall;
    report.f1 = rates.f1;
    report.mcc = mcc(report.confusion);
    RocResult roc = roc_auc(scores, labels);
    report.auc = roc.auc;
    report.roc = std::move(roc.curve);
    report.n_pos = report.confusion.tp + report.confusion.fn;
    report.n_neg = report.confusion.tn + report.confusion.fp;
    return report;
}

const MetricStats* FoldSummary::find(std::string_view name) const {
    for (const auto& m : metrics)
        if (m.name == name) return &m;
    return nullptr;
}

std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean, stddev);
    return buf;
}

FoldSummary aggregate_folds(std::span<const MetricReport> reports) {
    require(reports.size() >= 2, "aggregate_folds: need at least two fold reports");

    FoldSummary summary;
    auto add = [&](std::string name, auto getter) {
        MetricStats stats;
        stats.name = std::move(name);
        for (const auto& r : reports) stats.values.push_back(getter(r));
        double n = static_cast<double>(stats.values.size());
        stats.mean = std::accumulate(stats.values.begin(), stats.values.end(), 0.0) / n;
        bool all_equal = std::all_of(stats.values.begin(), stats.values.end(),
                                     [&](double v) { return v == stats.values.front(); });
        if (all_equal) {
            // identical folds must report exactly zero spread, not rounding dust
            stats.mean = stats.values.front();
            stats.stddev = 0.0;
        } else {
            double ss = 0.0;
            for (double v : stats.values) ss += (v - stats.mean) * (v - stats.mean);
            stats.stddev = std::sqrt(ss / (n - 1.0));
        }
        stats.rendered = format_mean_std(stats.mean, stats.stddev);
        summary.metrics.push_back(std::move(stats));
    };
    add("accuracy", [](const MetricReport& r) { return r.accuracy; });
    add("precision", [](const MetricReport& r) { return r.precision; });
    add("recall", [](const MetricReport& r) { return r.recall; });
    add("f1", [](const MetricReport& r) { return r.f1; });
    add("mcc", [](const MetricReport& r) { return r.mcc; });
    add("auc", [](const MetricReport& r) { return r.auc; });
    return summary;
}

std::string roc_to_csv(const RocCurve& curve) {
    std::string out = "fpr,tpr,threshold\n";
    for (const auto& p : curve.points) {
        out += io::fmt_double(p.fpr);
        out += ',';
        out += io::fmt_double(p.tpr);
        out += ',';
        out += std::isinf(p.threshold) ? "inf" : io::fmt_double(p.threshold);
        out += '\n';
    }
    return out;
}

std::string confusion_to_json(const ConfusionMatrix& cm) {
    return "{\"tp\":" + std::to_string(cm.tp) + ",\"fp\":" + std::to_string(cm.fp) +
           ",\"tn\":" + std::to_string(cm.tn) + ",\"fn\":" + std::to_string(cm.fn) + "}";
}

}  // namespace slidemil::metrics

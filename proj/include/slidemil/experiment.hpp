#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slidemil/core.hpp"
#include "slidemil/encoder.hpp"
#include "slidemil/metrics.hpp"
#include "slidemil/mil.hpp"

namespace slidemil::experiment {

struct SplitAssignment {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

// Stratified split preserving class proportions. Total test size is
// round(N * fraction); per-class quotas are floor(n_c * fraction) with the
// leftover slots going to the largest fractional remainders, ties favoring
// the minority class. Membership within a class is a seeded shuffle, so the
// counts are identical for every seed.
SplitAssignment stratified_split(const core::SlideManifest& manifest, double fraction,
                                 std::uint64_t seed);

struct FoldAssignment {
    int k = 0;
    std::unordered_map<std::string, int> fold_of;
    std::vector<std::vector<std::string>> folds;  // ids per fold, assignment order
};

// Seeded shuffle then round-robin; fold sizes differ by at most one.
FoldAssignment kfold(std::span<const std::string> train_ids, int k, std::uint64_t seed);

// Same, but round-robin within each class so folds preserve class balance.
FoldAssignment kfold_stratified(std::span<const std::string> train_ids,
                                std::span<const core::Label> labels, int k,
                                std::uint64_t seed);

struct FoldResult {
    mil::AbmilParams params;
    metrics::MetricReport validation;
    mil::TrainHistory history;
};

// One training run per fold: fold i validates on fold i and trains on the
// rest, with per-fold seed = config.seed + i.
std::vector<FoldResult> run_cv(const std::map<std::string, encoder::EmbeddingBag>& bags,
                               const FoldAssignment& folds, const mil::TrainConfig& config,
                               double threshold);

// Highest validation accuracy, ties resolved to the lowest fold index.
int select_best(std::span<const FoldResult> results);

metrics::MetricReport evaluate_holdout(const mil::AbmilParams& params,
                                       std::span<const mil::BagRef> bags,
                                       double threshold);

struct ExperimentConfig {
    double fraction = 0.15;
    int k = 5;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    bool stratified_folds = false;
    mil::TrainConfig train;
};

// JSON: {fraction, k, seed, threshold, stratified_folds, train: {learning_rate,
// max_epochs, patience, seed, hidden_dim, adam: {beta1, beta2, eps}}}.
// Missing keys keep their defaults; train.seed defaults to the experiment seed.
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Evaluation of one test set by every fold model plus the selected one.
struct HoldoutEvaluation {
    metrics::MetricReport best;               // the selected model's report
    metrics::FoldSummary per_fold_summary;    // all fold models on this set
};

struct ExperimentReport {
    std::vector<metrics::MetricReport> fold_validation;
    metrics::FoldSummary cv_summary;
    int best_fold = 0;
    HoldoutEvaluation holdout;
    std::optional<HoldoutEvaluation> external;
};

struct ExperimentOutput {
    SplitAssignment split;
    FoldAssignment folds;
    std::vector<FoldResult> cv;
    ExperimentReport report;
};

// Full protocol: stratified split, k-fold CV on the training side, model
// selection by CV accuracy, evaluation on the held-out test set, and
// optionally on an external cohort (never fine-tuned on it).
ExperimentOutput run_experiment(
    const core::SlideManifest& manifest,
    const std::map<std::string, encoder::EmbeddingBag>& bags, const ExperimentConfig& config,
    const core::SlideManifest* external_manifest = nullptr,
    const std::map<std::string, encoder::EmbeddingBag>* external_bags = nullptr);

// report.json payload (deterministic: fixed key order, no timestamps).
std::string report_to_json(const ExperimentReport& report, const std::string& dataset_name);

// split/fold audit table: slide_id,role[,fold]
std::string assignments_to_csv(const SplitAssignment& split, const FoldAssignment& folds);

std::string history_to_csv(const mil::TrainHistory& history);  // epoch,train_loss,val_loss

}  // namespace slidemil::experiment

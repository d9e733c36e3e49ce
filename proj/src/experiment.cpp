#include "slidemil/experiment.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "slidemil/io_util.hpp"
#include "slidemil/rng.hpp"

namespace slidemil::experiment {

using core::Label;
using json = nlohmann::ordered_json;

SplitAssignment stratified_split(const core::SlideManifest& manifest, double fraction,
                                 std::uint64_t seed) {
    require(fraction > 0.0 && fraction < 1.0, "stratified_split: fraction in (0,1)");
    core::ClassCounts counts = manifest.class_counts();
    require(counts.positives >= 1 && counts.negatives >= 1,
            "stratified_split: every class needs at least one slide");

    struct ClassBucket {
        Label label;
        std::vector<std::string> ids;
        std::int64_t quota = 0;
        double remainder = 0.0;
    };
    ClassBucket buckets[2] = {{Label::EgfrPos, {}, 0, 0.0}, {Label::EgfrNeg, {}, 0, 0.0}};
    for (const auto& rec : manifest.records)
        buckets[rec.label == Label::EgfrPos ? 0 : 1].ids.push_back(rec.slide_id);

    const auto total_test = static_cast<std::int64_t>(
        std::llround(static_cast<double>(counts.total()) * fraction));
    std::int64_t assigned = 0;
    for (auto& bucket : buckets) {
        double exact = static_cast<double>(bucket.ids.size()) * fraction;
        bucket.quota = static_cast<std::int64_t>(std::floor(exact));
        bucket.remainder = exact - static_cast<double>(bucket.quota);
        assigned += bucket.quota;
    }

    // leftover slots: largest fractional remainder first, ties to the
    // minority class (this is what keeps 110/90 at 15% at 16/14, not 17/13)
    std::vector<int> order = {0, 1};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (buckets[a].remainder != buckets[b].remainder)
            return buckets[a].remainder > buckets[b].remainder;
        return buckets[a].ids.size() < buckets[b].ids.size();
    });
    for (std::int64_t slot = assigned; slot < total_test; ++slot) {
        auto& bucket = buckets[order[static_cast<std::size_t>(slot - assigned) % 2]];
        bucket.quota += 1;
    }

    SplitAssignment split;
    split.seed = seed;
    split.fraction = fraction;
    SplitMix64 rng(seed);
    for (auto& bucket : buckets) {
        rng.shuffle(bucket.ids);
        for (std::size_t i = 0; i < bucket.ids.size(); ++i) {
            if (static_cast<std::int64_t>(i) < bucket.quota)
                split.test_ids.push_back(bucket.ids[i]);
            else
                split.train_ids.push_back(bucket.ids[i]);
        }
    }
    return split;
}

namespace {

FoldAssignment round_robin(std::vector<std::vector<std::string>> groups, int k,
                           std::uint64_t seed) {
    FoldAssignment assignment;
    assignment.k = k;
    assignment.folds.resize(static_cast<std::size_t>(k));
    SplitMix64 rng(seed);
    for (auto& group : groups) {
        rng.shuffle(group);
        for (std::size_t i = 0; i < group.size(); ++i) {
            int fold = static_cast<int>(i % static_cast<std::size_t>(k));
            assignment.fold_of[group[i]] = fold;
            assignment.folds[static_cast<std::size_t>(fold)].push_back(std::move(group[i]));
        }
    }
    return assignment;
}

}  // namespace

FoldAssignment kfold(std::span<const std::string> train_ids, int k, std::uint64_t seed) {
    require(k >= 2, "kfold: k >= 2");
    require(static_cast<int>(train_ids.size()) >= k, "kfold: need at least k ids");
    return round_robin({{train_ids.begin(), train_ids.end()}}, k, seed);
}

FoldAssignment kfold_stratified(std::span<const std::string> train_ids,
                                std::span<const Label> labels, int k, std::uint64_t seed) {
    require(k >= 2, "kfold_stratified: k >= 2");
    require(train_ids.size() == labels.size(), "kfold_stratified: ids/labels length mismatch");
    require(static_cast<int>(train_ids.size()) >= k, "kfold_stratified: need at least k ids");
    std::vector<std::vector<std::string>> groups(2);
    for (std::size_t i = 0; i < train_ids.size(); ++i)
        groups[labels[i] == Label::EgfrPos ? 0 : 1].push_back(train_ids[i]);
    return round_robin(std::move(groups), k, seed);
}

namespace {

const encoder::EmbeddingBag& bag_for(const std::map<std::string, encoder::EmbeddingBag>& bags,
                                     const std::string& slide_id) {
    auto it = bags.find(slide_id);
    if (it == bags.end())
        throw DataError("no embedding bag for slide '" + slide_id + "'");
    if (!it->second.label.has_value())
        throw DataError("bag '" + slide_id + "' carries no label");
    return it->second;
}

metrics::MetricReport score_and_report(const mil::AbmilParams& params,
                                       std::span<const mil::BagRef> bags, double threshold) {
    std::vector<double> scores;
    std::vector<Label> labels;
    scores.reserve(bags.size());
    labels.reserve(bags.size());
    for (const auto& item : bags) {
        scores.push_back(mil::forward(*item.bag, params).prob);
        labels.push_back(item.label);
    }
    return metrics::evaluate_scores(scores, labels, threshold);
}

}  // namespace

std::vector<FoldResult> run_cv(const std::map<std::string, encoder::EmbeddingBag>& bags,
                               const FoldAssignment& folds, const mil::TrainConfig& config,
                               double threshold) {
    require(folds.k >= 2, "run_cv: need at least two folds");

    std::vector<FoldResult> results;
    for (int fold = 0; fold < folds.k; ++fold) {
        std::vector<mil::BagRef> train_refs, val_refs;
        for (int other = 0; other < folds.k; ++other) {
            for (const auto& id : folds.folds[static_cast<std::size_t>(other)]) {
                const auto& bag = bag_for(bags, id);
                mil::BagRef ref{&bag, *bag.label};
                (other == fold ? val_refs : train_refs).push_back(ref);
            }
        }
        mil::TrainConfig fold_config = config;
        fold_config.seed = config.seed + static_cast<std::uint64_t>(fold);
        mil::TrainResult trained = mil::train(train_refs, val_refs, fold_config);

        FoldResult result;
        result.validation = score_and_report(trained.params, val_refs, threshold);
        result.params = std::move(trained.params);
        result.history = std::move(trained.history);
        results.push_back(std::move(result));
    }
    return results;
}

int select_best(std::span<const FoldResult> results) {
    require(!results.empty(), "select_best: no results");
    int best = 0;
    for (int i = 1; i < static_cast<int>(results.size()); ++i)
        if (results[static_cast<std::size_t>(i)].validation.accuracy >
            results[static_cast<std::size_t>(best)].validation.accuracy)
            best = i;
    return best;
}

metrics::MetricReport evaluate_holdout(const mil::AbmilParams& params,
                                       std::span<const mil::BagRef> bags, double threshold) {
    require(!bags.empty(), "evaluate_holdout: empty evaluation set");
    return score_and_report(params, bags, threshold);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        cfg.fraction = j.value("fraction", cfg.fraction);
        cfg.k = j.value("k", cfg.k);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.threshold = j.value("threshold", cfg.threshold);
        cfg.stratified_folds = j.value("stratified_folds", cfg.stratified_folds);
        cfg.train.seed = cfg.seed;
        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.patience = t.value("patience", cfg.train.patience);
            cfg.train.seed = t.value("seed", cfg.train.seed);
            cfg.train.hidden_dim = t.value("hidden_dim", cfg.train.hidden_dim);
            if (t.contains("adam")) {
                const auto& a = t.at("adam");
                cfg.train.adam.beta1 = a.value("beta1", cfg.train.adam.beta1);
                cfg.train.adam.beta2 = a.value("beta2", cfg.train.adam.beta2);
                cfg.train.adam.eps = a.value("eps", cfg.train.adam.eps);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }

    if (!(cfg.fraction > 0.0 && cfg.fraction < 1.0))
        throw ConfigError("experiment config: fraction must be in (0,1)");
    if (cfg.k < 2) throw ConfigError("experiment config: k must be >= 2");
    if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
        throw ConfigError("experiment config: threshold must be in [0,1]");
    if (cfg.train.max_epochs < 1 || cfg.train.patience < 1 ||
        !(cfg.train.learning_rate > 0.0) || cfg.train.hidden_dim < 1)
        throw ConfigError("experiment config: bad train section");
    return cfg;
}

namespace {

HoldoutEvaluation evaluate_set(std::span<const FoldResult> cv, int best_fold,
                               std::span<const mil::BagRef> refs, double threshold) {
    HoldoutEvaluation eval;
    std::vector<metrics::MetricReport> per_fold;
    for (const auto& fold : cv)
        per_fold.push_back(evaluate_holdout(fold.params, refs, threshold));
    eval.best = per_fold[static_cast<std::size_t>(best_fold)];
    eval.per_fold_summary = metrics::aggregate_folds(per_fold);
    return eval;
}

std::vector<mil::BagRef> refs_for(const std::map<std::string, encoder::EmbeddingBag>& bags,
                                  std::span<const std::string> ids) {
    std::vector<mil::BagRef> refs;
    refs.reserve(ids.size());
    for (const auto& id : ids) {
        const auto& bag = bag_for(bags, id);
        refs.push_back({&bag, *bag.label});
    }
    return refs;
}

}  // namespace

ExperimentOutput run_experiment(const core::SlideManifest& manifest,
                                const std::map<std::string, encoder::EmbeddingBag>& bags,
                                const ExperimentConfig& config,
                                const core::SlideManifest* external_manifest,
                                const std::map<std::string, encoder::EmbeddingBag>* external_bags) {
    ExperimentOutput out;
    out.split = stratified_split(manifest, config.fraction, config.seed);

    if (config.stratified_folds) {
        std::vector<Label> labels;
        labels.reserve(out.split.train_ids.size());
        for (const auto& id : out.split.train_ids) labels.push_back(manifest.find(id)->label);
        out.folds = kfold_stratified(out.split.train_ids, labels, config.k, config.seed + 1);
    } else {
        out.folds = kfold(out.split.train_ids, config.k, config.seed + 1);
    }

    out.cv = run_cv(bags, out.folds, config.train, config.threshold);

    out.report.best_fold = select_best(out.cv);
    for (const auto& fold : out.cv) out.report.fold_validation.push_back(fold.validation);
    out.report.cv_summary = metrics::aggregate_folds(out.report.fold_validation);

    std::vector<mil::BagRef> holdout_refs = refs_for(bags, out.split.test_ids);
    out.report.holdout =
        evaluate_set(out.cv, out.report.best_fold, holdout_refs, config.threshold);

    if (external_manifest != nullptr) {
        require(external_bags != nullptr, "run_experiment: external manifest without bags");
        std::vector<std::string> ids;
        for (const auto& rec : external_manifest->records) ids.push_back(rec.slide_id);
        std::vector<mil::BagRef> external_refs = refs_for(*external_bags, ids);
        out.report.external =
            evaluate_set(out.cv, out.report.best_fold, external_refs, config.threshold);
    }
    return out;
}

namespace {

json metric_report_to_json(const metrics::MetricReport& r) {
    json j;
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["mcc"] = r.mcc;
    j["auc"] = r.auc;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp},
                      {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["n_pos"] = r.n_pos;
    j["n_neg"] = r.n_neg;
    json roc = json::array();
    for (const auto& p : r.roc.points) {
        json point;
        point["fpr"] = p.fpr;
        point["tpr"] = p.tpr;
        point["threshold"] = std::isinf(p.threshold) ? json("inf") : json(p.threshold);
        roc.push_back(std::move(point));
    }
    j["roc"] = std::move(roc);
    return j;
}

json summary_to_json(const metrics::FoldSummary& summary) {
    json j;
    for (const auto& m : summary.metrics) {
        json entry;
        entry["mean"] = m.mean;
        entry["std"] = m.stddev;
        entry["values"] = m.values;
        entry["rendered"] = m.rendered;
        j[m.name] = std::move(entry);
    }
    return j;
}

json holdout_to_json(const HoldoutEvaluation& eval) {
    json j;
    j["best_model"] = metric_report_to_json(eval.best);
    j["per_fold"] = summary_to_json(eval.per_fold_summary);
    return j;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report, const std::string& dataset_name) {
    json j;
    j["kind"] = "experiment";
    j["dataset"] = dataset_name;
    json folds = json::array();
    for (const auto& r : report.fold_validation) folds.push_back(metric_report_to_json(r));
    j["cv"] = {{"folds", std::move(folds)},
               {"summary", summary_to_json(report.cv_summary)},
               {"best_fold", report.best_fold}};
    j["holdout"] = holdout_to_json(report.holdout);
    if (report.external.has_value()) j["external"] = holdout_to_json(*report.external);
    return j.dump(2) + "\n";
}

std::string assignments_to_csv(const SplitAssignment& split, const FoldAssignment& folds) {
    std::string out = "slide_id,role,fold\n";
    for (const auto& id : split.train_ids) {
        auto it = folds.fold_of.find(id);
        out += id + ",train," +
               (it == folds.fold_of.end() ? std::string() : std::to_string(it->second)) + "\n";
    }
    for (const auto& id : split.test_ids) out += id + ",test,\n";
    return out;
}

std::string history_to_csv(const mil::TrainHistory& history) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += io::fmt_double(history.epochs[i].train_loss);
        out += ',';
        out += io::fmt_double(history.epochs[i].val_loss);
        out += '\n';
    }
    return out;
}

}  // namespace slidemil::experiment

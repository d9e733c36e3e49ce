// slide_mil: batch frontend for the slide -> tissue mask -> tile bag ->
// embedding -> attention-MIL -> metrics pipeline. One subcommand per stage so
// precomputed embeddings can enter at the train stage unchanged.
//
// Exit codes: 0 success; 2 usage/config/validation error; 3 I/O or file
// format error; 4 slide(s) with no tissue tiles during encode; 5 evaluation
// set with a single class (undefined AUC); 1 unexpected failure.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidemil/core.hpp"
#include "slidemil/encoder.hpp"
#include "slidemil/experiment.hpp"
#include "slidemil/image.hpp"
#include "slidemil/io_util.hpp"
#include "slidemil/log.hpp"
#include "slidemil/metrics.hpp"
#include "slidemil/mil.hpp"
#include "slidemil/preprocess.hpp"
#include "slidemil/svg.hpp"
#include "slidemil/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace slidemil;

namespace {

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Parse:
        case ErrorKind::Validation:
        case ErrorKind::Config:
        case ErrorKind::Contract:
            return 2;
        case ErrorKind::Io:
        case ErrorKind::Format:
        case ErrorKind::Truncation:
        case ErrorKind::Data:
            return 3;
        case ErrorKind::EmptyBag:
            return 4;
        case ErrorKind::UndefinedMetric:
            return 5;
        case ErrorKind::Numeric:
            return 1;
    }
    return 1;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return text;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

core::SlideManifest load_manifest(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open manifest '" + path.string() + "'");
    return core::parse_manifest(is);
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
}

// ---------------------------------------------------------------- synth-slide

struct SynthSlideArgs {
    std::string out;
    int count = 3;
    std::uint64_t seed = 0;
    std::uint32_t width = 1024;
    std::uint32_t height = 768;
    int blobs = 8;
};

int cmd_synth_slide(const SynthSlideArgs& args) {
    ensure_out_dir(args.out);
    core::SlideManifest manifest;
    for (int i = 0; i < args.count; ++i) {
        synth::SynthSlideSpec spec;
        spec.width = args.width;
        spec.height = args.height;
        spec.n_blobs = args.blobs;
        spec.seed = args.seed + static_cast<std::uint64_t>(i);
        auto slide = synth::generate_slide(spec);

        char name[32];
        std::snprintf(name, sizeof(name), "slide_%03d", i);
        fs::path image_path = fs::path(args.out) / (std::string(name) + ".png");
        image::write_png(slide.image, image_path);
        image::write_png(preprocess::mask_to_image(slide.mask),
                         fs::path(args.out) / (std::string(name) + "_mask.png"));

        core::SlideRecord rec;
        rec.slide_id = name;
        rec.image_uri = image_path.string();
        rec.variant = i % 2 == 0 ? core::Variant::Egfr : core::Variant::TripleNeg;
        rec.label = core::label_for(rec.variant);
        rec.magnification = 40.0;
        rec.microns_per_pixel = 0.23;
        manifest.records.push_back(std::move(rec));
        log_info(std::string(name) + " written");
    }
    write_text_file(fs::path(args.out) / "manifest.csv", core::serialize_manifest(manifest));
    return 0;
}

// ----------------------------------------------------------------- synth-bags

struct SynthBagsArgs {
    std::string out;
    int count = 100;
    std::uint64_t seed = 0;
    std::uint32_t dim = 16;
    double mu = 4.0;
    double sigma = 1.0;
    double positive_fraction = 0.5;
    int n_min = 20;
    int n_max = 50;
};

int cmd_synth_bags(const SynthBagsArgs& args) {
    ensure_out_dir(fs::path(args.out) / "bags");
    synth::SynthBagSpec spec;
    spec.n_bags = args.count;
    spec.dim = args.dim;
    spec.n_min = args.n_min;
    spec.n_max = args.n_max;
    spec.signal_strength = args.mu;
    spec.noise_sigma = args.sigma;
    spec.positive_fraction = args.positive_fraction;
    spec.seed = args.seed;
    auto cohort = synth::generate_bags(spec);

    for (const auto& item : cohort.bags)
        encoder::write_bag_file(item.bag,
                                fs::path(args.out) / "bags" / (item.bag.slide_id + ".ebag"));
    write_text_file(fs::path(args.out) / "manifest.csv",
                    core::serialize_manifest(synth::cohort_manifest(cohort)));
    log_info(std::to_string(cohort.bags.size()) + " bags written to " + args.out);
    return 0;
}

// -------------------------------------------------------------------- segment

struct SegmentArgs {
    std::string image;
    std::string out;
    double sat_min = 0.08;
    double val_max = 0.95;
};

int cmd_segment(const SegmentArgs& args) {
    auto img = image::read_image(args.image);
    auto mask = preprocess::segment_tissue(img, {args.sat_min, args.val_max});
    image::write_png(preprocess::mask_to_image(mask), args.out);
    log_info("mask " + args.out + ": " + std::to_string(mask.tissue_count()) + " tissue px");
    return 0;
}

// ----------------------------------------------------------------------- tile

struct TileArgs {
    std::string image;
    std::string out;
    std::string mask;  // optional; tiles are filtered only when given
    std::uint32_t tile_size = 256;
    double min_tissue = 0.5;
};

int cmd_tile(const TileArgs& args) {
    auto img = image::read_image(args.image);
    auto grid = preprocess::build_tile_grid(img.width, img.height, args.tile_size);
    if (!args.mask.empty()) {
        auto mask = preprocess::mask_from_image(image::read_image(args.mask));
        grid = preprocess::filter_tiles(grid, mask, args.min_tissue);
    }
    write_text_file(args.out, preprocess::grid_to_csv(grid));
    log_info("grid " + args.out + ": " + std::to_string(grid.tiles.size()) + " tiles");
    return 0;
}

// --------------------------------------------------------------------- encode

struct EncodeArgs {
    std::string manifest;
    std::string out;
    std::string encoder_kind = "stub";
    std::string bags;  // source dir for precomputed ingestion
    std::uint32_t dim = 1536;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::uint32_t tile_size = 256;
    double min_tissue = 0.5;
    double sat_min = 0.08;
    double val_max = 0.95;
};

int cmd_encode(const EncodeArgs& args) {
    auto manifest = load_manifest(args.manifest);
    ensure_out_dir(args.out);

    if (args.encoder_kind == "precomputed") {
        if (args.bags.empty())
            throw ConfigError("--encoder precomputed requires --bags <source dir>");
        auto bags = encoder::load_cohort_bags(args.bags, manifest);
        for (const auto& [slide_id, bag] : bags)
            encoder::write_bag_file(bag, fs::path(args.out) / (slide_id + ".ebag"));
        log_info(std::to_string(bags.size()) + " precomputed bags ingested");
        return 0;
    }
    if (args.encoder_kind != "stub")
        throw ConfigError("unknown encoder '" + args.encoder_kind + "' (stub|precomputed)");

    encoder::EncoderSpec spec{encoder::EncoderKind::Stub, args.dim, args.seed};
    preprocess::SegmentationParams seg{args.sat_min, args.val_max};

    struct SlideOutcome {
        std::string log_line;
        std::optional<int> error_code;
        std::string error_text;
    };
    std::vector<SlideOutcome> outcomes(manifest.records.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= manifest.records.size()) break;
            const auto& rec = manifest.records[i];
            auto& outcome = outcomes[i];
            auto start = std::chrono::steady_clock::now();
            try {
                auto img = image::read_image(rec.image_uri);
                auto mask = preprocess::segment_tissue(img, seg);
                auto grid = preprocess::build_tile_grid(img.width, img.height, args.tile_size);
                grid = preprocess::filter_tiles(grid, mask, args.min_tissue);
                auto patches = preprocess::extract_patches(img, grid, mask);
                auto bag = encoder::encode_slide(rec.slide_id, patches, spec);
                encoder::write_bag_file(bag, fs::path(args.out) / (rec.slide_id + ".ebag"));
                double seconds = std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                char line[160];
                std::snprintf(line, sizeof(line), "%s,%u,%.3f", rec.slide_id.c_str(),
                              bag.size(), seconds);
                outcome.log_line = line;
            } catch (const Error& e) {
                outcome.error_code = exit_code_for(e);
                outcome.error_text = rec.slide_id + ": " + e.what();
            }
        }
    };

    unsigned jobs = std::max(1u, args.jobs);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // log order independent of worker scheduling: sorted by slide_id
    std::vector<std::string> lines;
    for (const auto& o : outcomes)
        if (!o.log_line.empty()) lines.push_back(o.log_line);
    std::sort(lines.begin(), lines.end());
    for (const auto& line : lines) log_info(line);

    int exit_code = 0;
    for (const auto& o : outcomes) {
        if (!o.error_code) continue;
        log_error(o.error_text);
        // I/O failures outrank empty-tissue slides
        if (exit_code == 0 || (*o.error_code == 3 && exit_code == 4)) exit_code = *o.error_code;
    }
    return exit_code;
}

// ------------------------------------------------------- shared report output

void write_metric_outputs(const fs::path& out_dir, const metrics::MetricReport& report,
                          const std::string& title) {
    write_text_file(out_dir / "roc.csv", metrics::roc_to_csv(report.roc));
    write_text_file(out_dir / "confusion.json", metrics::confusion_to_json(report.confusion) + "\n");
    write_text_file(out_dir / "roc.svg", svg::render_roc(report.roc, report.auc, title));
}

json metric_point_json(const metrics::MetricReport& r) {
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

// ---------------------------------------------------------------------- train

struct TrainArgs {
    std::string manifest;
    std::string bags;
    std::string config;
    std::string out;
    std::string dataset = "internal";
    std::string external_manifest;
    std::string external_bags;
    std::optional<std::uint64_t> seed;       // overrides config seed
    std::optional<double> threshold;         // overrides config threshold
};

int cmd_train(const TrainArgs& args) {
    auto config = experiment::parse_experiment_config(
        args.config.empty() ? "{}" : read_text_file(args.config));
    if (args.seed) {
        config.seed = *args.seed;
        config.train.seed = *args.seed;
    }
    if (args.threshold) config.threshold = *args.threshold;

    auto manifest = load_manifest(args.manifest);
    auto bags = encoder::load_cohort_bags(args.bags, manifest);

    std::optional<core::SlideManifest> ext_manifest;
    std::map<std::string, encoder::EmbeddingBag> ext_bags;
    if (!args.external_manifest.empty()) {
        if (args.external_bags.empty())
            throw ConfigError("--external-manifest requires --external-bags");
        ext_manifest = load_manifest(args.external_manifest);
        ext_bags = encoder::load_cohort_bags(args.external_bags, *ext_manifest);
    }

    ensure_out_dir(args.out);
    auto out = experiment::run_experiment(manifest, bags, config,
                                          ext_manifest ? &*ext_manifest : nullptr,
                                          ext_manifest ? &ext_bags : nullptr);

    fs::path dir(args.out);
    write_text_file(dir / "report.json",
                    experiment::report_to_json(out.report, args.dataset));
    write_text_file(dir / "assignments.csv",
                    experiment::assignments_to_csv(out.split, out.folds));
    for (std::size_t i = 0; i < out.cv.size(); ++i) {
        write_text_file(dir / ("history_fold" + std::to_string(i) + ".csv"),
                        experiment::history_to_csv(out.cv[i].history));
        mil::write_params_file(out.cv[i].params,
                               dir / ("model_fold" + std::to_string(i) + ".abml"));
    }
    mil::write_params_file(out.cv[static_cast<std::size_t>(out.report.best_fold)].params,
                           dir / "model.abml");
    write_metric_outputs(dir, out.report.holdout.best, args.dataset + " held-out ROC");

    log_info("best fold " + std::to_string(out.report.best_fold) + ", holdout auc " +
             io::fmt_double(out.report.holdout.best.auc));
    return 0;
}

// ------------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string manifest;
    std::string bags;
    std::string out;
    std::string dataset = "external";
    double threshold = 0.5;
};

int cmd_evaluate(const EvaluateArgs& args) {
    auto params = mil::read_params_file(args.model);
    auto manifest = load_manifest(args.manifest);
    auto bags = encoder::load_cohort_bags(args.bags, manifest);

    std::vector<mil::BagRef> refs;
    for (const auto& rec : manifest.records) {
        const auto& bag = bags.at(rec.slide_id);
        refs.push_back({&bag, rec.label});
    }
    auto report = experiment::evaluate_holdout(params, refs, args.threshold);

    ensure_out_dir(args.out);
    fs::path dir(args.out);
    json j;
    j["kind"] = "evaluation";
    j["dataset"] = args.dataset;
    j["threshold"] = args.threshold;
    j["metrics"] = metric_point_json(report);
    write_text_file(dir / "report.json", j.dump(2) + "\n");
    write_metric_outputs(dir, report, args.dataset + " ROC");

    log_info(args.dataset + " auc " + io::fmt_double(report.auc));
    return 0;
}

// --------------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> reports;
    std::string out;
};

struct ReportRow {
    std::string dataset;
    std::uint64_t n = 0;
    double accuracy = 0, precision = 0, recall = 0, f1 = 0, mcc = 0, auc = 0;
    std::optional<double> auc_mean, auc_std;
    json roc;
};

ReportRow parse_report_row(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    try {
        ReportRow row;
        row.dataset = j.at("dataset").get<std::string>();
        const json& metrics_json =
            j.at("kind") == "experiment" ? j.at("holdout").at("best_model") : j.at("metrics");
        row.accuracy = metrics_json.at("accuracy").get<double>();
        row.precision = metrics_json.at("precision").get<double>();
        row.recall = metrics_json.at("recall").get<double>();
        row.f1 = metrics_json.at("f1").get<double>();
        row.mcc = metrics_json.at("mcc").get<double>();
        row.auc = metrics_json.at("auc").get<double>();
        row.n = metrics_json.at("n_pos").get<std::uint64_t>() +
                metrics_json.at("n_neg").get<std::uint64_t>();
        row.roc = metrics_json.at("roc");
        if (j.at("kind") == "experiment") {
            const json& per_fold = j.at("holdout").at("per_fold").at("auc");
            row.auc_mean = per_fold.at("mean").get<double>();
            row.auc_std = per_fold.at("std").get<double>();
        }
        return row;
    } catch (const json::exception& e) {
        throw ParseError("'" + path.string() + "': malformed report: " + e.what());
    }
}

int cmd_report(const ReportArgs& args) {
    ensure_out_dir(args.out);
    std::vector<ReportRow> rows;
    for (const auto& path : args.reports) rows.push_back(parse_report_row(path));

    std::string csv = "dataset,n,accuracy,precision,recall,f1,mcc,auc\n";
    std::printf("%-16s %6s %9s %10s %8s %8s %8s %8s\n", "dataset", "n", "accuracy",
                "precision", "recall", "f1", "mcc", "auc");
    for (const auto& row : rows) {
        csv += row.dataset + "," + std::to_string(row.n) + "," + io::fmt_double(row.accuracy) +
               "," + io::fmt_double(row.precision) + "," + io::fmt_double(row.recall) + "," +
               io::fmt_double(row.f1) + "," + io::fmt_double(row.mcc) + "," +
               io::fmt_double(row.auc) + "\n";
        std::printf("%-16s %6llu %9.3f %10.3f %8.3f %8.3f %8.3f %8.3f\n", row.dataset.c_str(),
                    static_cast<unsigned long long>(row.n), row.accuracy, row.precision,
                    row.recall, row.f1, row.mcc, row.auc);

        metrics::RocCurve curve;
        for (const auto& p : row.roc) {
            double threshold = p.at("threshold").is_string()
                                   ? std::numeric_limits<double>::infinity()
                                   : p.at("threshold").get<double>();
            curve.points.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>(),
                                    threshold});
        }
        write_text_file(fs::path(args.out) / ("roc_" + row.dataset + ".svg"),
                        svg::render_roc(curve, row.auc, row.dataset + " ROC"));
    }
    write_text_file(fs::path(args.out) / "summary.csv", csv);

    if (rows.size() > 1) {
        std::string cmp = "dataset,auc_mean,auc_std,rendered\n";
        for (const auto& row : rows) {
            double mean = row.auc_mean.value_or(row.auc);
            cmp += row.dataset + "," + io::fmt_double(mean) + ",";
            if (row.auc_std) {
                cmp += io::fmt_double(*row.auc_std) + "," +
                       metrics::format_mean_std(mean, *row.auc_std);
            } else {
                cmp += "," + io::fmt_double(mean);
            }
            cmp += "\n";
        }
        write_text_file(fs::path(args.out) / "comparison.csv", cmp);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Whole-slide EGFR-status pipeline: tissue segmentation, 256x256 "
                 "tiling, patch embedding bags, gated attention-MIL training and "
                 "stratified-split / 5-fold-CV evaluation"};
    app.require_subcommand(1);

    SynthSlideArgs synth_slide;
    auto* sc_synth_slide =
        app.add_subcommand("synth-slide", "Generate synthetic slides with ground-truth masks");
    sc_synth_slide->add_option("--out", synth_slide.out, "Output directory")->required();
    sc_synth_slide->add_option("--count", synth_slide.count, "Number of slides")
        ->capture_default_str();
    sc_synth_slide->add_option("--seed", synth_slide.seed, "Base seed")->capture_default_str();
    sc_synth_slide->add_option("--width", synth_slide.width, "Slide width px")
        ->capture_default_str();
    sc_synth_slide->add_option("--height", synth_slide.height, "Slide height px")
        ->capture_default_str();
    sc_synth_slide->add_option("--blobs", synth_slide.blobs, "Tissue blobs per slide")
        ->capture_default_str();

    SynthBagsArgs synth_bags;
    auto* sc_synth_bags = app.add_subcommand(
        "synth-bags", "Generate a synthetic embedding-bag cohort with planted signal");
    sc_synth_bags->add_option("--out", synth_bags.out, "Output directory")->required();
    sc_synth_bags->add_option("--count", synth_bags.count, "Number of bags")
        ->capture_default_str();
    sc_synth_bags->add_option("--seed", synth_bags.seed, "Seed")->capture_default_str();
    sc_synth_bags->add_option("--dim", synth_bags.dim, "Embedding dimension")
        ->capture_default_str();
    sc_synth_bags->add_option("--mu", synth_bags.mu, "Signal strength")->capture_default_str();
    sc_synth_bags->add_option("--sigma", synth_bags.sigma, "Noise sigma")->capture_default_str();
    sc_synth_bags
        ->add_option("--pos-fraction", synth_bags.positive_fraction, "Positive bag fraction")
        ->capture_default_str();
    sc_synth_bags->add_option("--n-min", synth_bags.n_min, "Min instances per bag")
        ->capture_default_str();
    sc_synth_bags->add_option("--n-max", synth_bags.n_max, "Max instances per bag")
        ->capture_default_str();

    SegmentArgs segment;
    auto* sc_segment = app.add_subcommand("segment", "Tissue mask for one slide image");
    sc_segment->add_option("--image", segment.image, "Input image (.png/.ppm)")->required();
    sc_segment->add_option("--out", segment.out, "Output mask PNG (tissue=white)")->required();
    sc_segment->add_option("--sat-min", segment.sat_min, "HSV saturation floor")
        ->capture_default_str();
    sc_segment->add_option("--val-max", segment.val_max, "HSV value ceiling")
        ->capture_default_str();

    TileArgs tile;
    auto* sc_tile = app.add_subcommand("tile", "Non-overlapping tile grid for one slide image");
    sc_tile->add_option("--image", tile.image, "Input image")->required();
    sc_tile->add_option("--out", tile.out, "Output grid CSV (x,y)")->required();
    sc_tile->add_option("--mask", tile.mask, "Tissue mask PNG; filters tiles when given");
    sc_tile->add_option("--tile-size", tile.tile_size, "Tile edge px")->capture_default_str();
    sc_tile->add_option("--min-tissue", tile.min_tissue, "Min tissue fraction per kept tile")
        ->capture_default_str();

    EncodeArgs encode;
    auto* sc_encode =
        app.add_subcommand("encode", "Embedding bags (.ebag) for every manifest slide");
    sc_encode->add_option("--manifest", encode.manifest, "Cohort manifest CSV")->required();
    sc_encode->add_option("--out", encode.out, "Output directory")->required();
    sc_encode->add_option("--encoder", encode.encoder_kind, "Encoder: stub|precomputed")
        ->capture_default_str();
    sc_encode->add_option("--bags", encode.bags, "Source dir of precomputed .ebag files");
    sc_encode->add_option("--dim", encode.dim, "Embedding dimension")->capture_default_str();
    sc_encode->add_option("--seed", encode.seed, "Stub encoder seed")->capture_default_str();
    sc_encode->add_option("--jobs", encode.jobs, "Parallel slide workers")
        ->capture_default_str();
    sc_encode->add_option("--tile-size", encode.tile_size, "Tile edge px")
        ->capture_default_str();
    sc_encode->add_option("--min-tissue", encode.min_tissue, "Min tissue fraction per tile")
        ->capture_default_str();
    sc_encode->add_option("--sat-min", encode.sat_min, "HSV saturation floor")
        ->capture_default_str();
    sc_encode->add_option("--val-max", encode.val_max, "HSV value ceiling")
        ->capture_default_str();

    TrainArgs train;
    auto* sc_train = app.add_subcommand(
        "train", "Stratified split, k-fold CV, model selection and held-out evaluation");
    sc_train->add_option("--manifest", train.manifest, "Cohort manifest CSV")->required();
    sc_train->add_option("--bags", train.bags, "Directory of .ebag files")->required();
    sc_train->add_option("--config", train.config, "Experiment config JSON");
    sc_train->add_option("--out", train.out, "Output directory")->required();
    sc_train->add_option("--dataset", train.dataset, "Dataset name for reports")
        ->capture_default_str();
    sc_train->add_option("--external-manifest", train.external_manifest,
                         "External test cohort manifest");
    sc_train->add_option("--external-bags", train.external_bags,
                         "External test cohort .ebag directory");
    std::uint64_t train_seed = 0;
    auto* train_seed_opt =
        sc_train->add_option("--seed", train_seed, "Override the config seed");
    double train_threshold = 0.5;
    auto* train_threshold_opt =
        sc_train->add_option("--threshold", train_threshold, "Override the decision threshold");

    EvaluateArgs evaluate;
    auto* sc_evaluate =
        app.add_subcommand("evaluate", "Evaluate a saved checkpoint on a cohort");
    sc_evaluate->add_option("--model", evaluate.model, "Checkpoint .abml")->required();
    sc_evaluate->add_option("--manifest", evaluate.manifest, "Cohort manifest CSV")->required();
    sc_evaluate->add_option("--bags", evaluate.bags, "Directory of .ebag files")->required();
    sc_evaluate->add_option("--out", evaluate.out, "Output directory")->required();
    sc_evaluate->add_option("--dataset", evaluate.dataset, "Dataset name for reports")
        ->capture_default_str();
    sc_evaluate->add_option("--threshold", evaluate.threshold, "Decision threshold")
        ->capture_default_str();

    ReportArgs report;
    auto* sc_report =
        app.add_subcommand("report", "Summaries, comparison CSV and ROC SVGs from report.json files");
    sc_report->add_option("--out", report.out, "Output directory")->required();
    sc_report->add_option("reports", report.reports, "report.json paths")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(sc_synth_slide)) return cmd_synth_slide(synth_slide);
        if (app.got_subcommand(sc_synth_bags)) return cmd_synth_bags(synth_bags);
        if (app.got_subcommand(sc_segment)) return cmd_segment(segment);
        if (app.got_subcommand(sc_tile)) return cmd_tile(tile);
        if (app.got_subcommand(sc_encode)) return cmd_encode(encode);
        if (app.got_subcommand(sc_train)) {
            if (!train_seed_opt->empty()) train.seed = train_seed;
            if (!train_threshold_opt->empty()) train.threshold = train_threshold;
            return cmd_train(train);
        }
        if (app.got_subcommand(sc_evaluate)) return cmd_evaluate(evaluate);
        if (app.got_subcommand(sc_report)) return cmd_report(report);
    } catch (const Error& e) {
        log_error(e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        log_error(std::string("unexpected: ") + e.what());
        return 1;
    }
    return 2;
}

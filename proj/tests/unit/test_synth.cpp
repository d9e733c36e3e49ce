#include <doctest.h>

#include <cmath>

#include "slidemil/mil.hpp"
#include "slidemil/preprocess.hpp"
#include "slidemil/synth.hpp"

using namespace slidemil;
using namespace slidemil::synth;

TEST_CASE("generate_slide basics") {
    SUBCASE("no blobs means an empty mask and pure background") {
        SynthSlideSpec spec;
        spec.n_blobs = 0;
        auto slide = generate_slide(spec);
        CHECK(slide.mask.tissue_count() == 0);
        CHECK(slide.image.rgb(0, 0)[0] == spec.background[0]);
    }
    SUBCASE("generation is deterministic") {
        SynthSlideSpec spec;
        spec.seed = 17;
        auto a = generate_slide(spec);
        auto b = generate_slide(spec);
        CHECK(a.image.pixels == b.image.pixels);
        CHECK(a.mask.bits == b.mask.bits);
    }
    SUBCASE("blobs actually produce tissue") {
        SynthSlideSpec spec;
        spec.seed = 18;
        auto slide = generate_slide(spec);
        CHECK(slide.mask.tissue_count() > 10000);
    }
}

TEST_CASE("blob color box satisfies the tissue rule, background does not") {
    SynthSlideSpec spec;
    auto tissue_rule = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        std::uint8_t hi = std::max({r, g, b});
        std::uint8_t lo = std::min({r, g, b});
        double v = hi / 255.0;
        double s = hi == 0 ? 0.0 : static_cast<double>(hi - lo) / hi;
        return s > 0.08 && v < 0.95;
    };
    // sample the color box densely, including the corners
    for (int r = spec.blob_color_lo[0]; r <= spec.blob_color_hi[0]; r += 7)
        for (int g = spec.blob_color_lo[1]; g <= spec.blob_color_hi[1]; g += 8)
            for (int b = spec.blob_color_lo[2]; b <= spec.blob_color_hi[2]; b += 8)
                CHECK(tissue_rule(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                  static_cast<std::uint8_t>(b)));
    CHECK_FALSE(tissue_rule(spec.background[0], spec.background[1], spec.background[2]));
}

TEST_CASE("generated slides segment back to their ground truth") {
    SynthSlideSpec spec;
    spec.seed = 19;
    auto slide = generate_slide(spec);
    auto mask = preprocess::segment_tissue(slide.image);
    double iou = mask_iou(mask, slide.mask);
    CHECK(iou >= 0.95);
    CHECK(iou < 1.0);  // anti-aliased edges keep it below a perfect match
}

TEST_CASE("generate_bags composition") {
    SynthBagSpec spec;
    spec.n_bags = 100;
    spec.positive_fraction = 0.5;
    spec.seed = 20;
    auto cohort = generate_bags(spec);
    REQUIRE(cohort.bags.size() == 100);

    int n_pos = 0;
    for (const auto& item : cohort.bags) {
        n_pos += item.label == core::Label::EgfrPos ? 1 : 0;
        int n = static_cast<int>(item.bag.size());
        CHECK(n >= spec.n_min);
        CHECK(n <= spec.n_max);
        // label soundness: positive iff signal instances were planted
        if (item.label == core::Label::EgfrPos) {
            CHECK(!item.signal_rows.empty());
            CHECK(item.signal_rows.size() <= 3);
            for (int row : item.signal_rows) {
                CHECK(row >= 0);
                CHECK(row < n);
            }
        } else {
            CHECK(item.signal_rows.empty());
        }
    }
    CHECK(n_pos == 50);
    CHECK(std::abs(cohort.signal_direction.norm() - 1.0) <= 1e-12);

    SUBCASE("determinism") {
        auto again = generate_bags(spec);
        for (std::size_t i = 0; i < cohort.bags.size(); ++i) {
            CHECK(again.bags[i].bag.matrix == cohort.bags[i].bag.matrix);
            CHECK(again.bags[i].label == cohort.bags[i].label);
            CHECK(again.bags[i].signal_rows == cohort.bags[i].signal_rows);
        }
    }
    SUBCASE("planted rows carry the signal mean") {
        // mean projection onto the direction over planted rows should sit
        // near mu, far from 0
        double proj_sum = 0.0;
        int count = 0;
        for (const auto& item : cohort.bags)
            for (int row : item.signal_rows) {
                proj_sum += item.bag.matrix.row(row).cast<double>() * cohort.signal_direction;
                ++count;
            }
        REQUIRE(count > 0);
        CHECK(proj_sum / count == doctest::Approx(spec.signal_strength).epsilon(0.15));
    }
    SUBCASE("degenerate size range is a contract violation") {
        SynthBagSpec bad = spec;
        bad.n_min = 10;
        bad.n_max = 9;
        CHECK_THROWS_AS(generate_bags(bad), ContractError);
    }
}

TEST_CASE("cohort manifest flows through the standard parser") {
    SynthBagSpec spec;
    spec.n_bags = 10;
    spec.seed = 21;
    auto cohort = generate_bags(spec);
    auto manifest = cohort_manifest(cohort);
    auto reparsed = core::parse_manifest(core::serialize_manifest(manifest));
    CHECK(reparsed.records.size() == 10);
    CHECK(reparsed.class_counts().positives == 5);
}

TEST_CASE("trained attention concentrates on the planted instances") {
    SynthBagSpec spec;
    spec.n_bags = 60;
    spec.dim = 16;
    spec.n_min = 20;
    spec.n_max = 50;
    spec.seed = 22;
    auto cohort = generate_bags(spec);

    std::vector<mil::BagRef> train_refs, val_refs;
    for (std::size_t i = 0; i < cohort.bags.size(); ++i)
        (i % 5 == 4 ? val_refs : train_refs)
            .push_back({&cohort.bags[i].bag, cohort.bags[i].label});

    mil::TrainConfig config;
    config.seed = 23;
    config.learning_rate = 3e-3;
    config.hidden_dim = 32;
    auto trained = mil::train(train_refs, val_refs, config);

    int concentrated = 0, positives = 0;
    for (const auto& item : cohort.bags) {
        if (item.label != core::Label::EgfrPos) continue;
        ++positives;
        auto result = mil::forward(item.bag, trained.params);
        double signal_mass = 0.0;
        for (int row : item.signal_rows) signal_mass += result.attention[row];
        double uniform_mass =
            static_cast<double>(item.signal_rows.size()) / static_cast<double>(item.bag.size());
        if (signal_mass > uniform_mass) ++concentrated;
    }
    REQUIRE(positives > 0);
    CHECK(static_cast<double>(concentrated) / positives >= 0.9);
}

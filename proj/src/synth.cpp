#include "slidemil/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "slidemil/rng.hpp"

namespace slidemil::synth {

namespace {

struct Ellipse {
    double cx, cy;      // center
    double a, b;        // semi-axes
    double cos_t, sin_t;
    std::array<std::uint8_t, 3> color;
};

// fraction of the pixel covered by the ellipse, 4x4 supersampling
double coverage(const Ellipse& e, std::uint32_t px, std::uint32_t py) {
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            double x = px + (sx + 0.5) / 4.0 - e.cx;
            double y = py + (sy + 0.5) / 4.0 - e.cy;
            double u = (x * e.cos_t + y * e.sin_t) / e.a;
            double v = (-x * e.sin_t + y * e.cos_t) / e.b;
            if (u * u + v * v <= 1.0) ++inside;
        }
    }
    return inside / 16.0;
}

}  // namespace

SynthSlide generate_slide(const SynthSlideSpec& spec) {
    require(spec.width >= 256 && spec.height >= 256, "generate_slide: dims >= 256x256");
    require(spec.n_blobs >= 0, "generate_slide: n_blobs >= 0");
    require(spec.min_semi_axis > 0 && spec.max_semi_axis >= spec.min_semi_axis,
            "generate_slide: bad semi-axis range");

    SplitMix64 rng(spec.seed);
    SynthSlide slide;
    slide.image = image::make_image(spec.width, spec.height, spec.background[0],
                                    spec.background[1], spec.background[2]);
    slide.mask.width = spec.width;
    slide.mask.height = spec.height;
    slide.mask.bits.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

    // coverage accumulated across blobs so overlaps blend once, and the
    // ground truth is the union of >= 0.5-covered pixels
    std::vector<float> total_cov(slide.mask.bits.size(), 0.0f);

    for (int blob = 0; blob < spec.n_blobs; ++blob) {
        Ellipse e;
        e.a = rng.next_uniform(spec.min_semi_axis, spec.max_semi_axis);
        e.b = rng.next_uniform(spec.min_semi_axis, spec.max_semi_axis);
        double margin = std::max(e.a, e.b);
        e.cx = rng.next_uniform(margin, spec.width - margin);
        e.cy = rng.next_uniform(margin, spec.height - margin);
        double theta = rng.next_uniform(0.0, 3.141592653589793);
        e.cos_t = std::cos(theta);
        e.sin_t = std::sin(theta);
        for (int ch = 0; ch < 3; ++ch)
            e.color[ch] = static_cast<std::uint8_t>(rng.next_uniform(
                spec.blob_color_lo[ch], spec.blob_color_hi[ch] + 1.0));

        auto x0 = static_cast<std::uint32_t>(std::max(0.0, std::floor(e.cx - margin - 1)));
        auto y0 = static_cast<std::uint32_t>(std::max(0.0, std::floor(e.cy - margin - 1)));
        auto x1 = static_cast<std::uint32_t>(
            std::min<double>(spec.width, std::ceil(e.cx + margin + 1)));
        auto y1 = static_cast<std::uint32_t>(
            std::min<double>(spec.height, std::ceil(e.cy + margin + 1)));

        for (std::uint32_t y = y0; y < y1; ++y) {
            for (std::uint32_t x = x0; x < x1; ++x) {
                double cov = coverage(e, x, y);
                if (cov <= 0.0) continue;
                std::uint8_t* px = slide.image.rgb(x, y);
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] = static_cast<std::uint8_t>(
                        std::lround(cov * e.color[ch] + (1.0 - cov) * px[ch]));
                std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
                total_cov[i] = std::min(1.0f, total_cov[i] + static_cast<float>(cov));
                if (total_cov[i] >= 0.5f) slide.mask.bits[i] = 1;
            }
        }
    }
    return slide;
}

double mask_iou(const preprocess::TissueMask& a, const preprocess::TissueMask& b) {
    require(a.width == b.width && a.height == b.height, "mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SynthCohort generate_bags(const SynthBagSpec& spec) {
    require(spec.n_bags >= 1, "generate_bags: n_bags >= 1");
    require(spec.dim >= 2, "generate_bags: dim >= 2");
    require(spec.n_min >= 1 && spec.n_min <= spec.n_max, "generate_bags: bad bag size range");
    require(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0,
            "generate_bags: positive_fraction in (0,1)");
    require(spec.signal_strength >= 0.0, "generate_bags: signal_strength >= 0");
    require(spec.noise_sigma >= 0.0, "generate_bags: noise_sigma >= 0");

    SynthCohort cohort;

    // unit signal direction from its own stream
    SplitMix64 dir_rng(spec.seed ^ 0xd1ce5badULL);
    cohort.signal_direction.resize(spec.dim);
    for (std::uint32_t i = 0; i < spec.dim; ++i)
        cohort.signal_direction[i] = dir_rng.next_gaussian();
    double norm = cohort.signal_direction.norm();
    if (norm == 0.0) cohort.signal_direction[0] = 1.0;  // astronomically unlikely
    else cohort.signal_direction /= norm;

    const int n_pos = static_cast<int>(std::llround(spec.n_bags * spec.positive_fraction));

    for (int i = 0; i < spec.n_bags; ++i) {
        // per-bag derived seed: generation is independent of scheduling
        SplitMix64 rng(spec.seed + 1 + static_cast<std::uint64_t>(i));
        SynthBag item;
        item.label = i < n_pos ? core::Label::EgfrPos : core::Label::EgfrNeg;

        int n = spec.n_min + static_cast<int>(rng.next_below(
                    static_cast<std::uint64_t>(spec.n_max - spec.n_min + 1)));
        Eigen::MatrixXd rows(n, spec.dim);
        for (int r = 0; r < n; ++r)
            for (std::uint32_t c = 0; c < spec.dim; ++c)
                rows(r, c) = spec.noise_sigma * rng.next_gaussian();

        if (item.label == core::Label::EgfrPos) {
            int n_signal = 1 + static_cast<int>(rng.next_below(3));
            n_signal = std::min(n_signal, n);
            std::vector<int> positions(n);
            for (int r = 0; r < n; ++r) positions[r] = r;
            rng.shuffle(positions);
            positions.resize(n_signal);
            std::sort(positions.begin(), positions.end());
            for (int row : positions)
                rows.row(row) += spec.signal_strength * cohort.signal_direction.transpose();
            item.signal_rows = std::move(positions);
        }

        char id[32];
        std::snprintf(id, sizeof(id), "synth-%04d", i);
        item.bag.slide_id = id;
        item.bag.dim = spec.dim;
        item.bag.matrix = rows.cast<float>();
        item.bag.coords.resize(n);
        for (int r = 0; r < n; ++r)
            item.bag.coords[static_cast<std::size_t>(r)] = {static_cast<std::uint32_t>(r), 0};
        item.bag.label = item.label;
        cohort.bags.push_back(std::move(item));
    }
    return cohort;
}

core::SlideManifest cohort_manifest(const SynthCohort& cohort) {
    core::SlideManifest manifest;
    for (const auto& item : cohort.bags) {
        core::SlideRecord rec;
        rec.slide_id = item.bag.slide_id;
        rec.image_uri = "";
        rec.variant = item.label == core::Label::EgfrPos ? core::Variant::Egfr
                                                         : core::Variant::TripleNeg;
        rec.label = item.label;
        rec.magnification = 40.0;
        rec.microns_per_pixel = 0.23;
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

}  // namespace slidemil::synth

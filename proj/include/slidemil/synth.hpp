#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "slidemil/core.hpp"
#include "slidemil/encoder.hpp"
#include "slidemil/image.hpp"
#include "slidemil/preprocess.hpp"

namespace slidemil::synth {

// Synthetic slide: elliptical stained-tissue blobs on a near-white
// background, plus the exact ground-truth mask the rasterizer produced.
// Blob colors are drawn from a pinkish/purple box chosen so every color in
// it passes the tissue rule (S > 0.08, V < 0.95) while the background fails
// it; edges are anti-aliased, so segmentation IoU stays a little below 1.
struct SynthSlideSpec {
    std::uint32_t width = 1024;
    std::uint32_t height = 768;
    int n_blobs = 8;
    // G stays well below R so saturation never drops under the 0.08 floor
    std::array<std::uint8_t, 3> blob_color_lo = {150, 60, 120};
    std::array<std::uint8_t, 3> blob_color_hi = {220, 110, 200};
    std::array<std::uint8_t, 3> background = {247, 245, 248};
    // large enough that tissue regions span whole 256px tiles
    double min_semi_axis = 90.0;
    double max_semi_axis = 180.0;
    std::uint64_t seed = 0;
};

struct SynthSlide {
    image::RasterImage image;
    preprocess::TissueMask mask;  // ground truth: pixels with blob coverage >= 0.5
};

SynthSlide generate_slide(const SynthSlideSpec& spec);

// Synthetic embedding-bag cohort under the classical MIL witness assumption:
// positive bags plant 1-3 instances at mean signal_strength * direction,
// everything else is isotropic N(0, sigma^2) noise.
struct SynthBagSpec {
    int n_bags = 100;
    std::uint32_t dim = 16;
    int n_min = 20;
    int n_max = 50;
    double signal_strength = 4.0;  // mu; 0 makes both classes identical
    double noise_sigma = 1.0;
    double positive_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct SynthBag {
    encoder::EmbeddingBag bag;
    core::Label label = core::Label::EgfrNeg;
    std::vector<int> signal_rows;  // planted witness instances; empty for negatives
};

struct SynthCohort {
    std::vector<SynthBag> bags;
    Eigen::VectorXd signal_direction;  // unit vector
};

SynthCohort generate_bags(const SynthBagSpec& spec);

// Manifest for a generated cohort so it flows through the same pipeline as
// real data (positive bags as EGFR, negative as TRIPLE_NEG).
core::SlideManifest cohort_manifest(const SynthCohort& cohort);

double mask_iou(const preprocess::TissueMask& a, const preprocess::TissueMask& b);

}  // namespace slidemil::synth

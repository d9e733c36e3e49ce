#include <doctest.h>

#include <set>

#include "slidemil/preprocess.hpp"
#include "slidemil/rng.hpp"
#include "slidemil/synth.hpp"

using namespace slidemil;
using namespace slidemil::preprocess;

TEST_CASE("segment_tissue marks nothing on an all-white slide") {
    auto img = image::make_image(64, 32, 255, 255, 255);
    auto mask = segment_tissue(img);
    CHECK(mask.width == 64);
    CHECK(mask.height == 32);
    CHECK(mask.tissue_count() == 0);
}

TEST_CASE("segment_tissue HSV rule on a known pixel") {
    // RGB (180,90,160): S = (180-90)/180 = 0.5, V = 180/255 ~= 0.706
    auto img = image::make_image(1, 1, 180, 90, 160);
    CHECK(segment_tissue(img).at(0, 0));

    SUBCASE("thresholds are strict comparisons") {
        // saturated but too bright: V = 1.0
        auto bright = image::make_image(1, 1, 255, 128, 128);
        CHECK_FALSE(segment_tissue(bright).at(0, 0));
        // dark but unsaturated: S = 0
        auto gray = image::make_image(1, 1, 100, 100, 100);
        CHECK_FALSE(segment_tissue(gray).at(0, 0));
        // faintly stained: S = 0.05, below the default but above a custom floor
        auto faint = image::make_image(1, 1, 200, 190, 190);
        CHECK_FALSE(segment_tissue(faint).at(0, 0));
        CHECK(segment_tissue(faint, {.sat_min = 0.04, .val_max = 0.95}).at(0, 0));
    }
}

TEST_CASE("segment_tissue recovers the synthetic ground truth") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        synth::SynthSlideSpec spec;
        spec.seed = seed;
        auto slide = synth::generate_slide(spec);
        auto mask = segment_tissue(slide.image);
        CHECK(synth::mask_iou(mask, slide.mask) >= 0.95);
    }
}

TEST_CASE("build_tile_grid tile counts") {
    SUBCASE("paper-scale slide lands on ~2000 patches") {
        auto grid = build_tile_grid(12800, 10240, 256);
        CHECK(grid.tiles.size() == 2000);  // 50 x 40
        CHECK(grid.tiles.front().x == 0);
        CHECK(grid.tiles.front().y == 0);
        // row-major: second tile advances in x
        CHECK(grid.tiles[1].x == 256);
        CHECK(grid.tiles[1].y == 0);
    }
    SUBCASE("floor rule keeps one full tile") {
        auto grid = build_tile_grid(300, 300, 256);
        REQUIRE(grid.tiles.size() == 1);
        CHECK(grid.tiles[0] == TileCoord{0, 0});
    }
    SUBCASE("sub-tile dimension yields the empty grid") {
        CHECK(build_tile_grid(255, 1000, 256).tiles.empty());
        CHECK(build_tile_grid(1000, 255, 256).tiles.empty());
    }
}

TEST_CASE("tile grids are disjoint, aligned and complete") {
    SplitMix64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::uint32_t ts = 1 + static_cast<std::uint32_t>(rng.next_below(8));
        std::uint32_t w = static_cast<std::uint32_t>(rng.next_below(64));
        std::uint32_t h = static_cast<std::uint32_t>(rng.next_below(64));
        auto grid = build_tile_grid(w, h, ts);
        CHECK(grid.tiles.size() ==
              static_cast<std::size_t>(w / ts) * static_cast<std::size_t>(h / ts));
        std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
        for (const auto& t : grid.tiles) {
            CHECK(t.x % ts == 0);
            CHECK(t.y % ts == 0);
            CHECK(t.x + ts <= w);
            CHECK(t.y + ts <= h);
            // alignment + uniqueness of origins == pairwise disjoint rectangles
            CHECK(seen.insert({t.x, t.y}).second);
        }
    }
}

namespace {

TissueMask constant_mask(std::uint32_t w, std::uint32_t h, bool tissue) {
    TissueMask mask;
    mask.width = w;
    mask.height = h;
    mask.bits.assign(static_cast<std::size_t>(w) * h, tissue ? 1 : 0);
    return mask;
}

}  // namespace

TEST_CASE("filter_tiles thresholding") {
    auto grid = build_tile_grid(512, 512, 256);
    REQUIRE(grid.tiles.size() == 4);

    SUBCASE("all-tissue mask keeps everything") {
        auto kept = filter_tiles(grid, constant_mask(512, 512, true), 0.5);
        CHECK(kept.tiles == grid.tiles);
    }
    SUBCASE("empty mask keeps nothing") {
        CHECK(filter_tiles(grid, constant_mask(512, 512, false), 0.5).tiles.empty());
    }
    SUBCASE("exact half tissue passes the >= rule") {
        auto mask = constant_mask(512, 512, false);
        // fill exactly half of the (0,0) tile: 128 of 256 rows
        for (std::uint32_t y = 0; y < 128; ++y)
            for (std::uint32_t x = 0; x < 256; ++x) mask.set(x, y, true);
        CHECK(tile_tissue_fraction(mask, {0, 0}, 256) == 0.5);
        auto kept = filter_tiles(grid, mask, 0.5);
        REQUIRE(kept.tiles.size() == 1);
        CHECK(kept.tiles[0] == TileCoord{0, 0});
    }
    SUBCASE("dimension mismatch is a contract violation") {
        CHECK_THROWS_AS(filter_tiles(grid, constant_mask(256, 512, true), 0.5), ContractError);
    }
    SUBCASE("raising the threshold never keeps more tiles") {
        SplitMix64 rng(31);
        auto mask = constant_mask(512, 512, false);
        for (std::uint32_t y = 0; y < 512; ++y)
            for (std::uint32_t x = 0; x < 512; ++x) mask.set(x, y, rng.next_double() < 0.4);
        std::size_t prev = grid.tiles.size() + 1;
        for (double threshold : {0.0, 0.2, 0.39, 0.41, 0.8, 1.0}) {
            auto kept = filter_tiles(grid, mask, threshold);
            CHECK(kept.tiles.size() <= prev);
            prev = kept.tiles.size();
        }
    }
}

TEST_CASE("extract_patches copies tiles verbatim in grid order") {
    SUBCASE("single tile covering the whole image") {
        SplitMix64 rng(41);
        auto img = image::make_image(256, 256);
        for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng.next_below(256));
        auto grid = build_tile_grid(256, 256, 256);
        auto patches = extract_patches(img, grid, constant_mask(256, 256, true));
        REQUIRE(patches.size() == 1);
        CHECK(patches[0].pixels == img.pixels);
        CHECK(patches[0].tissue_fraction == 1.0);
        CHECK(patches[0].origin == TileCoord{0, 0});
    }
    SUBCASE("empty grid yields the empty list") {
        auto img = image::make_image(100, 100);
        auto grid = build_tile_grid(100, 100, 256);
        CHECK(extract_patches(img, grid, constant_mask(100, 100, true)).empty());
    }
    SUBCASE("row-major order and per-tile fractions") {
        auto img = image::make_image(8, 4, 10, 20, 30);
        auto grid = build_tile_grid(8, 4, 2);  // 4 x 2 tiles
        auto mask = constant_mask(8, 4, false);
        for (std::uint32_t x = 0; x < 2; ++x) mask.set(x, 0, true);  // half of tile (0,0)
        auto patches = extract_patches(img, grid, mask);
        REQUIRE(patches.size() == 8);
        CHECK(patches[0].origin == TileCoord{0, 0});
        CHECK(patches[1].origin == TileCoord{2, 0});
        CHECK(patches[4].origin == TileCoord{0, 2});
        CHECK(patches[0].tissue_fraction == 0.5);
        CHECK(patches[1].tissue_fraction == 0.0);
    }
    SUBCASE("out-of-bounds tile is a contract violation") {
        auto img = image::make_image(100, 100);
        TileGrid grid;
        grid.tile_size = 64;
        grid.source_width = 100;
        grid.source_height = 100;
        grid.tiles.push_back({64, 64});
        CHECK_THROWS_AS(extract_patches(img, grid, constant_mask(100, 100, true)),
                        ContractError);
    }
}

TEST_CASE("mask image round trip and grid csv") {
    auto mask = constant_mask(5, 3, false);
    mask.set(2, 1, true);
    mask.set(4, 2, true);
    auto back = mask_from_image(mask_to_image(mask));
    CHECK(back.bits == mask.bits);

    auto grid = build_tile_grid(512, 256, 256);
    CHECK(grid_to_csv(grid) == "x,y\n0,0\n256,0\n");
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slidemil/image.hpp"

namespace slidemil::preprocess {

inline constexpr std::uint32_t kDefaultTileSize = 256;
inline constexpr double kDefaultMinTissueFraction = 0.5;

// HSV thresholds for tissue vs background/artefact. A pixel is tissue iff
// saturation > sat_min and value < val_max: stained tissue is saturated,
// glass margin / white space / bubbles are bright and washed out.
struct SegmentationParams {
    double sat_min = 0.08;
    double val_max = 0.95;
};

struct TissueMask {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> bits;  // one per pixel, 1 = tissue

    bool at(std::uint32_t x, std::uint32_t y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(std::uint32_t x, std::uint32_t y, bool tissue) {
        bits[static_cast<std::size_t>(y) * width + x] = tissue ? 1 : 0;
    }
    std::size_t tissue_count() const;
};

struct TileCoord {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    bool operator==(const TileCoord&) const = default;
};

// Non-overlapping tile_size x tile_size tiles, coordinates multiples of
// tile_size, partial edge tiles dropped, row-major order.
struct TileGrid {
    std::uint32_t tile_size = kDefaultTileSize;
    std::uint32_t source_width = 0;
    std::uint32_t source_height = 0;
    std::vector<TileCoord> tiles;
};

struct Patch {
    TileCoord origin;
    std::uint32_t size = kDefaultTileSize;
    std::vector<std::uint8_t> pixels;  // 3 * size * size RGB
    double tissue_fraction = 0.0;      // tissue pixels / size^2
};

TissueMask segment_tissue(const image::RasterImage& img,
                          const SegmentationParams& params = {});

TileGrid build_tile_grid(std::uint32_t width, std::uint32_t height,
                         std::uint32_t tile_size = kDefaultTileSize);

// Keeps tiles with tissue_fraction >= min_tissue_fraction, order preserved.
TileGrid filter_tiles(const TileGrid& grid, const TissueMask& mask,
                      double min_tissue_fraction = kDefaultMinTissueFraction);

std::vector<Patch> extract_patches(const image::RasterImage& img,
                                   const TileGrid& grid, const TissueMask& mask);

double tile_tissue_fraction(const TissueMask& mask, TileCoord origin,
                            std::uint32_t tile_size);

// Debug/audit exports.
std::string grid_to_csv(const TileGrid& grid);                // header "x,y"
image::RasterImage mask_to_image(const TissueMask& mask);     // tissue = white
TissueMask mask_from_image(const image::RasterImage& img);    // R >= 128 = tissue

}  // namespace slidemil::preprocess

#include "slidemil/preprocess.hpp"

#include <algorithm>
#include <numeric>

namespace slidemil::preprocess {

std::size_t TissueMask::tissue_count() const {
    return static_cast<std::size_t>(
        std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

TissueMask segment_tissue(const image::RasterImage& img, const SegmentationParams& params) {
    if (!img.valid()) throw ContractError("segment_tissue: invalid image");
    require(params.sat_min >= 0.0 && params.sat_min <= 1.0, "segment_tissue: sat_min in [0,1]");
    require(params.val_max >= 0.0 && params.val_max <= 1.0, "segment_tissue: val_max in [0,1]");

    TissueMask mask;
    mask.width = img.width;
    mask.height = img.height;
    mask.bits.resize(static_cast<std::size_t>(img.width) * img.height);

    const std::uint8_t* p = img.pixels.data();
    for (std::size_t i = 0; i < mask.bits.size(); ++i, p += 3) {
        std::uint8_t hi = std::max({p[0], p[1], p[2]});
        std::uint8_t lo = std::min({p[0], p[1], p[2]});
        double value = hi / 255.0;
        double saturation = hi == 0 ? 0.0 : static_cast<double>(hi - lo) / hi;
        mask.bits[i] = (saturation > params.sat_min && value < params.val_max) ? 1 : 0;
    }
    return mask;
}

TileGrid build_tile_grid(std::uint32_t width, std::uint32_t height, std::uint32_t tile_size) {
    require(tile_size >= 1, "build_tile_grid: tile_size >= 1");
    TileGrid grid;
    grid.tile_size = tile_size;
    grid.source_width = width;
    grid.source_height = height;
    std::uint32_t cols = width / tile_size;
    std::uint32_t rows = height / tile_size;
    grid.tiles.reserve(static_cast<std::size_t>(cols) * rows);
    for (std::uint32_t j = 0; j < rows; ++j)
        for (std::uint32_t i = 0; i < cols; ++i)
            grid.tiles.push_back({i * tile_size, j * tile_size});
    return grid;
}

double tile_tissue_fraction(const TissueMask& mask, TileCoord origin, std::uint32_t tile_size) {
    require(origin.x + tile_size <= mask.width && origin.y + tile_size <= mask.height,
            "tile_tissue_fraction: tile outside mask");
    std::size_t count = 0;
    for (std::uint32_t dy = 0; dy < tile_size; ++dy) {
        const std::uint8_t* row =
            mask.bits.data() + static_cast<std::size_t>(origin.y + dy) * mask.width + origin.x;
        count += std::accumulate(row, row + tile_size, std::size_t{0});
    }
    return static_cast<double>(count) /
           (static_cast<double>(tile_size) * static_cast<double>(tile_size));
}

TileGrid filter_tiles(const TileGrid& grid, const TissueMask& mask, double min_tissue_fraction) {
    require(mask.width == grid.source_width && mask.height == grid.source_height,
            "filter_tiles: mask dims must equal grid source dims");
    require(min_tissue_fraction >= 0.0 && min_tissue_fraction <= 1.0,
            "filter_tiles: min_tissue_fraction in [0,1]");

    TileGrid out;
    out.tile_size = grid.tile_size;
    out.source_width = grid.source_width;
    out.source_height = grid.source_height;
    for (const auto& tile : grid.tiles)
        if (tile_tissue_fraction(mask, tile, grid.tile_size) >= min_tissue_fraction)
            out.tiles.push_back(tile);
    return out;
}

std::vector<Patch> extract_patches(const image::RasterImage& img, const TileGrid& grid,
                                   const TissueMask& mask) {
    require(img.width == grid.source_width && img.height == grid.source_height,
            "extract_patches: image dims must equal grid source dims");
    require(mask.width == img.width && mask.height == img.height,
            "extract_patches: mask dims must equal image dims");

    const std::uint32_t ts = grid.tile_size;
    std::vector<Patch> patches;
    patches.reserve(grid.tiles.size());
    for (const auto& tile : grid.tiles) {
        require(tile.x + ts <= img.width && tile.y + ts <= img.height,
                "extract_patches: tile outside image");
        Patch patch;
        patch.origin = tile;
        patch.size = ts;
        patch.pixels.resize(3ull * ts * ts);
        for (std::uint32_t dy = 0; dy < ts; ++dy) {
            const std::uint8_t* src = img.rgb(tile.x, tile.y + dy);
            std::copy_n(src, 3ull * ts, patch.pixels.data() + 3ull * ts * dy);
        }
        patch.tissue_fraction = tile_tissue_fraction(mask, tile, ts);
        patches.push_back(std::move(patch));
    }
    return patches;
}

std::string grid_to_csv(const TileGrid& grid) {
    std::string out = "x,y\n";
    for (const auto& tile : grid.tiles) {
        out += std::to_string(tile.x);
        out += ',';
        out += std::to_string(tile.y);
        out += '\n';
    }
    return out;
}

image::RasterImage mask_to_image(const TissueMask& mask) {
    image::RasterImage img = image::make_image(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        std::uint8_t v = mask.bits[i] ? 255 : 0;
        img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = v;
    }
    return img;
}

TissueMask mask_from_image(const image::RasterImage& img) {
    if (!img.valid()) throw ContractError("mask_from_image: invalid image");
    TissueMask mask;
    mask.width = img.width;
    mask.height = img.height;
    mask.bits.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        mask.bits[i] = img.pixels[3 * i] >= 128 ? 1 : 0;
    return mask;
}

}  // namespace slidemil::preprocess

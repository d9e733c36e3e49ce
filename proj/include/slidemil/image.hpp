#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "slidemil/errors.hpp"

namespace slidemil::image {

// 8-bit RGB raster, row-major. The portable stand-in for one resolution
// level of a scanned slide.
struct RasterImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height, RGBRGB...

    std::size_t index(std::uint32_t x, std::uint32_t y) const {
        return 3 * (static_cast<std::size_t>(y) * width + x);
    }
    const std::uint8_t* rgb(std::uint32_t x, std::uint32_t y) const {
        return pixels.data() + index(x, y);
    }
    std::uint8_t* rgb(std::uint32_t x, std::uint32_t y) {
        return pixels.data() + index(x, y);
    }
    bool valid() const {
        return width >= 1 && height >= 1 &&
               pixels.size() == 3ull * width * height;
    }
};

RasterImage make_image(std::uint32_t width, std::uint32_t height,
                       std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

// PNG via libpng; grayscale/palette/alpha inputs are expanded to 8-bit RGB.
RasterImage read_png(const std::filesystem::path& path);
void write_png(const RasterImage& img, const std::filesystem::path& path);

// Binary PPM (P6), maxval 255.
RasterImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RasterImage& img, const std::filesystem::path& path);

// Dispatches on extension: .png, .ppm
RasterImage read_image(const std::filesystem::path& path);

}  // namespace slidemil::image

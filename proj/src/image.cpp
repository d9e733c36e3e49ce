#include "slidemil/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace slidemil::image {

namespace fs = std::filesystem;

RasterImage make_image(std::uint32_t width, std::uint32_t height,
                       std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RasterImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(3ull * width * height);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RasterImage read_png(const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "' for reading");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: create_info_struct failed");
    }

    RasterImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("'" + path.string() + "' is not a readable PNG");
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize everything to 8-bit RGB
    png_byte color_type = png_get_color_type(png, info);
    png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.pixels.resize(3ull * img.width * img.height);
    rows.resize(img.height);
    for (std::uint32_t y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + 3ull * img.width * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const RasterImage& img, const fs::path& path) {
    if (!img.valid()) throw ContractError("write_png: invalid image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed writing '" + path.string() + "'");
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (std::uint32_t y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + 3ull * img.width * y);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RasterImage read_ppm(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");

    std::string magic;
    is >> magic;
    if (magic != "P6") throw FormatError("'" + path.string() + "': not a binary PPM (P6)");

    auto next_int = [&](const char* what) {
        // skip whitespace and '#' comment lines
        int c = is.get();
        while (c != EOF && (std::isspace(c) || c == '#')) {
            if (c == '#')
                while (c != EOF && c != '\n') c = is.get();
            c = is.get();
        }
        long v = -1;
        std::string tok;
        while (c != EOF && !std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            c = is.get();
        }
        try {
            v = std::stol(tok);
        } catch (...) {
            throw FormatError("'" + path.string() + "': bad PPM " + what);
        }
        if (v < 0) throw FormatError("'" + path.string() + "': bad PPM " + what);
        return static_cast<std::uint32_t>(v);
    };

    RasterImage img;
    img.width = next_int("width");
    img.height = next_int("height");
    std::uint32_t maxval = next_int("maxval");
    if (maxval != 255) throw FormatError("'" + path.string() + "': PPM maxval must be 255");
    if (img.width < 1 || img.height < 1)
        throw FormatError("'" + path.string() + "': bad PPM dimensions");

    img.pixels.resize(3ull * img.width * img.height);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(is.gcount()) != img.pixels.size())
        throw TruncationError("'" + path.string() + "': PPM pixel data truncated");
    return img;
}

void write_ppm(const RasterImage& img, const fs::path& path) {
    if (!img.valid()) throw ContractError("write_ppm: invalid image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

RasterImage read_image(const fs::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm") return read_ppm(path);
    throw FormatError("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

}  // namespace slidemil::image

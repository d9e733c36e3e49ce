#include "slidemil/encoder.hpp"

#include <cmath>
#include <fstream>

#include "slidemil/io_util.hpp"
#include "slidemil/rng.hpp"

namespace slidemil::encoder {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'E', 'B', 'A', 'G'};
constexpr std::uint16_t kVersion = 1;

void check_finite(const MatrixF& m, const std::string& what) {
    if (!m.allFinite()) throw DataError(what + ": non-finite embedding values");
}

}  // namespace

Eigen::VectorXf stub_encode(const preprocess::Patch& patch, const EncoderSpec& spec) {
    require(spec.kind == EncoderKind::Stub, "stub_encode: spec.kind must be Stub");
    require(spec.dim >= 1, "stub_encode: dim >= 1");

    std::uint64_t content = io::fnv1a64(patch.pixels.data(), patch.pixels.size());
    SplitMix64 rng(content ^ spec.seed);

    Eigen::VectorXd v(spec.dim);
    for (std::uint32_t i = 0; i < spec.dim; ++i) v[i] = rng.next_uniform(-1.0, 1.0);
    double norm = v.norm();
    if (norm > 0.0) v /= norm;

    // channel statistics in [0,1]; population std
    double sum[3] = {0, 0, 0};
    double sumsq[3] = {0, 0, 0};
    const std::size_t n_px = patch.pixels.size() / 3;
    for (std::size_t i = 0; i < patch.pixels.size(); i += 3) {
        for (int ch = 0; ch < 3; ++ch) {
            double x = patch.pixels[i + ch] / 255.0;
            sum[ch] += x;
            sumsq[ch] += x * x;
        }
    }
    double stats[8] = {0, 0, 0, 0, 0, 0, patch.tissue_fraction, 0.0};
    for (int ch = 0; ch < 3; ++ch) {
        double mean = sum[ch] / static_cast<double>(n_px);
        double var = std::max(0.0, sumsq[ch] / static_cast<double>(n_px) - mean * mean);
        stats[ch] = mean;
        stats[3 + ch] = std::sqrt(var);
    }
    for (std::uint32_t i = 0; i < std::min<std::uint32_t>(8, spec.dim); ++i) v[i] += stats[i];

    return v.cast<float>();
}

EmbeddingBag encode_slide(const std::string& slide_id,
                          const std::vector<preprocess::Patch>& patches,
                          const EncoderSpec& spec) {
    if (patches.empty())
        throw EmptyBagError("slide '" + slide_id + "' has no tissue tiles to encode");

    EmbeddingBag bag;
    bag.slide_id = slide_id;
    bag.dim = spec.dim;
    bag.coords.reserve(patches.size());
    bag.matrix.resize(static_cast<Eigen::Index>(patches.size()), spec.dim);
    for (std::size_t k = 0; k < patches.size(); ++k) {
        bag.coords.push_back(patches[k].origin);
        bag.matrix.row(static_cast<Eigen::Index>(k)) = stub_encode(patches[k], spec).transpose();
    }
    return bag;
}

std::size_t write_bag(const EmbeddingBag& bag, std::ostream& sink) {
    require(bag.size() >= 1, "write_bag: bag must hold at least one instance");
    require(bag.coords.size() == bag.size(), "write_bag: coords/matrix row mismatch");
    require(bag.dim == static_cast<std::uint32_t>(bag.matrix.cols()),
            "write_bag: dim/matrix column mismatch");
    require(bag.slide_id.size() <= 0xffff, "write_bag: slide_id longer than 65535 bytes");
    check_finite(bag.matrix, "write_bag");

    sink.write(kMagic, 4);
    io::write_u16(sink, kVersion);
    io::write_u16(sink, static_cast<std::uint16_t>(bag.slide_id.size()));
    sink.write(bag.slide_id.data(), static_cast<std::streamsize>(bag.slide_id.size()));
    io::write_u32(sink, bag.size());
    io::write_u32(sink, bag.dim);
    io::write_u64(sink, 0);
    for (const auto& c : bag.coords) {
        io::write_u32(sink, c.x);
        io::write_u32(sink, c.y);
    }
    for (Eigen::Index r = 0; r < bag.matrix.rows(); ++r)
        for (Eigen::Index c = 0; c < bag.matrix.cols(); ++c)
            io::write_f32(sink, bag.matrix(r, c));
    if (!sink) throw IoError("write_bag: sink stream failed");

    return 24 + bag.slide_id.size() + 8ull * bag.size() +
           4ull * bag.size() * bag.dim;
}

EmbeddingBag read_bag(std::istream& source) {
    char magic[4];
    io::read_exact(source, magic, 4, "EBAG magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("read_bag: bad magic (expected 'EBAG')");
    std::uint16_t version = io::read_u16(source, "EBAG version");
    if (version != kVersion)
        throw FormatError("read_bag: unsupported version " + std::to_string(version));

    EmbeddingBag bag;
    std::uint16_t id_len = io::read_u16(source, "slide_id length");
    bag.slide_id.resize(id_len);
    if (id_len > 0) io::read_exact(source, bag.slide_id.data(), id_len, "slide_id");

    std::uint32_t n = io::read_u32(source, "instance count");
    bag.dim = io::read_u32(source, "dim");
    std::uint64_t reserved = io::read_u64(source, "reserved");
    if (reserved != 0) throw FormatError("read_bag: reserved field must be zero");
    if (n == 0 || bag.dim == 0)
        throw DataError("read_bag: bag '" + bag.slide_id + "' declares empty shape");

    bag.coords.resize(n);
    for (auto& c : bag.coords) {
        c.x = io::read_u32(source, "coord x");
        c.y = io::read_u32(source, "coord y");
    }
    bag.matrix.resize(n, bag.dim);
    for (std::uint32_t r = 0; r < n; ++r)
        for (std::uint32_t c = 0; c < bag.dim; ++c)
            bag.matrix(r, c) = io::read_f32(source, "matrix");
    check_finite(bag.matrix, "read_bag: bag '" + bag.slide_id + "'");
    return bag;
}

void write_bag_file(const EmbeddingBag& bag, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_bag(bag, os);
    os.close();
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

EmbeddingBag read_bag_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    EmbeddingBag bag = read_bag(is);
    // a bag file must contain exactly one bag
    is.peek();
    if (!is.eof())
        throw FormatError("'" + path.string() + "': trailing bytes after bag payload");
    return bag;
}

std::map<std::string, EmbeddingBag> load_cohort_bags(const fs::path& dir,
                                                     const core::SlideManifest& manifest) {
    std::map<std::string, EmbeddingBag> bags;
    std::optional<std::uint32_t> dim;
    for (const auto& rec : manifest.records) {
        fs::path path = dir / (rec.slide_id + ".ebag");
        if (!fs::exists(path))
            throw DataError("missing embedding bag for slide '" + rec.slide_id + "' (" +
                            path.string() + ")");
        EmbeddingBag bag = read_bag_file(path);
        if (bag.slide_id != rec.slide_id)
            throw DataError("bag file '" + path.string() + "' holds slide '" + bag.slide_id +
                            "', expected '" + rec.slide_id + "'");
        if (dim && *dim != bag.dim)
            throw DataError("bag '" + rec.slide_id + "' dim " + std::to_string(bag.dim) +
                            " differs from cohort dim " + std::to_string(*dim));
        dim = bag.dim;
        bag.label = rec.label;
        bags.emplace(rec.slide_id, std::move(bag));
    }
    return bags;
}

}  // namespace slidemil::encoder

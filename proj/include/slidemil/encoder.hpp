#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slidemil/core.hpp"
#include "slidemil/preprocess.hpp"

namespace slidemil::encoder {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EncoderKind { Stub, Precomputed };

struct EncoderSpec {
    EncoderKind kind = EncoderKind::Stub;
    std::uint32_t dim = 1536;   // matches the public output width of the
                                // reference tile encoder; configurable and
                                // recorded in every container header
    std::uint64_t seed = 0;     // Stub only
};

// One slide's worth of patch embeddings: the MIL bag.
struct EmbeddingBag {
    std::string slide_id;
    std::uint32_t dim = 0;
    std::vector<preprocess::TileCoord> coords;  // one per row
    MatrixF matrix;                             // n x dim
    std::optional<core::Label> label;           // set once joined with a manifest

    std::uint32_t size() const { return static_cast<std::uint32_t>(matrix.rows()); }
};

// Deterministic stand-in for a foundation-model encoder. The embedding is a
// pure function of (patch bytes, spec.seed):
//   1. h = fnv1a64(pixel bytes)
//   2. splitmix64(h ^ seed) emits dim values uniform in [-1, 1)
//   3. the vector is scaled to unit Euclidean norm
//   4. the first 8 components are offset by patch summary statistics
//      (mean R,G,B and std R,G,B scaled to [0,1], tissue_fraction, 0)
// so visually distinct patches stay linearly separable in the stub space.
Eigen::VectorXf stub_encode(const preprocess::Patch& patch, const EncoderSpec& spec);

EmbeddingBag encode_slide(const std::string& slide_id,
                          const std::vector<preprocess::Patch>& patches,
                          const EncoderSpec& spec);

// EBAG container, little-endian, one file per slide (extension .ebag):
//   magic "EBAG" | version u16 (=1) | slide_id length u16 | slide_id bytes |
//   n u32 | dim u32 | reserved u64 (=0) |
//   coords n x (x u32, y u32) | matrix n*dim f32 row-major
std::size_t write_bag(const EmbeddingBag& bag, std::ostream& sink);
EmbeddingBag read_bag(std::istream& source);

void write_bag_file(const EmbeddingBag& bag, const std::filesystem::path& path);
EmbeddingBag read_bag_file(const std::filesystem::path& path);

// Ingests a directory of <slide_id>.ebag files for every manifest record and
// attaches labels. Missing or mismatched bags are data errors naming the slide.
std::map<std::string, EmbeddingBag> load_cohort_bags(
    const std::filesystem::path& dir, const core::SlideManifest& manifest);

}  // namespace slidemil::encoder

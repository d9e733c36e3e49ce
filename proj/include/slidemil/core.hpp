#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidemil/errors.hpp"

namespace slidemil::core {

// Binary target: presence or absence of an EGFR mutation.
enum class Label { EgfrPos, EgfrNeg };

// Mutation variant recorded per slide. EGFR maps to the positive class,
// everything else (ALK, ROS1, triple-negative) to the negative class.
enum class Variant { Egfr, Alk, Ros1, TripleNeg };

constexpr Label label_for(Variant v) {
    return v == Variant::Egfr ? Label::EgfrPos : Label::EgfrNeg;
}

std::string_view to_string(Label l);
std::string_view to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

struct SlideRecord {
    std::string slide_id;
    std::string image_uri;
    Variant variant = Variant::TripleNeg;
    Label label = Label::EgfrNeg;  // always derived from variant
    double magnification = 0.0;    // e.g. 40 (x)
    double microns_per_pixel = 0.0;
};

struct ClassCounts {
    std::int64_t positives = 0;
    std::int64_t negatives = 0;
    std::int64_t total() const { return positives + negatives; }
    std::int64_t of(Label l) const {
        return l == Label::EgfrPos ? positives : negatives;
    }
};

struct SlideManifest {
    std::vector<SlideRecord> records;

    // Recomputed from records so it can never disagree with them.
    ClassCounts class_counts() const;
    const SlideRecord* find(std::string_view slide_id) const;
};

// Parses the cohort table. Fixed header `slide_id,image_uri,variant,
// magnification,mpp`; variant one of EGFR|ALK|ROS1|TRIPLE_NEG; labels are
// derived, never read. Extra or missing columns are rejected.
SlideManifest parse_manifest(std::istream& text);
SlideManifest parse_manifest(std::string_view text);

std::string serialize_manifest(const SlideManifest& manifest);

struct CohortValidation {
    SlideManifest manifest;                 // excluded ids removed, order kept
    std::vector<std::string> unknown_ids;   // exclusion ids not in the manifest
};

// Removes the excluded slides (multi-mutation cases etc.). Unknown ids are
// reported back rather than treated as errors.
CohortValidation validate_cohort(const SlideManifest& manifest,
                                 std::span<const std::string> exclusion);

}  // namespace slidemil::core

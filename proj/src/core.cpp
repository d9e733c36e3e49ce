#include "slidemil/core.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_set>

#include "slidemil/io_util.hpp"

namespace slidemil::core {

namespace {

constexpr std::string_view kHeader = "slide_id,image_uri,variant,magnification,mpp";

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_positive_decimal(std::string_view s, const char* what, std::size_t line_no) {
    double value = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                         std::string(s) + "'");
    if (!(value > 0.0))
        throw ValidationError("line " + std::to_string(line_no) + ": " + what +
                              " must be positive, got '" + std::string(s) + "'");
    return value;
}

}  // namespace

std::string_view to_string(Label l) {
    return l == Label::EgfrPos ? "EGFR_POS" : "EGFR_NEG";
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Egfr: return "EGFR";
        case Variant::Alk: return "ALK";
        case Variant::Ros1: return "ROS1";
        case Variant::TripleNeg: return "TRIPLE_NEG";
    }
    return "TRIPLE_NEG";
}

std::optional<Variant> variant_from_string(std::string_view s) {
    if (s == "EGFR") return Variant::Egfr;
    if (s == "ALK") return Variant::Alk;
    if (s == "ROS1") return Variant::Ros1;
    if (s == "TRIPLE_NEG") return Variant::TripleNeg;
    return std::nullopt;
}

ClassCounts SlideManifest::class_counts() const {
    ClassCounts c;
    for (const auto& r : records)
        (r.label == Label::EgfrPos ? c.positives : c.negatives) += 1;
    return c;
}

const SlideRecord* SlideManifest::find(std::string_view slide_id) const {
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const SlideRecord& r) { return r.slide_id == slide_id; });
    return it == records.end() ? nullptr : &*it;
}

SlideManifest parse_manifest(std::istream& text) {
    SlideManifest manifest;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;

    while (std::getline(text, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0)
            line.erase(0, 3);  // UTF-8 BOM

        if (!header_seen) {
            if (line != kHeader)
                throw ParseError("line 1: expected header '" + std::string(kHeader) +
                                 "', got '" + line + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;

        auto fields = split_fields(line);
        if (fields.size() != 5)
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));

        SlideRecord rec;
        rec.slide_id = std::string(fields[0]);
        rec.image_uri = std::string(fields[1]);
        if (rec.slide_id.empty())
            throw ValidationError("line " + std::to_string(line_no) + ": empty slide_id");
        if (!seen_ids.insert(rec.slide_id).second)
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate slide_id '" +
                                  rec.slide_id + "'");

        auto variant = variant_from_string(fields[2]);
        if (!variant)
            throw ValidationError("line " + std::to_string(line_no) + ": unknown variant '" +
                                  std::string(fields[2]) + "'");
        rec.variant = *variant;
        rec.label = label_for(rec.variant);
        rec.magnification = parse_positive_decimal(fields[3], "magnification", line_no);
        rec.microns_per_pixel = parse_positive_decimal(fields[4], "mpp", line_no);
        manifest.records.push_back(std::move(rec));
    }

    if (!header_seen)
        throw ParseError("line 1: missing header '" + std::string(kHeader) + "'");
    return manifest;
}

SlideManifest parse_manifest(std::string_view text) {
    std::istringstream is{std::string(text)};
    return parse_manifest(is);
}

std::string serialize_manifest(const SlideManifest& manifest) {
    std::string out{kHeader};
    out += '\n';
    for (const auto& r : manifest.records) {
        out += r.slide_id;
        out += ',';
        out += r.image_uri;
        out += ',';
        out += to_string(r.variant);
        out += ',';
        out += io::fmt_double(r.magnification);
        out += ',';
        out += io::fmt_double(r.microns_per_pixel);
        out += '\n';
    }
    return out;
}

CohortValidation validate_cohort(const SlideManifest& manifest,
                                 std::span<const std::string> exclusion) {
    std::unordered_set<std::string_view> excluded(exclusion.begin(), exclusion.end());

    CohortValidation out;
    for (const auto& r : manifest.records)
        if (!excluded.contains(r.slide_id)) out.manifest.records.push_back(r);

    std::unordered_set<std::string_view> present;
    for (const auto& r : manifest.records) present.insert(r.slide_id);
    for (const auto& id : exclusion)
        if (!present.contains(id)) out.unknown_ids.push_back(id);
    return out;
}

}  // namespace slidemil::core

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace posellm {

inline constexpr int kNumKeypoints = 17;

struct KeypointEntry {
    std::string_view name;
    std::string_view description;
};

// COCO-17 keypoint ontology, in canonical index order, with the location
// descriptions used to build localization prompts.
const std::array<KeypointEntry, kNumKeypoints>& keypoint_catalog();

// Index of `name` in the catalog, or -1.
int keypoint_index(std::string_view name);

// All 17 names in order (for error messages and CLI listings).
std::vector<std::string> keypoint_names();

// Canonical serialization: one "name<TAB>description" line per keypoint.
std::string catalog_as_text();

// Parses the text form back into (name, description) pairs; throws ParseError
// on malformed lines. Used to check the shipped data file against the
// compiled-in catalog.
std::vector<std::pair<std::string, std::string>> parse_catalog_text(const std::string& text);

}  // namespace posellm

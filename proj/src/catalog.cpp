#include "posellm/catalog.hpp"

#include <sstream>

#include "posellm/errors.hpp"

namespace posellm {

const std::array<KeypointEntry, kNumKeypoints>& keypoint_catalog() {
    static const std::array<KeypointEntry, kNumKeypoints> catalog = {{
        {"nose",
         "The nose is the central, protruding feature on their face, located just above the "
         "upper lip."},
        {"left eye",
         "The left eye is the visual organ on the left side of their face, typically located "
         "above the left cheek and beside the nose."},
        {"right eye",
         "The right eye is the visual organ on the right side of their face, typically located "
         "above the right cheek and beside the nose."},
        {"left ear",
         "The left ear is the auditory organ on the left side of their head, typically located "
         "to the side of the left temple."},
        {"right ear",
         "The right ear is the auditory organ on the right side of their head, typically "
         "located to the side of the right temple."},
        {"left shoulder",
         "The left shoulder is the joint connecting the left arm and the torso, typically "
         "situated on the upper left side of the chest."},
        {"right shoulder",
         "The right shoulder is the joint connecting the right arm and the torso, typically "
         "situated on the upper right side of the chest."},
        {"left elbow",
         "The left elbow is the joint connecting the left upper arm and the left forearm, "
         "typically situated in the middle of the left arm, between left shoulder and left "
         "wrist."},
        {"right elbow",
         "The right elbow is the joint connecting the right upper arm and the right forearm, "
         "typically situated in the middle of the right arm, between right shoulder and right "
         "wrist."},
        {"left wrist",
         "The left wrist is the joint connecting the left forearm and the left hand, typically "
         "located at the base of the left hand."},
        {"right wrist",
         "The right wrist is the joint connecting the right forearm and the right hand, "
         "typically located at the base of the right hand."},
        {"left hip",
         "The left hip is the joint connecting the left thigh to the pelvis, typically located "
         "on the left side of the lower torso."},
        {"right hip",
         "The right hip is the joint connecting the right thigh to the pelvis, typically "
         "located on the right side of the lower torso."},
        {"left knee",
         "The left knee is the joint connecting the left thigh and the left lower leg, "
         "typically situated in the middle of the left leg, it is located between the left hip "
         "and left ankle."},
        {"right knee",
         "The right knee is the joint connecting the upper leg and lower leg on the right "
         "side, it is located between the right hip and right ankle."},
        {"left ankle",
         "The left ankle is the joint connecting the left lower leg and the left foot, "
         "typically located at the base of the left leg."},
        {"right ankle",
         "The right ankle is the joint connecting the right lower leg and the right foot, "
         "typically located at the base of the right leg."},
    }};
    return catalog;
}

int keypoint_index(std::string_view name) {
    const auto& cat = keypoint_catalog();
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (cat[i].name == name) return i;
    }
    return -1;
}

std::vector<std::string> keypoint_names() {
    std::vector<std::string> names;
    names.reserve(kNumKeypoints);
    for (const auto& e : keypoint_catalog()) names.emplace_back(e.name);
    return names;
}

std::string catalog_as_text() {
    std::string out;
    for (const auto& e : keypoint_catalog()) {
        out.append(e.name);
        out.push_back('\t');
        out.append(e.description);
        out.push_back('\n');
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_catalog_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("catalog line " + std::to_string(lineno) + ": missing tab separator");
        }
        entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return entries;
}

}  // namespace posellm

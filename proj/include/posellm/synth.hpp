#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace posellm {

// Ranges are in normalized image units. Invariants are checked by
// validate(); a bad config is a ConfigError before any sample is drawn.
struct GeneratorConfig {
    int image_size = 64;

    double anchor_min = 0.34;  // mid-hip sample box
    double anchor_max = 0.62;
    double torso_len_min = 0.16;
    double torso_len_max = 0.24;
    double torso_tilt_max = 0.22;  // radians
    double shoulder_half_min = 0.07;
    double shoulder_half_max = 0.11;
    double hip_half_min = 0.05;
    double hip_half_max = 0.08;
    double upper_arm_min = 0.09;
    double upper_arm_max = 0.14;
    double forearm_min = 0.08;
    double forearm_max = 0.13;
    double thigh_min = 0.10;
    double thigh_max = 0.15;
    double shin_min = 0.09;
    double shin_max = 0.14;
    double head_radius_min = 0.045;
    double head_radius_max = 0.065;
    double arm_spread = 0.9;  // radians around the hanging direction
    double leg_spread = 0.40;
    double occlusion_prob = 0.06;
    double stroke_px = 1.5;
    double joint_radius_px = 1.5;

    void validate() const;
    // canonical key=value serialization; basis of the config hash
    std::string canonical() const;
    std::string hash() const;
};

struct SkeletonSample {
    int h{0};
    int w{0};
    std::vector<double> image;             // row-major, values in [0,1]
    std::array<double, 34> keypoints{};    // x,y pairs, normalized
    std::array<int, 17> visibility{};      // 1 = labeled and visible
    double area{0.0};                      // visible-keypoint bbox, px^2
    double head_size{0.0};                 // normalized units
    uint64_t seed{0};
};

// Joint positions and draw parameters before rasterization; annotations are
// copied from here verbatim, so keypoint exactness is by construction.
struct SkeletonGeometry {
    std::array<double, 34> joints{};  // normalized x,y pairs
    std::array<int, 17> occluded{};
    double head_radius{0.0};
};

SkeletonGeometry build_skeleton(uint64_t seed, const GeneratorConfig& config);
SkeletonSample generate_sample(uint64_t seed, const GeneratorConfig& config);

struct DatasetManifest {
    std::string records_path;
    int count{0};
    std::string config_hash;
    std::string split;
};

// One JSON record per line; manifest written next to it as
// "<records_path>.manifest". Round-trips bit-exactly.
DatasetManifest write_dataset(const std::vector<SkeletonSample>& samples,
                              const std::string& records_path, const std::string& split,
                              const std::string& config_hash);

// Parse failures name the 1-based line number.
std::vector<SkeletonSample> read_dataset(const std::string& records_path);

DatasetManifest read_manifest(const std::string& manifest_path);

// Manifest count vs record count; IntegrityError on mismatch.
std::vector<SkeletonSample> load_dataset_checked(const std::string& records_path);

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);  // ParseError on bad input

}  // namespace posellm

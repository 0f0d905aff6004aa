#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "posellm/errors.hpp"
#include "posellm/rng.hpp"
#include "posellm/synth.hpp"

using namespace posellm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path p = fs::temp_directory_path() / "posellm_test_synth";
    fs::create_directories(p);
    return p;
}

// every joint stays well inside the frame by construction
GeneratorConfig contained_config() {
    GeneratorConfig c;
    c.anchor_min = 0.45;
    c.anchor_max = 0.55;
    c.torso_len_min = 0.08;
    c.torso_len_max = 0.10;
    c.shoulder_half_min = 0.03;
    c.shoulder_half_max = 0.04;
    c.hip_half_min = 0.02;
    c.hip_half_max = 0.03;
    c.upper_arm_min = 0.03;
    c.upper_arm_max = 0.05;
    c.forearm_min = 0.03;
    c.forearm_max = 0.05;
    c.thigh_min = 0.04;
    c.thigh_max = 0.06;
    c.shin_min = 0.04;
    c.shin_max = 0.06;
    c.head_radius_min = 0.02;
    c.head_radius_max = 0.03;
    c.occlusion_prob = 0.0;
    return c;
}

bool samples_equal(const SkeletonSample& a, const SkeletonSample& b) {
    return a.h == b.h && a.w == b.w && a.image == b.image && a.keypoints == b.keypoints &&
           a.visibility == b.visibility && a.area == b.area && a.head_size == b.head_size &&
           a.seed == b.seed;
}

}  // namespace

TEST_CASE("generation is a pure function of seed and config") {
    const GeneratorConfig cfg;
    const SkeletonSample a = generate_sample(0, cfg);
    const SkeletonSample b = generate_sample(0, cfg);
    CHECK(samples_equal(a, b));

    const SkeletonSample c = generate_sample(1, cfg);
    CHECK(!samples_equal(a, c));

    // binary strokes only
    for (const double v : a.image) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("containment config forces all 17 keypoints visible") {
    const GeneratorConfig cfg = contained_config();
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const SkeletonSample s = generate_sample(seed, cfg);
        for (int k = 0; k < 17; ++k) {
            CHECK(s.visibility[static_cast<size_t>(k)] == 1);
            CHECK(s.keypoints[2 * k] >= 0.0);
            CHECK(s.keypoints[2 * k] <= 1.0);
            CHECK(s.keypoints[2 * k + 1] >= 0.0);
            CHECK(s.keypoints[2 * k + 1] <= 1.0);
        }
        CHECK(s.head_size > 0.0);
        CHECK(s.area > 0.0);
    }
}

TEST_CASE("annotations equal the renderer's joint registry exactly") {
    const GeneratorConfig cfg;
    const SkeletonGeometry geo = build_skeleton(7, cfg);
    const SkeletonSample s = generate_sample(7, cfg);
    for (int i = 0; i < 34; ++i) {
        CHECK(s.keypoints[static_cast<size_t>(i)] == geo.joints[static_cast<size_t>(i)]);
    }
}

TEST_CASE("every visible keypoint has rendered ink within one pixel") {
    const GeneratorConfig cfg;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const SkeletonSample s = generate_sample(seed, cfg);
        for (int k = 0; k < 17; ++k) {
            if (s.visibility[static_cast<size_t>(k)] != 1) continue;
            // joint center in pixel-center coordinates
            const double cx = s.keypoints[2 * k] * s.w - 0.5;
            const double cy = s.keypoints[2 * k + 1] * s.h - 0.5;
            double best = 1e9;
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    if (s.image[static_cast<size_t>(y) * s.w + x] != 1.0) continue;
                    best = std::min(best, std::hypot(x - cx, y - cy));
                }
            }
            CHECK(best < 1.0);
        }
    }
}

TEST_CASE("coverage: every keypoint attains both visibility states over 1000 seeds") {
    const GeneratorConfig cfg;
    std::array<int, 17> seen_visible{};
    std::array<int, 17> seen_hidden{};
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const SkeletonSample s = generate_sample(seed, cfg);
        for (int k = 0; k < 17; ++k) {
            if (s.visibility[static_cast<size_t>(k)] == 1) {
                seen_visible[static_cast<size_t>(k)] = 1;
            } else {
                seen_hidden[static_cast<size_t>(k)] = 1;
            }
        }
    }
    for (int k = 0; k < 17; ++k) {
        CHECK(seen_visible[static_cast<size_t>(k)] == 1);
        CHECK(seen_hidden[static_cast<size_t>(k)] == 1);
    }
}

TEST_CASE("head size uses the inter-ear distance with a nose fallback") {
    const GeneratorConfig cfg;
    int checked_ears = 0, checked_fallback = 0;
    for (uint64_t seed = 0; seed < 400 && (checked_ears < 5 || checked_fallback < 5); ++seed) {
        const SkeletonSample s = generate_sample(seed, cfg);
        const double lx = s.keypoints[2 * 3], ly = s.keypoints[2 * 3 + 1];
        const double rx = s.keypoints[2 * 4], ry = s.keypoints[2 * 4 + 1];
        if (s.visibility[3] == 1 && s.visibility[4] == 1) {
            CHECK(s.head_size == doctest::Approx(2.0 * std::hypot(lx - rx, ly - ry)).epsilon(1e-12));
            CHECK(s.head_size > 0.0);
            ++checked_ears;
        } else {
            const double nx = s.keypoints[0], ny = s.keypoints[1];
            const double mx = 0.5 * (s.keypoints[2 * 5] + s.keypoints[2 * 6]);
            const double my = 0.5 * (s.keypoints[2 * 5 + 1] + s.keypoints[2 * 6 + 1]);
            CHECK(s.head_size == doctest::Approx(2.0 * std::hypot(nx - mx, ny - my)).epsilon(1e-12));
            ++checked_fallback;
        }
    }
    CHECK(checked_ears >= 5);
    CHECK(checked_fallback >= 5);
}

TEST_CASE("invalid generator configs are rejected before sampling") {
    GeneratorConfig cfg;
    cfg.image_size = 0;
    CHECK_THROWS_AS(generate_sample(0, cfg), ConfigError);

    GeneratorConfig cfg2;
    cfg2.thigh_max = 0.6;  // outside (0, 0.5]
    CHECK_THROWS_AS(generate_sample(0, cfg2), ConfigError);

    GeneratorConfig cfg3;
    cfg3.torso_len_min = 0.3;
    cfg3.torso_len_max = 0.2;  // min > max
    CHECK_THROWS_AS(generate_sample(0, cfg3), ConfigError);
}

TEST_CASE("dataset IO round-trips bit-exactly") {
    const GeneratorConfig cfg;
    std::vector<SkeletonSample> samples;
    for (uint64_t seed = 100; seed < 110; ++seed) samples.push_back(generate_sample(seed, cfg));

    const std::string path = (temp_dir() / "roundtrip.jsonl").string();
    const DatasetManifest manifest = write_dataset(samples, path, "train", cfg.hash());
    CHECK(manifest.count == 10);
    CHECK(manifest.split == "train");
    CHECK(manifest.config_hash == cfg.hash());

    const std::vector<SkeletonSample> back = load_dataset_checked(path);
    REQUIRE(back.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples_equal(samples[i], back[i]));
    }

    // regeneration writes byte-identical files
    const std::string path2 = (temp_dir() / "roundtrip2.jsonl").string();
    write_dataset(samples, path2, "train", cfg.hash());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
}

TEST_CASE("a truncated record names its line number") {
    const GeneratorConfig cfg;
    std::vector<SkeletonSample> samples;
    for (uint64_t seed = 0; seed < 5; ++seed) samples.push_back(generate_sample(seed, cfg));
    const std::string path = (temp_dir() / "truncated.jsonl").string();
    write_dataset(samples, path, "train", cfg.hash());

    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    in.close();
    std::string text = buf.str();
    text.resize(text.size() / 2);  // chop inside a record
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();

    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("line"), ParseError);
}

TEST_CASE("manifest count mismatch is an integrity error") {
    const GeneratorConfig cfg;
    std::vector<SkeletonSample> samples;
    for (uint64_t seed = 0; seed < 4; ++seed) samples.push_back(generate_sample(seed, cfg));
    const std::string path = (temp_dir() / "mismatch.jsonl").string();
    write_dataset(samples, path, "val", cfg.hash());

    // hand-edit the declared count
    std::ifstream in(path + ".manifest");
    std::stringstream buf;
    buf << in.rdbuf();
    in.close();
    std::string text = buf.str();
    const size_t pos = text.find("\"count\": 4");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "\"count\": 5");
    std::ofstream out(path + ".manifest");
    out << text;
    out.close();

    CHECK_THROWS_AS(load_dataset_checked(path), IntegrityError);
}

TEST_CASE("unwritable path raises an IO error") {
    const GeneratorConfig cfg;
    const std::vector<SkeletonSample> samples{generate_sample(0, cfg)};
    CHECK_THROWS_AS(write_dataset(samples, "/nonexistent-dir/x.jsonl", "train", cfg.hash()),
                    IoError);
    CHECK_THROWS_AS(read_dataset("/nonexistent-dir/x.jsonl"), IoError);
}

TEST_CASE("base64 round-trips arbitrary byte strings") {
    Rng rng(42);
    for (int len = 0; len < 40; ++len) {
        std::vector<uint8_t> bytes(static_cast<size_t>(len));
        for (auto& b : bytes) b = static_cast<uint8_t>(rng.uniform_int(256));
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK_THROWS_AS(base64_decode("abc"), ParseError);
    CHECK_THROWS_AS(base64_decode("ab!="), ParseError);
}

TEST_CASE("config hash tracks every field") {
    GeneratorConfig a;
    GeneratorConfig b;
    CHECK(a.hash() == b.hash());
    b.leg_spread += 1e-6;
    CHECK(a.hash() != b.hash());
}

#include "posellm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "posellm/errors.hpp"
#include "posellm/rng.hpp"

namespace posellm {

using json = nlohmann::ordered_json;

namespace {

// keypoint indices, canonical 17-point order
enum Kp {
    kNose = 0,
    kLEye,
    kREye,
    kLEar,
    kREar,
    kLShoulder,
    kRShoulder,
    kLElbow,
    kRElbow,
    kLWrist,
    kRWrist,
    kLHip,
    kRHip,
    kLKnee,
    kRKnee,
    kLAnkle,
    kRAnkle
};

struct Vec2 {
    double x{0.0};
    double y{0.0};
};

Vec2 get(const std::array<double, 34>& kps, int i) { return {kps[2 * i], kps[2 * i + 1]}; }
void put(std::array<double, 34>& kps, int i, Vec2 v) {
    kps[2 * i] = v.x;
    kps[2 * i + 1] = v.y;
}

void check_range(const char* name, double lo, double hi) {
    if (!(lo > 0.0) || !(hi <= 0.5) || lo > hi) {
        throw ConfigError(std::string("generator: range ") + name + " must satisfy 0 < min <= max <= 0.5");
    }
}

}  // namespace

void GeneratorConfig::validate() const {
    if (image_size <= 0) throw ConfigError("generator: image_size must be positive");
    if (!(anchor_min >= 0.0 && anchor_max <= 1.0 && anchor_min <= anchor_max)) {
        throw ConfigError("generator: anchor box must satisfy 0 <= min <= max <= 1");
    }
    check_range("torso_len", torso_len_min, torso_len_max);
    check_range("shoulder_half", shoulder_half_min, shoulder_half_max);
    check_range("hip_half", hip_half_min, hip_half_max);
    check_range("upper_arm", upper_arm_min, upper_arm_max);
    check_range("forearm", forearm_min, forearm_max);
    check_range("thigh", thigh_min, thigh_max);
    check_range("shin", shin_min, shin_max);
    check_range("head_radius", head_radius_min, head_radius_max);
    if (torso_tilt_max < 0.0 || arm_spread < 0.0 || leg_spread < 0.0) {
        throw ConfigError("generator: spreads must be non-negative");
    }
    if (occlusion_prob < 0.0 || occlusion_prob >= 1.0) {
        throw ConfigError("generator: occlusion_prob must lie in [0,1)");
    }
    if (stroke_px < 1.0 || joint_radius_px < 0.5) {
        throw ConfigError("generator: stroke_px must be >= 1 and joint_radius_px >= 0.5");
    }
}

std::string GeneratorConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "anchor_max=" << anchor_max << "\nanchor_min=" << anchor_min
       << "\narm_spread=" << arm_spread << "\nforearm_max=" << forearm_max
       << "\nforearm_min=" << forearm_min << "\nhead_radius_max=" << head_radius_max
       << "\nhead_radius_min=" << head_radius_min << "\nhip_half_max=" << hip_half_max
       << "\nhip_half_min=" << hip_half_min << "\nimage_size=" << image_size
       << "\njoint_radius_px=" << joint_radius_px << "\nleg_spread=" << leg_spread
       << "\nocclusion_prob=" << occlusion_prob << "\nshin_max=" << shin_max
       << "\nshin_min=" << shin_min << "\nshoulder_half_max=" << shoulder_half_max
       << "\nshoulder_half_min=" << shoulder_half_min << "\nstroke_px=" << stroke_px
       << "\nthigh_max=" << thigh_max << "\nthigh_min=" << thigh_min
       << "\ntorso_len_max=" << torso_len_max << "\ntorso_len_min=" << torso_len_min
       << "\ntorso_tilt_max=" << torso_tilt_max << "\nupper_arm_max=" << upper_arm_max
       << "\nupper_arm_min=" << upper_arm_min << "\n";
    return os.str();
}

std::string GeneratorConfig::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

SkeletonGeometry build_skeleton(uint64_t seed, const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(seed);
    SkeletonGeometry g;

    const double pi = 3.14159265358979323846;

    const Vec2 pelvis{rng.uniform(cfg.anchor_min, cfg.anchor_max),
                      rng.uniform(cfg.anchor_min, cfg.anchor_max)};
    const double torso_len = rng.uniform(cfg.torso_len_min, cfg.torso_len_max);
    const double tilt = rng.uniform(-cfg.torso_tilt_max, cfg.torso_tilt_max);

    // torso axis points from pelvis toward the head
    const Vec2 up{std::sin(tilt), -std::cos(tilt)};
    const Vec2 side{std::cos(tilt), std::sin(tilt)};

    const Vec2 neck{pelvis.x + torso_len * up.x, pelvis.y + torso_len * up.y};

    const double shoulder_half = rng.uniform(cfg.shoulder_half_min, cfg.shoulder_half_max);
    const double hip_half = rng.uniform(cfg.hip_half_min, cfg.hip_half_max);
    const double head_r = rng.uniform(cfg.head_radius_min, cfg.head_radius_max);

    // subject faces the camera: their left side is on the image right
    const Vec2 lsho{neck.x + shoulder_half * side.x, neck.y + shoulder_half * side.y};
    const Vec2 rsho{neck.x - shoulder_half * side.x, neck.y - shoulder_half * side.y};
    const Vec2 lhip{pelvis.x + hip_half * side.x, pelvis.y + hip_half * side.y};
    const Vec2 rhip{pelvis.x - hip_half * side.x, pelvis.y - hip_half * side.y};

    const Vec2 head{neck.x + 1.6 * head_r * up.x, neck.y + 1.6 * head_r * up.y};
    const Vec2 nose{head.x + 0.15 * head_r * -up.x, head.y + 0.15 * head_r * -up.y};
    const Vec2 leye{head.x + 0.45 * head_r * side.x + 0.35 * head_r * up.x,
                    head.y + 0.45 * head_r * side.y + 0.35 * head_r * up.y};
    const Vec2 reye{head.x - 0.45 * head_r * side.x + 0.35 * head_r * up.x,
                    head.y - 0.45 * head_r * side.y + 0.35 * head_r * up.y};
    const Vec2 lear{head.x + head_r * side.x, head.y + head_r * side.y};
    const Vec2 rear{head.x - head_r * side.x, head.y - head_r * side.y};

    auto chain = [&](Vec2 from, double len, double angle) {
        // angle measured from straight down
        return Vec2{from.x + len * std::sin(angle), from.y + len * std::cos(angle)};
    };

    const double ua_l = rng.uniform(cfg.upper_arm_min, cfg.upper_arm_max);
    const double ua_r = rng.uniform(cfg.upper_arm_min, cfg.upper_arm_max);
    const double fa_l = rng.uniform(cfg.forearm_min, cfg.forearm_max);
    const double fa_r = rng.uniform(cfg.forearm_min, cfg.forearm_max);
    const double th_l = rng.uniform(cfg.thigh_min, cfg.thigh_max);
    const double th_r = rng.uniform(cfg.thigh_min, cfg.thigh_max);
    const double sh_l = rng.uniform(cfg.shin_min, cfg.shin_max);
    const double sh_r = rng.uniform(cfg.shin_min, cfg.shin_max);

    const double a_le = rng.uniform(-cfg.arm_spread, cfg.arm_spread) + 0.35;
    const double a_re = rng.uniform(-cfg.arm_spread, cfg.arm_spread) - 0.35;
    const double a_lw = a_le + rng.uniform(-0.8, 0.8) * cfg.arm_spread;
    const double a_rw = a_re + rng.uniform(-0.8, 0.8) * cfg.arm_spread;
    const double a_lk = rng.uniform(-cfg.leg_spread, cfg.leg_spread) + 0.12;
    const double a_rk = rng.uniform(-cfg.leg_spread, cfg.leg_spread) - 0.12;
    const double a_la = a_lk + rng.uniform(-0.6, 0.6) * cfg.leg_spread;
    const double a_ra = a_rk + rng.uniform(-0.6, 0.6) * cfg.leg_spread;
    (void)pi;

    const Vec2 lelb = chain(lsho, ua_l, a_le);
    const Vec2 relb = chain(rsho, ua_r, a_re);
    const Vec2 lwri = chain(lelb, fa_l, a_lw);
    const Vec2 rwri = chain(relb, fa_r, a_rw);
    const Vec2 lkne = chain(lhip, th_l, a_lk);
    const Vec2 rkne = chain(rhip, th_r, a_rk);
    const Vec2 lank = chain(lkne, sh_l, a_la);
    const Vec2 rank = chain(rkne, sh_r, a_ra);

    put(g.joints, kNose, nose);
    put(g.joints, kLEye, leye);
    put(g.joints, kREye, reye);
    put(g.joints, kLEar, lear);
    put(g.joints, kREar, rear);
    put(g.joints, kLShoulder, lsho);
    put(g.joints, kRShoulder, rsho);
    put(g.joints, kLElbow, lelb);
    put(g.joints, kRElbow, relb);
    put(g.joints, kLWrist, lwri);
    put(g.joints, kRWrist, rwri);
    put(g.joints, kLHip, lhip);
    put(g.joints, kRHip, rhip);
    put(g.joints, kLKnee, lkne);
    put(g.joints, kRKnee, rkne);
    put(g.joints, kLAnkle, lank);
    put(g.joints, kRAnkle, rank);

    // occlusion flags always consume one draw per joint
    for (int i = 0; i < 17; ++i) {
        g.occluded[i] = rng.uniform() < cfg.occlusion_prob ? 1 : 0;
    }
    g.head_radius = head_r;
    return g;
}

namespace {

class Raster {
public:
    Raster(std::vector<double>& img, int size) : img_(img), size_(size) {}

    // center in pixel coordinates (0 .. size), radius in pixels
    void stamp_disc(double cx, double cy, double radius) {
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
        const int x1 = std::min(size_ - 1, static_cast<int>(std::ceil(cx + radius + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
        const int y1 = std::min(size_ - 1, static_cast<int>(std::ceil(cy + radius + 1)));
        const double r2 = radius * radius;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x + 0.5) - cx;
                const double dy = (y + 0.5) - cy;
                if (dx * dx + dy * dy <= r2) img_[static_cast<size_t>(y) * size_ + x] = 1.0;
            }
        }
    }

    void stroke_segment(double ax, double ay, double bx, double by, double half_width) {
        const double len = std::hypot(bx - ax, by - ay);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.4)));
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            stamp_disc(ax + t * (bx - ax), ay + t * (by - ay), half_width);
        }
    }

private:
    std::vector<double>& img_;
    int size_;
};

}  // namespace

SkeletonSample generate_sample(uint64_t seed, const GeneratorConfig& cfg) {
    const SkeletonGeometry g = build_skeleton(seed, cfg);
    const int S = cfg.image_size;

    SkeletonSample sample;
    sample.h = S;
    sample.w = S;
    sample.image.assign(static_cast<size_t>(S) * S, 0.0);
    sample.keypoints = g.joints;
    sample.seed = seed;

    for (int i = 0; i < 17; ++i) {
        const Vec2 p = get(g.joints, i);
        const bool inside = p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
        sample.visibility[i] = (inside && !g.occluded[i]) ? 1 : 0;
    }

    auto px = [&](double v) { return v * S; };  // normalized -> pixel edge coords
    Raster raster(sample.image, S);
    const double half = cfg.stroke_px * 0.5;

    auto visible = [&](int i) { return sample.visibility[i] == 1; };
    auto seg = [&](int a, int b) {
        if (!visible(a) || !visible(b)) return;
        const Vec2 pa = get(g.joints, a);
        const Vec2 pb = get(g.joints, b);
        raster.stroke_segment(px(pa.x), px(pa.y), px(pb.x), px(pb.y), half);
    };

    // trunk box and limbs
    seg(kLShoulder, kRShoulder);
    seg(kLHip, kRHip);
    seg(kLShoulder, kLHip);
    seg(kRShoulder, kRHip);
    seg(kLShoulder, kLElbow);
    seg(kLElbow, kLWrist);
    seg(kRShoulder, kRElbow);
    seg(kRElbow, kRWrist);
    seg(kLHip, kLKnee);
    seg(kLKnee, kLAnkle);
    seg(kRHip, kRKnee);
    seg(kRKnee, kRAnkle);

    // head disc centered between the ears
    {
        const Vec2 le = get(g.joints, kLEar);
        const Vec2 re = get(g.joints, kREar);
        const double hx = 0.5 * (le.x + re.x);
        const double hy = 0.5 * (le.y + re.y);
        if (visible(kNose) || visible(kLEye) || visible(kREye) || visible(kLEar) ||
            visible(kREar)) {
            raster.stamp_disc(px(hx), px(hy), g.head_radius * S);
        }
    }

    // joint markers
    for (int i = 0; i < 17; ++i) {
        if (!visible(i)) continue;
        const Vec2 p = get(g.joints, i);
        raster.stamp_disc(px(p.x), px(p.y), cfg.joint_radius_px);
    }

    // visible-keypoint bounding box, in squared pixels
    double minx = 1e9, miny = 1e9, maxx = -1e9, maxy = -1e9;
    int nvis = 0;
    for (int i = 0; i < 17; ++i) {
        if (!visible(i)) continue;
        const Vec2 p = get(g.joints, i);
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
        ++nvis;
    }
    sample.area = nvis > 0 ? (maxx - minx) * S * (maxy - miny) * S : 0.0;

    const Vec2 le = get(g.joints, kLEar);
    const Vec2 re = get(g.joints, kREar);
    if (visible(kLEar) && visible(kREar)) {
        sample.head_size = 2.0 * std::hypot(le.x - re.x, le.y - re.y);
    } else {
        const Vec2 nose = get(g.joints, kNose);
        const Vec2 ls = get(g.joints, kLShoulder);
        const Vec2 rs = get(g.joints, kRShoulder);
        const double mx = 0.5 * (ls.x + rs.x);
        const double my = 0.5 * (ls.y + rs.y);
        sample.head_size = 2.0 * std::hypot(nose.x - mx, nose.y - my);
    }
    return sample;
}

// ---------------------------------------------------------------------------
// dataset IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::vector<uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back(kB64[v & 63]);
    }
    const size_t rem = bytes.size() - i;
    if (rem == 1) {
        const uint32_t v = bytes[i] << 16;
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw ParseError("base64: length not a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                if (i + 4 != text.size() || k < 2) throw ParseError("base64: misplaced padding");
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = b64_value(c);
                if (vals[k] < 0) throw ParseError("base64: invalid character");
                if (pad > 0) throw ParseError("base64: data after padding");
            }
        }
        const uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back((v >> 16) & 0xff);
        if (pad < 2) out.push_back((v >> 8) & 0xff);
        if (pad < 1) out.push_back(v & 0xff);
    }
    return out;
}

namespace {

json sample_to_json(const SkeletonSample& s) {
    std::vector<uint8_t> bytes(s.image.size());
    for (size_t i = 0; i < s.image.size(); ++i) {
        double v = s.image[i];
        v = std::min(1.0, std::max(0.0, v));
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    json j;
    j["seed"] = s.seed;
    j["h"] = s.h;
    j["w"] = s.w;
    j["kps"] = s.keypoints;
    j["vis"] = s.visibility;
    j["area"] = s.area;
    j["head_size"] = s.head_size;
    j["image_b64"] = base64_encode(bytes);
    return j;
}

SkeletonSample sample_from_json(const json& j) {
    SkeletonSample s;
    s.seed = j.at("seed").get<uint64_t>();
    s.h = j.at("h").get<int>();
    s.w = j.at("w").get<int>();
    const auto kps = j.at("kps").get<std::vector<double>>();
    const auto vis = j.at("vis").get<std::vector<int>>();
    if (kps.size() != 34 || vis.size() != 17) {
        throw ParseError("record: kps/vis arity mismatch");
    }
    std::copy(kps.begin(), kps.end(), s.keypoints.begin());
    std::copy(vis.begin(), vis.end(), s.visibility.begin());
    s.area = j.at("area").get<double>();
    s.head_size = j.at("head_size").get<double>();
    const std::vector<uint8_t> bytes = base64_decode(j.at("image_b64").get<std::string>());
    if (bytes.size() != static_cast<size_t>(s.h) * s.w) {
        throw ParseError("record: image byte count mismatch");
    }
    s.image.resize(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) s.image[i] = bytes[i] / 255.0;
    return s;
}

}  // namespace

DatasetManifest write_dataset(const std::vector<SkeletonSample>& samples,
                              const std::string& records_path, const std::string& split,
                              const std::string& config_hash) {
    std::ofstream out(records_path, std::ios::binary);
    if (!out) throw IoError("cannot open " + records_path + " for writing");
    for (const auto& s : samples) {
        out << sample_to_json(s).dump() << "\n";
    }
    out.close();
    if (!out) throw IoError("write failed: " + records_path);

    DatasetManifest manifest{records_path, static_cast<int>(samples.size()), config_hash, split};
    json jm;
    jm["count"] = manifest.count;
    jm["config_hash"] = manifest.config_hash;
    jm["split"] = manifest.split;
    std::ofstream mout(records_path + ".manifest", std::ios::binary);
    if (!mout) throw IoError("cannot open " + records_path + ".manifest for writing");
    mout << jm.dump(2) << "\n";
    mout.close();
    if (!mout) throw IoError("write failed: " + records_path + ".manifest");
    return manifest;
}

std::vector<SkeletonSample> read_dataset(const std::string& records_path) {
    std::ifstream in(records_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + records_path);
    std::vector<SkeletonSample> samples;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            samples.push_back(sample_from_json(json::parse(line)));
        } catch (const ParseError& e) {
            throw ParseError(records_path + ": line " + std::to_string(lineno) + ": " + e.what());
        } catch (const json::exception& e) {
            throw ParseError(records_path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return samples;
}

DatasetManifest read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + manifest_path);
    json j;
    try {
        in >> j;
        DatasetManifest m;
        m.records_path = manifest_path.substr(0, manifest_path.size() - std::string(".manifest").size());
        m.count = j.at("count").get<int>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.split = j.at("split").get<std::string>();
        return m;
    } catch (const json::exception& e) {
        throw ParseError(manifest_path + ": " + e.what());
    }
}

std::vector<SkeletonSample> load_dataset_checked(const std::string& records_path) {
    const DatasetManifest m = read_manifest(records_path + ".manifest");
    std::vector<SkeletonSample> samples = read_dataset(records_path);
    if (static_cast<int>(samples.size()) != m.count) {
        throw IntegrityError(records_path + ": manifest declares " + std::to_string(m.count) +
                             " records, file holds " + std::to_string(samples.size()));
    }
    return samples;
}

}  // namespace posellm

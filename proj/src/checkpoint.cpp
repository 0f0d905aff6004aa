#include "posellm/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "posellm/errors.hpp"

namespace posellm {

using json = nlohmann::ordered_json;

namespace {

constexpr uint32_t kMagic = 0x504c434bu;  // "PLCK"
constexpr uint32_t kVersion = 1;

json read_manifest_json(std::ifstream& in, const std::string& path) {
    uint32_t magic = 0, version = 0;
    in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || magic != kMagic) throw IntegrityError(path + ": not a checkpoint file");
    if (version != kVersion) {
        throw IntegrityError(path + ": checkpoint version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kVersion) + ")");
    }
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in) throw IntegrityError(path + ": truncated manifest length");
    std::string mtext(static_cast<size_t>(mlen), '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IntegrityError(path + ": truncated manifest");
    try {
        return json::parse(mtext);
    } catch (const json::exception& e) {
        throw IntegrityError(path + ": manifest parse error: " + e.what());
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& config_hash) {
    json manifest;
    manifest["format_version"] = kVersion;
    manifest["config_hash"] = config_hash;
    json entries = json::array();
    uint64_t offset = 0;
    for (const auto& p : store.all()) {
        json e;
        e["name"] = p.name;
        e["rows"] = p.w.rows;
        e["cols"] = p.w.cols;
        e["dtype"] = "f32";
        e["offset"] = offset;
        entries.push_back(e);
        offset += p.w.size() * sizeof(float);
    }
    manifest["params"] = entries;
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&kMagic), sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    std::vector<float> buf;
    for (const auto& p : store.all()) {
        buf.resize(p.w.size());
        for (size_t i = 0; i < p.w.size(); ++i) buf[i] = static_cast<float>(p.w.data[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

void load_checkpoint(const std::string& path, ParamStore& store,
                     const std::string& expect_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const json manifest = read_manifest_json(in, path);

    const std::string hash = manifest.at("config_hash").get<std::string>();
    if (!expect_config_hash.empty() && hash != expect_config_hash) {
        throw IntegrityError(path + ": checkpoint config hash " + hash +
                             " does not match expected " + expect_config_hash);
    }
    const json& entries = manifest.at("params");
    if (entries.size() != store.all().size()) {
        throw IntegrityError(path + ": checkpoint holds " + std::to_string(entries.size()) +
                             " parameters, model expects " +
                             std::to_string(store.all().size()));
    }
    size_t idx = 0;
    std::vector<float> buf;
    for (auto& p : store.all()) {
        const json& e = entries[idx++];
        const std::string name = e.at("name").get<std::string>();
        const int rows = e.at("rows").get<int>();
        const int cols = e.at("cols").get<int>();
        if (name != p.name || rows != p.w.rows || cols != p.w.cols) {
            throw IntegrityError(path + ": parameter '" + name + "' (" + std::to_string(rows) +
                                 "x" + std::to_string(cols) + ") does not match model '" +
                                 p.name + "'");
        }
        buf.resize(p.w.size());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw IntegrityError(path + ": truncated blob for '" + name + "'");
        for (size_t i = 0; i < p.w.size(); ++i) p.w.data[i] = static_cast<double>(buf[i]);
    }
}

std::vector<std::string> checkpoint_param_names(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const json manifest = read_manifest_json(in, path);
    std::vector<std::string> names;
    for (const auto& e : manifest.at("params")) {
        names.push_back(e.at("name").get<std::string>());
    }
    return names;
}

std::string checkpoint_config_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_manifest_json(in, path).at("config_hash").get<std::string>();
}

}  // namespace posellm

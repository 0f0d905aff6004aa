#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "posellm/checkpoint.hpp"
#include "posellm/config.hpp"
#include "posellm/errors.hpp"
#include "posellm/model.hpp"
#include "posellm/tokenizer.hpp"

using namespace posellm;
namespace fs = std::filesystem;

namespace {

const std::string kSourceDir = POSELLM_SOURCE_DIR;

fs::path temp_dir() {
    const fs::path p = fs::temp_directory_path() / "posellm_test_config";
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("config files parse with comments, spacing and overrides") {
    const std::string path = (temp_dir() / "a.cfg").string();
    std::ofstream out(path);
    out << "# comment line\n"
        << "encoder.depth = 1   # trailing comment\n"
        << "train.lr=0.25\n"
        << "\n"
        << "generator.image_size=16\n"
        << "encoder.patch_size=4\n"
        << "encoder.d_vis=16\n"
        << "decoder.d_model=16\n"
        << "decoder.depth=1\n"
        << "encoder.mlp_ratio=2\n"
        << "decoder.mlp_ratio=2\n";
    out.close();

    auto kv = read_config_file(path);
    CHECK(kv.at("encoder.depth") == "1");
    CHECK(kv.at("train.lr") == "0.25");

    apply_override(kv, "train.lr=0.5");
    const RunConfig cfg = make_run_config(kv);
    CHECK(cfg.train.lr == 0.5);
    CHECK(cfg.model.enc.depth == 1);
    // autos resolved
    CHECK(cfg.model.conn.d_vis == 16);
    CHECK(cfg.model.conn.d_hid == 64);
    CHECK(cfg.model.conn.d_out == 16);
    CHECK(cfg.model.dec.vocab_size == vocabulary().size());
    CHECK(cfg.model.dec.max_seq_len >= cfg.model.enc.tokens() + 200);
}

TEST_CASE("unknown keys and malformed values are rejected") {
    std::map<std::string, std::string> kv;
    kv["encoder.dpeth"] = "2";
    CHECK_THROWS_WITH_AS(make_run_config(kv), doctest::Contains("unknown key"), ConfigError);

    std::map<std::string, std::string> kv2;
    kv2["train.lr"] = "fast";
    CHECK_THROWS_AS(make_run_config(kv2), ConfigError);

    std::map<std::string, std::string> kv3;
    kv3["train.train_embeddings"] = "maybe";
    CHECK_THROWS_AS(make_run_config(kv3), ConfigError);

    const std::string path = (temp_dir() / "bad.cfg").string();
    std::ofstream out(path);
    out << "just a line without equals\n";
    out.close();
    CHECK_THROWS_WITH_AS(read_config_file(path), doctest::Contains("line 1"), ParseError);
}

TEST_CASE("validation is total over cross-module constraints") {
    auto base = []() {
        std::map<std::string, std::string> kv;
        kv["generator.image_size"] = "16";
        kv["encoder.patch_size"] = "4";
        kv["encoder.depth"] = "1";
        kv["encoder.d_vis"] = "16";
        kv["encoder.mlp_ratio"] = "2";
        kv["decoder.d_model"] = "16";
        kv["decoder.depth"] = "1";
        kv["decoder.mlp_ratio"] = "2";
        return kv;
    };

    {
        auto kv = base();
        kv["connector.d_out"] = "32";  // != d_model
        CHECK_THROWS_WITH_AS(make_run_config(kv), doctest::Contains("d_out"), ConfigError);
    }
    {
        auto kv = base();
        kv["generator.image_size"] = "18";  // not divisible by patch 4
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
    {
        auto kv = base();
        kv["decoder.vocab_size"] = "45";  // tokenizer has 50
        CHECK_THROWS_WITH_AS(make_run_config(kv), doctest::Contains("vocab"), ConfigError);
    }
    {
        auto kv = base();
        kv["decoder.max_seq_len"] = "64";  // too small for prompts
        CHECK_THROWS_WITH_AS(make_run_config(kv), doctest::Contains("max_seq_len"), ConfigError);
    }
    {
        auto kv = base();
        kv["data.split_ratio"] = "1.5";
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
    {
        auto kv = base();
        kv["data.count"] = "0";
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
    {
        auto kv = base();
        kv["train.micro_batch"] = "-2";
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
    {
        auto kv = base();
        kv["metrics.k_const"] = "0";
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
    {
        auto kv = base();
        kv["train.lora_targets"] = "q,z";
        CHECK_THROWS_AS(make_run_config(kv), ConfigError);
    }
}

TEST_CASE("bundled presets are internally consistent") {
    for (const char* name : {"/configs/tiny.cfg", "/configs/desk.cfg", "/configs/paper.cfg"}) {
        auto kv = read_config_file(kSourceDir + name);
        if (kv.count("metrics.k_file")) {
            kv["metrics.k_file"] = kSourceDir + "/" + kv["metrics.k_file"];
        }
        const RunConfig cfg = make_run_config(kv);  // finalize() validates
        CHECK(cfg.model.enc.image_size == cfg.gen.image_size);
        cfg.oks_params().validate();
    }
}

TEST_CASE("per-keypoint falloff constants load from file") {
    std::map<std::string, std::string> kv;
    kv["generator.image_size"] = "16";
    kv["encoder.patch_size"] = "4";
    kv["encoder.depth"] = "0";
    kv["encoder.d_vis"] = "16";
    kv["encoder.mlp_ratio"] = "2";
    kv["decoder.d_model"] = "16";
    kv["decoder.depth"] = "0";
    kv["decoder.mlp_ratio"] = "2";
    kv["metrics.k_file"] = kSourceDir + "/configs/coco_k.txt";
    const RunConfig cfg = make_run_config(kv);
    const OksParams p = cfg.oks_params();
    CHECK(p.k[0] == 0.026);
    CHECK(p.k[16] == 0.089);
}

TEST_CASE("checkpoints round-trip bit-identically and are gated") {
    ModelConfig mc;
    mc.enc = {16, 4, 1, 16, 4, 2};
    mc.conn = {ConnectorMode::mlp, 16, 32, 16};
    mc.dec = {16, 1, 4, 2, 50, 0};
    mc.dec.max_seq_len = 320;
    Model model;
    build_model(model, mc);

    const std::string path = (temp_dir() / "model.ckpt").string();
    save_checkpoint(path, model.store, mc.hash());

    // loading into an identical model reproduces float32 values exactly,
    // so saving again yields identical bytes
    Model other;
    build_model(other, mc);
    load_checkpoint(path, other.store, mc.hash());
    const std::string path2 = (temp_dir() / "model2.ckpt").string();
    save_checkpoint(path2, other.store, mc.hash());
    CHECK(file_bytes(path) == file_bytes(path2));

    CHECK(checkpoint_config_hash(path) == mc.hash());
    CHECK_THROWS_WITH_AS(load_checkpoint(path, other.store, "deadbeef"),
                         doctest::Contains("hash"), IntegrityError);

    // version gate
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const uint32_t bad = 77;
        f.write(reinterpret_cast<const char*>(&bad), 4);
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path, other.store, mc.hash()),
                         doctest::Contains("version"), IntegrityError);

    // shape mismatch against a different model
    ModelConfig mc2 = mc;
    mc2.conn.d_hid = 48;
    Model third;
    build_model(third, mc2);
    save_checkpoint(path, model.store, mc.hash());
    CHECK_THROWS_AS(load_checkpoint(path, third.store, ""), IntegrityError);
}

TEST_CASE("connector mode switches the checkpoint manifest names") {
    ModelConfig mc;
    mc.enc = {16, 4, 0, 16, 4, 2};
    mc.conn = {ConnectorMode::linear, 16, 0, 16};
    mc.dec = {16, 0, 4, 2, 50, 320};
    Model model;
    build_model(model, mc);
    const std::string path = (temp_dir() / "linear.ckpt").string();
    save_checkpoint(path, model.store, mc.hash());

    const auto names = checkpoint_param_names(path);
    auto has = [&](const std::string& n) {
        return std::find(names.begin(), names.end(), n) != names.end();
    };
    CHECK(has("conn.w"));
    CHECK(has("conn.b"));
    CHECK(!has("conn.w1"));
    CHECK(!has("conn.b2"));
}

TEST_CASE("model config hash tracks shape-relevant fields only") {
    ModelConfig a;
    a.enc = {16, 4, 1, 16, 4, 2};
    a.conn = {ConnectorMode::mlp, 16, 32, 16};
    a.dec = {16, 1, 4, 2, 50, 320};
    ModelConfig b = a;
    CHECK(a.hash() == b.hash());
    b.train_embeddings = true;  // trainability does not change compatibility
    CHECK(a.hash() == b.hash());
    b = a;
    b.lora_r = 8;
    CHECK(a.hash() != b.hash());
    b = a;
    b.conn.mode = ConnectorMode::linear;
    CHECK(a.hash() != b.hash());
}

#include "posellm/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "posellm/errors.hpp"
#include "posellm/prompt.hpp"
#include "posellm/tokenizer.hpp"

namespace posellm {

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": expected integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return static_cast<uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": expected unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: " + key + ": expected true/false, got '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        const size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ParseError(path + ": line " + std::to_string(lineno) +
                             ": expected key=value, got '" + line + "'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const size_t ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? "" : value.substr(vs);
        kv[key] = value;
    }
    return kv;
}

void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not key=value");
    }
    kv[assignment.substr(0, eq)] = assignment.substr(eq + 1);
}

RunConfig make_run_config(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    // auto-resolved fields default to sentinel 0
    cfg.model.conn.d_hid = 0;
    cfg.model.conn.d_out = 0;
    cfg.model.conn.d_vis = 0;
    cfg.model.dec.vocab_size = 0;
    cfg.model.dec.max_seq_len = 0;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    std::map<std::string, Setter> setters;
    auto add_int = [&](const std::string& key, int* dst) {
        setters[key] = [key, dst](const std::string& k, const std::string& v) {
            (void)k;
            *dst = parse_int(key, v);
        };
    };
    auto add_double = [&](const std::string& key, double* dst) {
        setters[key] = [key, dst](const std::string& k, const std::string& v) {
            (void)k;
            *dst = parse_double(key, v);
        };
    };

    GeneratorConfig& g = cfg.gen;
    add_int("generator.image_size", &g.image_size);
    add_double("generator.anchor_min", &g.anchor_min);
    add_double("generator.anchor_max", &g.anchor_max);
    add_double("generator.torso_len_min", &g.torso_len_min);
    add_double("generator.torso_len_max", &g.torso_len_max);
    add_double("generator.torso_tilt_max", &g.torso_tilt_max);
    add_double("generator.shoulder_half_min", &g.shoulder_half_min);
    add_double("generator.shoulder_half_max", &g.shoulder_half_max);
    add_double("generator.hip_half_min", &g.hip_half_min);
    add_double("generator.hip_half_max", &g.hip_half_max);
    add_double("generator.upper_arm_min", &g.upper_arm_min);
    add_double("generator.upper_arm_max", &g.upper_arm_max);
    add_double("generator.forearm_min", &g.forearm_min);
    add_double("generator.forearm_max", &g.forearm_max);
    add_double("generator.thigh_min", &g.thigh_min);
    add_double("generator.thigh_max", &g.thigh_max);
    add_double("generator.shin_min", &g.shin_min);
    add_double("generator.shin_max", &g.shin_max);
    add_double("generator.head_radius_min", &g.head_radius_min);
    add_double("generator.head_radius_max", &g.head_radius_max);
    add_double("generator.arm_spread", &g.arm_spread);
    add_double("generator.leg_spread", &g.leg_spread);
    add_double("generator.occlusion_prob", &g.occlusion_prob);
    add_double("generator.stroke_px", &g.stroke_px);
    add_double("generator.joint_radius_px", &g.joint_radius_px);

    add_int("data.count", &cfg.data_count);
    add_double("data.split_ratio", &cfg.split_ratio);

    add_int("encoder.patch_size", &cfg.model.enc.patch_size);
    add_int("encoder.depth", &cfg.model.enc.depth);
    add_int("encoder.d_vis", &cfg.model.enc.d_vis);
    add_int("encoder.heads", &cfg.model.enc.heads);
    add_int("encoder.mlp_ratio", &cfg.model.enc.mlp_ratio);

    setters["connector.mode"] = [&cfg](const std::string&, const std::string& v) {
        cfg.model.conn.mode = connector_mode_from_string(v);
    };
    add_int("connector.d_hid", &cfg.model.conn.d_hid);
    add_int("connector.d_out", &cfg.model.conn.d_out);

    add_int("decoder.d_model", &cfg.model.dec.d_model);
    add_int("decoder.depth", &cfg.model.dec.depth);
    add_int("decoder.heads", &cfg.model.dec.heads);
    add_int("decoder.mlp_ratio", &cfg.model.dec.mlp_ratio);
    add_int("decoder.vocab_size", &cfg.model.dec.vocab_size);
    add_int("decoder.max_seq_len", &cfg.model.dec.max_seq_len);

    setters["model.init_seed"] = [&cfg](const std::string& k, const std::string& v) {
        cfg.model.init_seed = parse_u64(k, v);
    };

    add_int("train.epochs", &cfg.train.epochs);
    add_double("train.lr", &cfg.train.lr);
    add_double("train.weight_decay", &cfg.train.weight_decay);
    add_int("train.micro_batch", &cfg.train.micro_batch);
    add_int("train.accumulation_steps", &cfg.train.accumulation_steps);
    add_int("train.keypoints_per_sample", &cfg.train.keypoints_per_sample);
    setters["train.seed"] = [&cfg](const std::string& k, const std::string& v) {
        cfg.train.seed = parse_u64(k, v);
    };
    add_double("train.beta1", &cfg.train.beta1);
    add_double("train.beta2", &cfg.train.beta2);
    add_double("train.eps", &cfg.train.eps);
    add_int("train.lora_r", &cfg.model.lora_r);
    add_double("train.lora_alpha", &cfg.model.lora_alpha);
    setters["train.lora_targets"] = [&cfg](const std::string&, const std::string& v) {
        cfg.model.lora_targets = v;
    };
    setters["train.train_embeddings"] = [&cfg](const std::string& k, const std::string& v) {
        cfg.model.train_embeddings = parse_bool(k, v);
    };

    add_int("eval.max_answer_len", &cfg.eval_max_answer_len);
    add_int("eval.limit", &cfg.eval_limit);

    add_double("metrics.k_const", &cfg.metrics_k_const);
    setters["metrics.k_file"] = [&cfg](const std::string&, const std::string& v) {
        cfg.metrics_k_file = v;
    };
    add_double("metrics.medium_min", &cfg.metrics_medium_min);
    add_double("metrics.medium_max", &cfg.metrics_medium_max);

    for (const auto& [key, value] : kv) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
        it->second(key, value);
    }

    cfg.finalize();
    return cfg;
}

void RunConfig::finalize() {
    model.enc.image_size = gen.image_size;
    if (model.conn.d_vis == 0) model.conn.d_vis = model.enc.d_vis;
    if (model.conn.d_hid == 0) model.conn.d_hid = 4 * model.conn.d_vis;
    if (model.conn.d_out == 0) model.conn.d_out = model.dec.d_model;
    if (model.dec.vocab_size == 0) model.dec.vocab_size = vocabulary().size();
    if (model.dec.max_seq_len == 0) {
        model.enc.validate();  // tokens() needs a sane patch grid
        model.dec.max_seq_len = model.enc.tokens() + max_record_tokens() + 8;
    }

    gen.validate();
    model.validate();
    train.validate();

    std::vector<std::string> problems;
    if (data_count <= 0) problems.push_back("data.count must be positive");
    if (!(split_ratio > 0.0 && split_ratio <= 1.0)) {
        problems.push_back("data.split_ratio must lie in (0,1]");
    }
    if (eval_max_answer_len < 0) problems.push_back("eval.max_answer_len must be >= 0");
    if (eval_limit < 0) problems.push_back("eval.limit must be >= 0");
    if (!(metrics_k_const > 0.0)) problems.push_back("metrics.k_const must be positive");
    if (!(metrics_medium_min > 0.0 && metrics_medium_max > metrics_medium_min)) {
        problems.push_back("metrics area bands must satisfy 0 < medium_min < medium_max");
    }
    if (!problems.empty()) {
        std::string msg = "run config invalid:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

OksParams RunConfig::oks_params() const {
    OksParams p = OksParams::constant(metrics_k_const);
    p.medium_min = metrics_medium_min;
    p.medium_max = metrics_medium_max;
    if (!metrics_k_file.empty()) {
        std::ifstream in(metrics_k_file);
        if (!in) throw IoError("cannot open metrics.k_file " + metrics_k_file);
        for (int i = 0; i < 17; ++i) {
            if (!(in >> p.k[static_cast<size_t>(i)])) {
                throw ParseError(metrics_k_file + ": expected 17 falloff constants");
            }
        }
    }
    p.validate();
    return p;
}

}  // namespace posellm

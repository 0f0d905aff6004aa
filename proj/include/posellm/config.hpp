#pragma once

#include <map>
#include <string>

#include "posellm/metrics.hpp"
#include "posellm/model.hpp"
#include "posellm/synth.hpp"
#include "posellm/trainer.hpp"

namespace posellm {

// Everything a run needs, merged from defaults, a config file and CLI
// overrides. finalize() resolves the auto (=0) fields and validates every
// cross-module constraint before any compute starts.
struct RunConfig {
    GeneratorConfig gen;
    int data_count = 256;
    double split_ratio = 0.875;

    ModelConfig model;
    TrainConfig train;

    int eval_max_answer_len = 24;
    int eval_limit = 0;  // 0 = whole dataset

    double metrics_k_const = 0.08;
    std::string metrics_k_file;  // optional: 17 published per-keypoint constants
    double metrics_medium_min = 32.0 * 32.0;
    double metrics_medium_max = 96.0 * 96.0;

    void finalize();  // resolve autos, then validate (ConfigError lists all problems)
    OksParams oks_params() const;
};

// key=value lines; '#' starts a comment; section-prefixed keys
// ("encoder.depth=2"). ParseError names the line on malformed input.
std::map<std::string, std::string> read_config_file(const std::string& path);

// "key=value" from the command line; later entries win.
void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment);

// Defaults overlaid with `kv`; unknown keys are ConfigErrors.
RunConfig make_run_config(const std::map<std::string, std::string>& kv);

}  // namespace posellm

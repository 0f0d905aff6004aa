#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/config.hpp"
#include "posellm/metrics.hpp"
#include "posellm/model.hpp"
#include "posellm/trainer.hpp"

namespace posellm {

struct GenerateResult {
    std::string train_path;
    std::string val_path;
    int train_count{0};
    int val_count{0};
};

// Draws data_count samples from consecutive seeds starting at `seed`, then
// splits train/val by split_ratio. Deterministic: same inputs, same bytes.
GenerateResult generate_splits(const RunConfig& cfg, uint64_t seed, const std::string& out_dir);

struct TrainOutputs {
    std::string checkpoint_path;
    std::string state_path;
    std::string curve_path;
    double initial_loss{0.0};
    double final_loss{0.0};
    long long steps{0};
};

// Builds the model, trains per cfg.train, writes checkpoint + loss curve +
// resume state (+ vocabulary dump) into out_dir. When resume_state is
// non-empty, continues from it and appends to the existing curve.
TrainOutputs run_training(const RunConfig& cfg, const std::string& data_path,
                          const std::string& out_dir, const std::string& resume_state = "",
                          long long max_steps = -1);

// Greedy-decodes every (sample, keypoint) query; parse failures are misses.
std::vector<Prediction> decode_dataset(Model& model, const std::vector<SkeletonSample>& samples,
                                       int limit, int max_answer_len);

struct EvalOutputs {
    EvalReport report;
    std::string predictions_path;
    std::string report_path;
    std::string report_kv_path;
};

EvalOutputs run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& data_path, const std::string& out_dir);

struct PredictOutput {
    bool parsed{false};
    double x{0.0};
    double y{0.0};
    std::string text;
};

// image_path is a PGM (P5 or P2) whose size must match the encoder input.
PredictOutput run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                          const std::string& image_path, const std::string& keypoint_name,
                          const std::string& marker_out_path = "");

}  // namespace posellm

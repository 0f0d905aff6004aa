#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/model.hpp"
#include "posellm/synth.hpp"

namespace posellm {

struct TrainConfig {
    int epochs = 30;
    double lr = 1e-3;
    double weight_decay = 0.01;
    int micro_batch = 8;
    int accumulation_steps = 4;  // effective batch = micro_batch * accumulation_steps
    int keypoints_per_sample = 1;  // queries drawn per image per epoch (rotating)
    uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
    std::string canonical() const;  // resume-relevant fields (epochs excluded)
    std::string hash() const;
};

// Optimizer and data-order position. Buffers are laid out over the model's
// flat gradient space; (epoch, pos) pin the record stream so a reloaded
// state replays the exact same batches.
struct TrainState {
    std::vector<double> m;
    std::vector<double> v;
    long long t{0};     // AdamW steps taken
    long long step{0};  // == t; kept separate for readability in curves
    int epoch{0};
    int pos{0};  // records consumed in the current epoch
    double last_loss{0.0};
};

struct StepRecord {
    long long step;
    double loss;
};

struct TrainResult {
    std::vector<StepRecord> curve;  // one entry per optimizer step taken in this call
};

// Decoupled-weight-decay Adam update with bias correction; t is 1-based.
void adamw_step(double* p, const double* g, double* m, double* v, size_t n, long long t,
                double lr, double wd, double b1, double b2, double eps);

// The keypoint queried for sample `orig_index` in `epoch`: deterministic
// rotation over the 17 indices, advanced to the next visible joint.
// Returns -1 when the sample has no visible keypoint.
int keypoint_for_record(const SkeletonSample& sample, int orig_index, int epoch);

// Deterministic permutation of [0, n) for an epoch.
std::vector<int> epoch_order(uint64_t seed, int epoch, int n);

// Teacher-forced training. Resumes from `state`; runs until `config.epochs`
// epochs are complete or `max_steps` optimizer steps were taken in this
// call (max_steps < 0 means no cap). Throws TrainAbort on non-finite loss.
TrainResult train(Model& model, const std::vector<SkeletonSample>& dataset,
                  const TrainConfig& config, TrainState& state, long long max_steps = -1);

// Full float64 round-trip of weights + optimizer state, version-gated and
// hash-gated; resuming reproduces the continuous run bit-for-bit.
void save_train_state(const std::string& path, const Model& model, const TrainState& state,
                      const TrainConfig& config);
void load_train_state(const std::string& path, Model& model, TrainState& state,
                      const TrainConfig& config);

}  // namespace posellm

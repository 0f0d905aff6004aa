#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "posellm/params.hpp"
#include "posellm/tensor.hpp"

namespace posellm {

// ---------------------------------------------------------------------------
// LoRA
// ---------------------------------------------------------------------------

struct LoraPair {
    Param* a{nullptr};  // r x d_in
    Param* b{nullptr};  // d_out x r, zero-initialized
    int r{0};
    double alpha{0.0};
    double scale() const { return alpha / static_cast<double>(r); }
};

// Adapters keyed by the name of the base weight they modify. Attach is only
// valid for existing 2-D parameters; anything else is a ConfigError.
class LoraSet {
public:
    LoraPair& attach(ParamStore& store, const std::string& target, int r, double alpha,
                     uint64_t seed);
    const LoraPair* find(const std::string& target) const;
    std::vector<std::string> targets_sorted() const;
    bool empty() const { return by_target_.empty(); }

    // Folds alpha/r * (BA) into each base weight. Adapter params keep their
    // values; callers normally drop or re-zero them afterwards.
    void merge_into(ParamStore& store) const;

private:
    std::map<std::string, LoraPair> by_target_;
};

// ---------------------------------------------------------------------------
// linear / layer norm / attention / mlp
// ---------------------------------------------------------------------------

struct LinearRef {
    Param* w{nullptr};     // d_in x d_out
    Param* bias{nullptr};  // 1 x d_out, optional
    const LoraPair* lora{nullptr};
};

void linear_forward(const Mat& x, const LinearRef& lin, Mat& y);
// dx may be null when input gradients are not needed.
void linear_backward(const Mat& x, const LinearRef& lin, const Mat& dy, Mat* dx, GradBuffer& gb);

struct LayerNormRef {
    Param* gain{nullptr};
    Param* bias{nullptr};
};

struct LayerNormCache {
    Mat xhat;
    std::vector<double> rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

void layer_norm_forward(const Mat& x, const LayerNormRef& ln, LayerNormCache& cache, Mat& y);
void layer_norm_backward(const LayerNormRef& ln, const LayerNormCache& cache, const Mat& dy,
                         Mat& dx_acc, GradBuffer& gb);

struct AttnRef {
    LinearRef q, k, v, o;
    int heads{1};
};

struct AttnCache {
    Mat q, k, v;
    Mat probs;  // (heads * S) x S, row h*S+i = attention of query i in head h
    Mat ctx;
};

void attention_forward(const Mat& x, const AttnRef& attn, bool causal, AttnCache& cache, Mat& y);
void attention_backward(const Mat& x, const AttnRef& attn, bool causal, const AttnCache& cache,
                        const Mat& dy, Mat& dx_acc, GradBuffer& gb);

struct MlpRef {
    LinearRef fc1, fc2;
};

struct MlpCache {
    Mat mid;  // pre-activation
    Mat act;
};

void mlp_forward(const Mat& x, const MlpRef& mlp, MlpCache& cache, Mat& y);
void mlp_backward(const Mat& x, const MlpRef& mlp, const MlpCache& cache, const Mat& dy,
                  Mat& dx_acc, GradBuffer& gb);

// ---------------------------------------------------------------------------
// pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x))
// ---------------------------------------------------------------------------

struct BlockRef {
    LayerNormRef ln1;
    AttnRef attn;
    LayerNormRef ln2;
    MlpRef mlp;
};

struct BlockCache {
    Mat h1, h2;
    LayerNormCache ln1, ln2;
    AttnCache attn;
    MlpCache mlp;
};

void block_forward(Mat& x, const BlockRef& blk, bool causal, BlockCache& cache);
// dx holds dL/d(block output) on entry and dL/d(block input) on exit.
void block_backward(Mat& dx, const BlockRef& blk, bool causal, const BlockCache& cache,
                    GradBuffer& gb);

// Adds ln1/attn/ln2/mlp parameters under `prefix.` (weights trunc-normal 0.02,
// biases zero, gains one).
void build_block_params(ParamStore& store, const std::string& prefix, int d, int mlp_ratio,
                        uint64_t seed);
BlockRef make_block_ref(ParamStore& store, const LoraSet& lora, const std::string& prefix,
                        int heads);

}  // namespace posellm

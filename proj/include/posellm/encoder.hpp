#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/layers.hpp"
#include "posellm/params.hpp"
#include "posellm/tensor.hpp"

namespace posellm {

struct EncoderConfig {
    int image_size = 64;
    int patch_size = 8;
    int depth = 2;
    int d_vis = 64;
    int heads = 4;
    int mlp_ratio = 4;

    int grid() const { return image_size / patch_size; }
    int tokens() const { return grid() * grid(); }
    void validate() const;
};

// Parameter names live under "enc.": enc.patch.w/b, enc.pos,
// enc.block{i}.{ln1,attn,ln2,mlp}.*
void build_encoder_params(ParamStore& store, const EncoderConfig& cfg, uint64_t seed);

struct EncoderRefs {
    Param* patch_w{nullptr};  // p*p x d_vis
    Param* patch_b{nullptr};
    Param* pos{nullptr};  // N x d_vis
    std::vector<BlockRef> blocks;
};

EncoderRefs encoder_refs(ParamStore& store, const LoraSet& lora, const EncoderConfig& cfg);

struct EncoderCache {
    Mat patches;  // N x p*p
    Mat x;        // output tokens
    std::vector<BlockCache> blocks;
};

// image: h*w row-major, pixel values in [0,1]. Throws ShapeError naming
// expected/actual when (h, w) do not match the config.
void encode_forward(const double* image, int h, int w, const EncoderConfig& cfg,
                    const EncoderRefs& refs, EncoderCache& cache, Mat& tokens_out);

// Accumulates parameter gradients for d_tokens (the gradient w.r.t. the
// encoder output). Input-image gradients are never needed.
void encode_backward(const EncoderConfig& cfg, const EncoderRefs& refs, const EncoderCache& cache,
                     const Mat& d_tokens, GradBuffer& gb);

// Patch projection alone, without the positional term (test hook for the
// stride-translation permutation property).
void patch_embedding(const double* image, int h, int w, const EncoderConfig& cfg,
                     const EncoderRefs& refs, Mat& out);

// (name, (rows, cols)) for every "enc."-prefixed parameter, sorted by name.
std::vector<std::pair<std::string, std::pair<int, int>>> encoder_parameters(
    const ParamStore& store);

// Closed-form parameter count for a config (used to cross-check enumeration).
size_t encoder_parameter_count(const EncoderConfig& cfg);

}  // namespace posellm

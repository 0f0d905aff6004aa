#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/layers.hpp"
#include "posellm/params.hpp"
#include "posellm/tensor.hpp"

namespace posellm {

struct DecoderConfig {
    int d_model = 64;
    int depth = 2;
    int heads = 4;
    int mlp_ratio = 4;
    int vocab_size = 50;
    int max_seq_len = 320;

    void validate() const;
};

// Parameter names live under "dec.": dec.embed, dec.pos (text positions,
// indexed from n_vis upward), dec.pos_vis, dec.block{i}.*, dec.out.w/b
void build_decoder_params(ParamStore& store, const DecoderConfig& cfg, uint64_t seed);

struct DecoderRefs {
    Param* embed{nullptr};    // vocab x d
    Param* pos{nullptr};      // max_seq_len x d, used at absolute index
    Param* pos_vis{nullptr};  // max_seq_len x d, visual positions only
    std::vector<BlockRef> blocks;
    Param* out_w{nullptr};  // d x vocab
    Param* out_b{nullptr};
};

DecoderRefs decoder_refs(ParamStore& store, const LoraSet& lora, const DecoderConfig& cfg);

struct DecoderCache {
    int n_vis{0};
    std::vector<int> ids;
    Mat x;  // final hidden states, (n_vis + L) x d
    std::vector<BlockCache> blocks;
};

// V: n_vis x d_model visual embeddings; ids: L text token ids. Emits logits
// for the L text positions only. Causal over the concatenated sequence
// (visual block first). Throws CapacityError past max_seq_len.
void decoder_forward(const Mat& v, const std::vector<int>& ids, const DecoderConfig& cfg,
                     const DecoderRefs& refs, DecoderCache& cache, Mat& logits);

// dlogits: L x vocab. Accumulates parameter gradients and writes dV.
void decoder_backward(const DecoderConfig& cfg, const DecoderRefs& refs, DecoderCache& cache,
                      const Mat& dlogits, Mat& dv, GradBuffer& gb);

// Mean over mask-true positions of -log softmax(logits)[target]. Mask-false
// positions contribute exactly zero. DomainError on an all-false mask.
double masked_cross_entropy(const Mat& logits, const std::vector<int>& targets,
                            const std::vector<bool>& mask);

// Sum form used by the trainer: returns the loss sum over mask-true
// positions, sets *count, and (optionally) writes unscaled dlogits.
double masked_cross_entropy_sum(const Mat& logits, const std::vector<int>& targets,
                                const std::vector<bool>& mask, int* count, Mat* dlogits);

struct DecodeResult {
    std::vector<int> generated;  // token ids, including eos when emitted
    std::string text;            // generated text without specials
    bool parsed{false};
    double x{0.0};
    double y{0.0};
};

// Greedy decoding: repeatedly append the argmax token (ties broken by the
// lowest id) until eos or max_answer_len; the answer text is then parsed.
DecodeResult greedy_decode(const Mat& v, const std::vector<int>& prompt_ids,
                           const DecoderConfig& cfg, const DecoderRefs& refs, int max_answer_len);

}  // namespace posellm

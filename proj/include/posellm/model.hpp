#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/connector.hpp"
#include "posellm/decoder.hpp"
#include "posellm/encoder.hpp"
#include "posellm/layers.hpp"
#include "posellm/params.hpp"
#include "posellm/synth.hpp"

namespace posellm {

struct ModelConfig {
    EncoderConfig enc;
    ConnectorConfig conn;
    DecoderConfig dec;
    int lora_r = 4;
    double lora_alpha = 4.0;
    std::string lora_targets = "q,v";  // letters from {q,k,v,o}, both towers
    bool train_embeddings = false;
    uint64_t init_seed = 1234;

    void validate() const;  // cross-module width and capacity constraints
    // canonical serialization of everything that determines parameter
    // shapes and initial values; basis of checkpoint compatibility hashes
    std::string canonical() const;
    std::string hash() const;
};

// Expands lora_targets to concrete parameter names over both towers.
std::vector<std::string> expand_lora_targets(const ModelConfig& cfg);

struct Model {
    ModelConfig cfg;
    ParamStore store;
    LoraSet lora;
    EncoderRefs enc;
    ConnectorRefs conn;
    DecoderRefs dec;
};

// Builds parameters, attaches adapters, marks trainability, caches refs.
void build_model(Model& model, const ModelConfig& cfg);

// Per-record scratch space; reuse across records, one instance per thread.
struct RecordWork {
    EncoderCache enc;
    ConnectorCache conn;
    DecoderCache dec;
    Mat tokens;
    Mat vis;
    Mat logits;
    Mat dlogits;
    Mat dvis;
    Mat dtokens;
};

// Teacher-forced loss for one (sample, keypoint) record. Returns the loss
// SUM over mask-true positions and sets *mask_count; when gb is non-null,
// accumulates unscaled parameter gradients (caller divides by the total
// token count of the effective batch).
double record_loss(Model& model, const SkeletonSample& sample, int keypoint_index,
                   GradBuffer* gb, int* mask_count, RecordWork& work);

// Greedy decoding for one (sample, keypoint) query.
DecodeResult decode_record(Model& model, const SkeletonSample& sample, int keypoint_index,
                           int max_answer_len, RecordWork& work);

}  // namespace posellm

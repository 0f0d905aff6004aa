#include "posellm/encoder.hpp"

#include "posellm/errors.hpp"

namespace posellm {

void EncoderConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0) {
        throw ConfigError("encoder: image_size and patch_size must be positive");
    }
    if (image_size % patch_size != 0) {
        throw ConfigError("encoder: image_size " + std::to_string(image_size) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    }
    if (depth < 0) throw ConfigError("encoder: depth must be >= 0");
    if (d_vis <= 0 || heads <= 0 || mlp_ratio <= 0) {
        throw ConfigError("encoder: d_vis, heads and mlp_ratio must be positive");
    }
    if (d_vis % heads != 0) {
        throw ConfigError("encoder: d_vis " + std::to_string(d_vis) + " not divisible by heads " +
                          std::to_string(heads));
    }
}

void build_encoder_params(ParamStore& store, const EncoderConfig& cfg, uint64_t seed) {
    cfg.validate();
    const int pp = cfg.patch_size * cfg.patch_size;
    Param& pw = store.add("enc.patch.w", pp, cfg.d_vis);
    store.add("enc.patch.b", 1, cfg.d_vis);
    Param& pos = store.add("enc.pos", cfg.tokens(), cfg.d_vis);
    store.init_trunc_normal(pw, seed, 0.02);
    store.init_trunc_normal(pos, seed, 0.02);
    for (int i = 0; i < cfg.depth; ++i) {
        build_block_params(store, "enc.block" + std::to_string(i), cfg.d_vis, cfg.mlp_ratio, seed);
    }
}

EncoderRefs encoder_refs(ParamStore& store, const LoraSet& lora, const EncoderConfig& cfg) {
    EncoderRefs refs;
    refs.patch_w = &store.get("enc.patch.w");
    refs.patch_b = &store.get("enc.patch.b");
    refs.pos = &store.get("enc.pos");
    refs.blocks.reserve(static_cast<size_t>(cfg.depth));
    for (int i = 0; i < cfg.depth; ++i) {
        refs.blocks.push_back(make_block_ref(store, lora, "enc.block" + std::to_string(i), cfg.heads));
    }
    return refs;
}

namespace {

void extract_patches(const double* image, const EncoderConfig& cfg, Mat& patches) {
    const int g = cfg.grid();
    const int p = cfg.patch_size;
    patches = Mat(cfg.tokens(), p * p);
    for (int py = 0; py < g; ++py) {
        for (int pxi = 0; pxi < g; ++pxi) {
            double* row = patches.row(py * g + pxi);
            for (int y = 0; y < p; ++y) {
                const double* src = image + static_cast<size_t>(py * p + y) * cfg.image_size +
                                    static_cast<size_t>(pxi) * p;
                for (int x = 0; x < p; ++x) row[y * p + x] = src[x];
            }
        }
    }
}

}  // namespace

void patch_embedding(const double* image, int h, int w, const EncoderConfig& cfg,
                     const EncoderRefs& refs, Mat& out) {
    if (h != cfg.image_size || w != cfg.image_size) {
        throw ShapeError("encoder: expected " + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size) + " image, got " + std::to_string(h) +
                         "x" + std::to_string(w));
    }
    Mat patches;
    extract_patches(image, cfg, patches);
    const LinearRef lin{refs.patch_w, refs.patch_b, nullptr};
    linear_forward(patches, lin, out);
}

void encode_forward(const double* image, int h, int w, const EncoderConfig& cfg,
                    const EncoderRefs& refs, EncoderCache& cache, Mat& tokens_out) {
    if (h != cfg.image_size || w != cfg.image_size) {
        throw ShapeError("encoder: expected " + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size) + " image, got " + std::to_string(h) +
                         "x" + std::to_string(w));
    }
    extract_patches(image, cfg, cache.patches);
    const LinearRef lin{refs.patch_w, refs.patch_b, nullptr};
    linear_forward(cache.patches, lin, cache.x);
    for (int i = 0; i < cache.x.rows; ++i) {
        const double* pos = refs.pos->w.row(i);
        double* xi = cache.x.row(i);
        for (int j = 0; j < cache.x.cols; ++j) xi[j] += pos[j];
    }
    cache.blocks.resize(refs.blocks.size());
    for (size_t b = 0; b < refs.blocks.size(); ++b) {
        block_forward(cache.x, refs.blocks[b], /*causal=*/false, cache.blocks[b]);
    }
    tokens_out = cache.x;
}

void encode_backward(const EncoderConfig& cfg, const EncoderRefs& refs, const EncoderCache& cache,
                     const Mat& d_tokens, GradBuffer& gb) {
    (void)cfg;
    Mat dx = d_tokens;
    for (size_t b = refs.blocks.size(); b-- > 0;) {
        block_backward(dx, refs.blocks[b], /*causal=*/false, cache.blocks[b], gb);
    }
    if (double* gpos = gb.slot(*refs.pos)) {
        for (size_t i = 0; i < dx.data.size(); ++i) gpos[i] += dx.data[i];
    }
    const LinearRef lin{refs.patch_w, refs.patch_b, nullptr};
    linear_backward(cache.patches, lin, dx, nullptr, gb);
}

std::vector<std::pair<std::string, std::pair<int, int>>> encoder_parameters(
    const ParamStore& store) {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    for (const auto& [name, shape] : store.shapes_sorted()) {
        if (name.rfind("enc.", 0) == 0) out.emplace_back(name, shape);
    }
    return out;
}

size_t encoder_parameter_count(const EncoderConfig& cfg) {
    const size_t d = static_cast<size_t>(cfg.d_vis);
    const size_t pp = static_cast<size_t>(cfg.patch_size) * cfg.patch_size;
    const size_t n = static_cast<size_t>(cfg.tokens());
    const size_t per_block = 2 * (2 * d)                       // two layer norms
                             + 4 * (d * d + d)                 // q,k,v,o with biases
                             + d * (d * cfg.mlp_ratio) + d * cfg.mlp_ratio  // fc1
                             + (d * cfg.mlp_ratio) * d + d;    // fc2
    return pp * d + d + n * d + static_cast<size_t>(cfg.depth) * per_block;
}

}  // namespace posellm

#include "posellm/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "posellm/errors.hpp"
#include "posellm/prompt.hpp"
#include "posellm/tokenizer.hpp"

namespace posellm {

void DecoderConfig::validate() const {
    if (d_model <= 0 || heads <= 0 || mlp_ratio <= 0) {
        throw ConfigError("decoder: d_model, heads and mlp_ratio must be positive");
    }
    if (depth < 0) throw ConfigError("decoder: depth must be >= 0");
    if (d_model % heads != 0) {
        throw ConfigError("decoder: d_model " + std::to_string(d_model) +
                          " not divisible by heads " + std::to_string(heads));
    }
    if (vocab_size <= 0) throw ConfigError("decoder: vocab_size must be positive");
    if (max_seq_len <= 0) throw ConfigError("decoder: max_seq_len must be positive");
}

void build_decoder_params(ParamStore& store, const DecoderConfig& cfg, uint64_t seed) {
    cfg.validate();
    Param& emb = store.add("dec.embed", cfg.vocab_size, cfg.d_model);
    Param& pos = store.add("dec.pos", cfg.max_seq_len, cfg.d_model);
    Param& pos_vis = store.add("dec.pos_vis", cfg.max_seq_len, cfg.d_model);
    store.init_trunc_normal(emb, seed, 0.02);
    store.init_trunc_normal(pos, seed, 0.02);
    store.init_trunc_normal(pos_vis, seed, 0.02);
    for (int i = 0; i < cfg.depth; ++i) {
        build_block_params(store, "dec.block" + std::to_string(i), cfg.d_model, cfg.mlp_ratio,
                           seed);
    }
    Param& ow = store.add("dec.out.w", cfg.d_model, cfg.vocab_size);
    store.add("dec.out.b", 1, cfg.vocab_size);
    store.init_trunc_normal(ow, seed, 0.02);
}

DecoderRefs decoder_refs(ParamStore& store, const LoraSet& lora, const DecoderConfig& cfg) {
    DecoderRefs refs;
    refs.embed = &store.get("dec.embed");
    refs.pos = &store.get("dec.pos");
    refs.pos_vis = &store.get("dec.pos_vis");
    refs.blocks.reserve(static_cast<size_t>(cfg.depth));
    for (int i = 0; i < cfg.depth; ++i) {
        refs.blocks.push_back(make_block_ref(store, lora, "dec.block" + std::to_string(i), cfg.heads));
    }
    refs.out_w = &store.get("dec.out.w");
    refs.out_b = &store.get("dec.out.b");
    return refs;
}

void decoder_forward(const Mat& v, const std::vector<int>& ids, const DecoderConfig& cfg,
                     const DecoderRefs& refs, DecoderCache& cache, Mat& logits) {
    const int n_vis = v.rows;
    const int n_txt = static_cast<int>(ids.size());
    const int s = n_vis + n_txt;
    if (s > cfg.max_seq_len) {
        throw CapacityError("decoder: sequence length " + std::to_string(s) + " exceeds max " +
                            std::to_string(cfg.max_seq_len));
    }
    if (v.cols != cfg.d_model) {
        throw ShapeError("decoder: visual width " + std::to_string(v.cols) + " != d_model " +
                         std::to_string(cfg.d_model));
    }
    for (const int id : ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw DomainError("decoder: token id " + std::to_string(id) + " out of range");
        }
    }

    cache.n_vis = n_vis;
    cache.ids = ids;
    cache.x = Mat(s, cfg.d_model);
    for (int i = 0; i < n_vis; ++i) {
        const double* vi = v.row(i);
        const double* pv = refs.pos_vis->w.row(i);
        double* xi = cache.x.row(i);
        for (int j = 0; j < cfg.d_model; ++j) xi[j] = vi[j] + pv[j];
    }
    for (int t = 0; t < n_txt; ++t) {
        const double* e = refs.embed->w.row(ids[static_cast<size_t>(t)]);
        const double* p = refs.pos->w.row(n_vis + t);
        double* xi = cache.x.row(n_vis + t);
        for (int j = 0; j < cfg.d_model; ++j) xi[j] = e[j] + p[j];
    }

    cache.blocks.resize(refs.blocks.size());
    for (size_t b = 0; b < refs.blocks.size(); ++b) {
        block_forward(cache.x, refs.blocks[b], /*causal=*/true, cache.blocks[b]);
    }

    // output head over text positions only
    Mat text(n_txt, cfg.d_model);
    for (int t = 0; t < n_txt; ++t) {
        std::copy(cache.x.row(n_vis + t), cache.x.row(n_vis + t) + cfg.d_model, text.row(t));
    }
    const LinearRef head{refs.out_w, refs.out_b, nullptr};
    linear_forward(text, head, logits);
}

void decoder_backward(const DecoderConfig& cfg, const DecoderRefs& refs, DecoderCache& cache,
                      const Mat& dlogits, Mat& dv, GradBuffer& gb) {
    const int n_vis = cache.n_vis;
    const int n_txt = static_cast<int>(cache.ids.size());
    const int s = n_vis + n_txt;

    Mat text(n_txt, cfg.d_model);
    for (int t = 0; t < n_txt; ++t) {
        std::copy(cache.x.row(n_vis + t), cache.x.row(n_vis + t) + cfg.d_model, text.row(t));
    }
    Mat dtext(n_txt, cfg.d_model);
    const LinearRef head{refs.out_w, refs.out_b, nullptr};
    linear_backward(text, head, dlogits, &dtext, gb);

    Mat dx(s, cfg.d_model);
    for (int t = 0; t < n_txt; ++t) {
        std::copy(dtext.row(t), dtext.row(t) + cfg.d_model, dx.row(n_vis + t));
    }

    for (size_t b = refs.blocks.size(); b-- > 0;) {
        block_backward(dx, refs.blocks[b], /*causal=*/true, cache.blocks[b], gb);
    }

    dv = Mat(n_vis, cfg.d_model);
    for (int i = 0; i < n_vis; ++i) {
        std::copy(dx.row(i), dx.row(i) + cfg.d_model, dv.row(i));
    }
    if (double* gpv = gb.slot(*refs.pos_vis)) {
        for (int i = 0; i < n_vis; ++i) {
            const double* dxi = dx.row(i);
            double* g = gpv + static_cast<size_t>(i) * cfg.d_model;
            for (int j = 0; j < cfg.d_model; ++j) g[j] += dxi[j];
        }
    }
    if (double* gpos = gb.slot(*refs.pos)) {
        for (int t = 0; t < n_txt; ++t) {
            const double* dxi = dx.row(n_vis + t);
            double* g = gpos + static_cast<size_t>(n_vis + t) * cfg.d_model;
            for (int j = 0; j < cfg.d_model; ++j) g[j] += dxi[j];
        }
    }
    if (double* gemb = gb.slot(*refs.embed)) {
        for (int t = 0; t < n_txt; ++t) {
            const double* dxi = dx.row(n_vis + t);
            double* g = gemb + static_cast<size_t>(cache.ids[static_cast<size_t>(t)]) * cfg.d_model;
            for (int j = 0; j < cfg.d_model; ++j) g[j] += dxi[j];
        }
    }
}

namespace {

// row-wise log-softmax denominator; returns max and logsumexp
void row_logsumexp(const double* row, int n, double* maxv, double* lse) {
    double m = row[0];
    for (int j = 1; j < n; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(row[j] - m);
    *maxv = m;
    *lse = m + std::log(z);
}

}  // namespace

double masked_cross_entropy_sum(const Mat& logits, const std::vector<int>& targets,
                                const std::vector<bool>& mask, int* count, Mat* dlogits) {
    if (static_cast<size_t>(logits.rows) != targets.size() || targets.size() != mask.size()) {
        throw ShapeError("masked_cross_entropy: logits/targets/mask length mismatch");
    }
    if (dlogits != nullptr) *dlogits = Mat(logits.rows, logits.cols);
    double loss = 0.0;
    int n = 0;
    for (int i = 0; i < logits.rows; ++i) {
        if (!mask[static_cast<size_t>(i)]) continue;
        const int tgt = targets[static_cast<size_t>(i)];
        if (tgt < 0 || tgt >= logits.cols) {
            throw DomainError("masked_cross_entropy: target id out of range");
        }
        const double* row = logits.row(i);
        double maxv, lse;
        row_logsumexp(row, logits.cols, &maxv, &lse);
        loss += lse - row[tgt];
        ++n;
        if (dlogits != nullptr) {
            double* drow = dlogits->row(i);
            for (int j = 0; j < logits.cols; ++j) drow[j] = std::exp(row[j] - lse);
            drow[tgt] -= 1.0;
        }
    }
    if (count != nullptr) *count = n;
    return loss;
}

double masked_cross_entropy(const Mat& logits, const std::vector<int>& targets,
                            const std::vector<bool>& mask) {
    int count = 0;
    const double sum = masked_cross_entropy_sum(logits, targets, mask, &count, nullptr);
    if (count == 0) throw DomainError("masked_cross_entropy: mask selects no positions");
    return sum / count;
}

DecodeResult greedy_decode(const Mat& v, const std::vector<int>& prompt_ids,
                           const DecoderConfig& cfg, const DecoderRefs& refs,
                           int max_answer_len) {
    const Vocabulary& vocab = vocabulary();
    DecodeResult result;
    std::vector<int> ids = prompt_ids;
    DecoderCache cache;
    Mat logits;
    for (int step = 0; step < max_answer_len; ++step) {
        decoder_forward(v, ids, cfg, refs, cache, logits);
        const double* row = logits.row(logits.rows - 1);
        int best = 0;
        for (int j = 1; j < logits.cols; ++j) {
            if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
        }
        ids.push_back(best);
        result.generated.push_back(best);
        if (best == vocab.eos_id()) break;
    }
    result.text = vocab.detokenize(result.generated);

    // trim surrounding spaces before the strict grammar check
    std::string trimmed = result.text;
    const size_t first = trimmed.find_first_not_of(' ');
    if (first == std::string::npos) {
        trimmed.clear();
    } else {
        const size_t last = trimmed.find_last_not_of(' ');
        trimmed = trimmed.substr(first, last - first + 1);
    }
    if (const auto coords = parse_coords(trimmed)) {
        result.parsed = true;
        result.x = coords->first;
        result.y = coords->second;
    }
    return result;
}

}  // namespace posellm

#include "posellm/model.hpp"

#include <sstream>

#include "posellm/errors.hpp"
#include "posellm/prompt.hpp"
#include "posellm/rng.hpp"
#include "posellm/tokenizer.hpp"

namespace posellm {

void ModelConfig::validate() const {
    enc.validate();
    conn.validate();
    dec.validate();
    std::vector<std::string> problems;
    if (conn.d_vis != enc.d_vis) {
        problems.push_back("connector.d_vis " + std::to_string(conn.d_vis) +
                           " != encoder.d_vis " + std::to_string(enc.d_vis));
    }
    if (conn.d_out != dec.d_model) {
        problems.push_back("connector.d_out " + std::to_string(conn.d_out) +
                           " != decoder.d_model " + std::to_string(dec.d_model));
    }
    if (dec.vocab_size != vocabulary().size()) {
        problems.push_back("decoder.vocab_size " + std::to_string(dec.vocab_size) +
                           " != tokenizer vocabulary " + std::to_string(vocabulary().size()));
    }
    const int need = enc.tokens() + max_record_tokens();
    if (dec.max_seq_len < need) {
        problems.push_back("decoder.max_seq_len " + std::to_string(dec.max_seq_len) +
                           " < visual tokens + longest record = " + std::to_string(need));
    }
    if (lora_r <= 0) problems.push_back("lora_r must be positive");
    if (lora_alpha <= 0.0) problems.push_back("lora_alpha must be positive");
    for (const char c : lora_targets) {
        if (c != 'q' && c != 'k' && c != 'v' && c != 'o' && c != ',') {
            problems.push_back(std::string("lora_targets: unknown letter '") + c + "'");
            break;
        }
    }
    if (!problems.empty()) {
        std::string msg = "model config invalid:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::string ModelConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "connector.d_hid=" << conn.d_hid << "\nconnector.d_out=" << conn.d_out
       << "\nconnector.d_vis=" << conn.d_vis << "\nconnector.mode=" << to_string(conn.mode)
       << "\ndecoder.d_model=" << dec.d_model << "\ndecoder.depth=" << dec.depth
       << "\ndecoder.heads=" << dec.heads << "\ndecoder.max_seq_len=" << dec.max_seq_len
       << "\ndecoder.mlp_ratio=" << dec.mlp_ratio << "\ndecoder.vocab_size=" << dec.vocab_size
       << "\nencoder.d_vis=" << enc.d_vis << "\nencoder.depth=" << enc.depth
       << "\nencoder.heads=" << enc.heads << "\nencoder.image_size=" << enc.image_size
       << "\nencoder.mlp_ratio=" << enc.mlp_ratio << "\nencoder.patch_size=" << enc.patch_size
       << "\nmodel.init_seed=" << init_seed << "\ntrain.lora_alpha=" << lora_alpha
       << "\ntrain.lora_r=" << lora_r << "\ntrain.lora_targets=" << lora_targets << "\n";
    return os.str();
}

std::string ModelConfig::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

std::vector<std::string> expand_lora_targets(const ModelConfig& cfg) {
    std::vector<std::string> letters;
    std::string cur;
    for (const char c : cfg.lora_targets + ",") {
        if (c == ',') {
            if (!cur.empty()) letters.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    std::vector<std::string> names;
    for (const auto& l : letters) {
        if (l != "q" && l != "k" && l != "v" && l != "o") {
            throw ConfigError("lora_targets: unknown projection '" + l + "'");
        }
        for (int i = 0; i < cfg.enc.depth; ++i) {
            names.push_back("enc.block" + std::to_string(i) + ".attn.w" + l);
        }
        for (int i = 0; i < cfg.dec.depth; ++i) {
            names.push_back("dec.block" + std::to_string(i) + ".attn.w" + l);
        }
    }
    return names;
}

void build_model(Model& model, const ModelConfig& cfg) {
    cfg.validate();
    model.cfg = cfg;
    build_encoder_params(model.store, cfg.enc, cfg.init_seed);
    build_connector_params(model.store, cfg.conn, cfg.init_seed);
    build_decoder_params(model.store, cfg.dec, cfg.init_seed);
    for (const auto& target : expand_lora_targets(cfg)) {
        model.lora.attach(model.store, target, cfg.lora_r, cfg.lora_alpha, cfg.init_seed);
    }
    if (cfg.train_embeddings) {
        for (const char* name : {"dec.embed", "dec.pos", "dec.pos_vis", "dec.out.w", "dec.out.b",
                                 "enc.pos"}) {
            model.store.get(name).trainable = true;
        }
    }
    model.enc = encoder_refs(model.store, model.lora, cfg.enc);
    model.conn = connector_refs(model.store, cfg.conn);
    model.dec = decoder_refs(model.store, model.lora, cfg.dec);
}

double record_loss(Model& model, const SkeletonSample& sample, int keypoint_index,
                   GradBuffer* gb, int* mask_count, RecordWork& work) {
    const InstructionRecord rec =
        make_training_record(keypoint_index, sample.keypoints[2 * keypoint_index],
                             sample.keypoints[2 * keypoint_index + 1]);

    encode_forward(sample.image.data(), sample.h, sample.w, model.cfg.enc, model.enc, work.enc,
                   work.tokens);
    connect_forward(work.tokens, model.conn, work.conn, work.vis);

    // teacher forcing: inputs drop the final token, targets drop the first
    const std::vector<int> inputs(rec.token_ids.begin(), rec.token_ids.end() - 1);
    const std::vector<int> targets(rec.token_ids.begin() + 1, rec.token_ids.end());
    const std::vector<bool> mask(rec.answer_mask.begin() + 1, rec.answer_mask.end());

    decoder_forward(work.vis, inputs, model.cfg.dec, model.dec, work.dec, work.logits);

    const double loss_sum =
        masked_cross_entropy_sum(work.logits, targets, mask, mask_count,
                                 gb != nullptr ? &work.dlogits : nullptr);
    if (gb != nullptr) {
        decoder_backward(model.cfg.dec, model.dec, work.dec, work.dlogits, work.dvis, *gb);
        work.dtokens = Mat(work.tokens.rows, work.tokens.cols);
        connect_backward(work.tokens, model.conn, work.conn, work.dvis, work.dtokens, *gb);
        encode_backward(model.cfg.enc, model.enc, work.enc, work.dtokens, *gb);
    }
    return loss_sum;
}

DecodeResult decode_record(Model& model, const SkeletonSample& sample, int keypoint_index,
                           int max_answer_len, RecordWork& work) {
    encode_forward(sample.image.data(), sample.h, sample.w, model.cfg.enc, model.enc, work.enc,
                   work.tokens);
    connect_forward(work.tokens, model.conn, work.conn, work.vis);
    const std::vector<int> prompt_ids = make_prompt_ids(keypoint_index);
    return greedy_decode(work.vis, prompt_ids, model.cfg.dec, model.dec, max_answer_len);
}

}  // namespace posellm

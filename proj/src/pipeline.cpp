#include "posellm/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#ifdef POSELLM_OPENMP
#include <omp.h>
#endif

#include "posellm/catalog.hpp"
#include "posellm/checkpoint.hpp"
#include "posellm/errors.hpp"
#include "posellm/pgm.hpp"
#include "posellm/tokenizer.hpp"

namespace posellm {

namespace fs = std::filesystem;

GenerateResult generate_splits(const RunConfig& cfg, uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<SkeletonSample> samples;
    samples.reserve(static_cast<size_t>(cfg.data_count));
    for (int i = 0; i < cfg.data_count; ++i) {
        samples.push_back(generate_sample(seed + static_cast<uint64_t>(i), cfg.gen));
    }
    const int n_train = std::min(
        cfg.data_count,
        static_cast<int>(std::llround(cfg.split_ratio * static_cast<double>(cfg.data_count))));
    const std::vector<SkeletonSample> train(samples.begin(), samples.begin() + n_train);
    const std::vector<SkeletonSample> val(samples.begin() + n_train, samples.end());

    GenerateResult result;
    result.train_path = (fs::path(out_dir) / "train.jsonl").string();
    result.val_path = (fs::path(out_dir) / "val.jsonl").string();
    write_dataset(train, result.train_path, "train", cfg.gen.hash());
    write_dataset(val, result.val_path, "val", cfg.gen.hash());
    result.train_count = n_train;
    result.val_count = cfg.data_count - n_train;
    return result;
}

TrainOutputs run_training(const RunConfig& cfg, const std::string& data_path,
                          const std::string& out_dir, const std::string& resume_state,
                          long long max_steps) {
    fs::create_directories(out_dir);
    const std::vector<SkeletonSample> dataset = load_dataset_checked(data_path);
    if (dataset.empty()) throw ConfigError("train: dataset " + data_path + " is empty");
    for (const auto& s : dataset) {
        if (s.h != cfg.model.enc.image_size || s.w != cfg.model.enc.image_size) {
            throw ConfigError("train: dataset image " + std::to_string(s.h) + "x" +
                              std::to_string(s.w) + " does not match encoder input " +
                              std::to_string(cfg.model.enc.image_size));
        }
    }

    Model model;
    build_model(model, cfg.model);
    TrainState state;
    const bool resuming = !resume_state.empty();
    if (resuming) load_train_state(resume_state, model, state, cfg.train);

    const TrainResult result = train(model, dataset, cfg.train, state, max_steps);

    TrainOutputs out;
    out.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
    out.state_path = (fs::path(out_dir) / "train_state.bin").string();
    out.curve_path = (fs::path(out_dir) / "loss_curve.txt").string();
    save_checkpoint(out.checkpoint_path, model.store, cfg.model.hash());
    save_train_state(out.state_path, model, state, cfg.train);

    std::ofstream curve(out.curve_path, resuming ? std::ios::app : std::ios::trunc);
    if (!curve) throw IoError("cannot open " + out.curve_path + " for writing");
    curve.precision(17);
    for (const auto& [step, loss] : result.curve) {
        curve << step << " " << loss << "\n";
    }
    curve.close();

    std::ofstream vocab_dump((fs::path(out_dir) / "vocabulary.tsv").string());
    vocab_dump << vocabulary().to_tsv();

    out.initial_loss = result.curve.empty() ? state.last_loss : result.curve.front().loss;
    out.final_loss = result.curve.empty() ? state.last_loss : result.curve.back().loss;
    out.steps = static_cast<long long>(result.curve.size());
    return out;
}

std::vector<Prediction> decode_dataset(Model& model, const std::vector<SkeletonSample>& samples,
                                       int limit, int max_answer_len) {
    const int n = limit > 0 ? std::min(limit, static_cast<int>(samples.size()))
                            : static_cast<int>(samples.size());
    std::vector<Prediction> preds(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) preds[static_cast<size_t>(i)].id = i;

    int nthreads = 1;
#ifdef POSELLM_OPENMP
    nthreads = omp_get_max_threads();
#endif
    std::vector<RecordWork> works(static_cast<size_t>(nthreads));

    const int total = n * kNumKeypoints;
#ifdef POSELLM_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (int q = 0; q < total; ++q) {
        int tid = 0;
#ifdef POSELLM_OPENMP
        tid = omp_get_thread_num();
#endif
        const int i = q / kNumKeypoints;
        const int k = q % kNumKeypoints;
        const DecodeResult r = decode_record(model, samples[static_cast<size_t>(i)], k,
                                             max_answer_len, works[static_cast<size_t>(tid)]);
        KeypointPrediction& kp = preds[static_cast<size_t>(i)].kps[static_cast<size_t>(k)];
        if (r.parsed) {
            kp.present = true;
            kp.x = r.x;
            kp.y = r.y;
        }
    }
    return preds;
}

EvalOutputs run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& data_path, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<SkeletonSample> samples = load_dataset_checked(data_path);
    if (cfg.eval_limit > 0 && static_cast<int>(samples.size()) > cfg.eval_limit) {
        samples.resize(static_cast<size_t>(cfg.eval_limit));
    }

    Model model;
    build_model(model, cfg.model);
    load_checkpoint(checkpoint_path, model.store, cfg.model.hash());

    const std::vector<Prediction> preds =
        decode_dataset(model, samples, 0, cfg.eval_max_answer_len);

    EvalOutputs out;
    out.report = evaluate(preds, samples, cfg.oks_params());
    out.predictions_path = (fs::path(out_dir) / "predictions.txt").string();
    out.report_path = (fs::path(out_dir) / "report.txt").string();
    out.report_kv_path = (fs::path(out_dir) / "report.kv").string();
    write_predictions(out.predictions_path, preds);

    std::ofstream rt(out.report_path);
    if (!rt) throw IoError("cannot open " + out.report_path + " for writing");
    rt << report_table(out.report);
    std::ofstream rk(out.report_kv_path);
    if (!rk) throw IoError("cannot open " + out.report_kv_path + " for writing");
    rk << report_keyvalues(out.report);
    return out;
}

PredictOutput run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                          const std::string& image_path, const std::string& keypoint_name,
                          const std::string& marker_out_path) {
    const int kp = keypoint_index(keypoint_name);
    if (kp < 0) {
        std::string msg = "unknown keypoint '" + keypoint_name + "'; valid names are:";
        for (const auto& n : keypoint_names()) msg += "\n  " + n;
        throw DomainError(msg);
    }

    GrayImage img = read_pgm(image_path);

    Model model;
    build_model(model, cfg.model);
    load_checkpoint(checkpoint_path, model.store, cfg.model.hash());

    SkeletonSample sample;
    sample.h = img.h;
    sample.w = img.w;
    sample.image = img.pixels;

    RecordWork work;
    const DecodeResult r = decode_record(model, sample, kp, cfg.eval_max_answer_len, work);

    PredictOutput out;
    out.parsed = r.parsed;
    out.x = r.x;
    out.y = r.y;
    out.text = r.text;
    if (!marker_out_path.empty() && r.parsed) {
        draw_cross(img, r.x, r.y);
        write_pgm(marker_out_path, img);
    }
    return out;
}

}  // namespace posellm

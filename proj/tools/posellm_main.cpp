// posellm: synthetic keypoint data, training, evaluation, prediction and the
// connector ablation, wired through one command-line tool.
//
// Exit codes: 0 success, 2 validation error, 3 training abort (non-finite
// loss), 4 IO or file-integrity error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posellm/ablate.hpp"
#include "posellm/catalog.hpp"
#include "posellm/config.hpp"
#include "posellm/errors.hpp"
#include "posellm/pipeline.hpp"

namespace {

using namespace posellm;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

RunConfig load_run_config(const CommonOpts& common) {
    std::map<std::string, std::string> kv;
    if (!common.config_path.empty()) kv = read_config_file(common.config_path);
    for (const auto& o : common.overrides) apply_override(kv, o);
    return make_run_config(kv);
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    std::string cur;
    for (const char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                seeds.push_back(std::stoull(cur));
                cur.clear();
            }
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (seeds.empty()) throw ConfigError("ablate: --seeds list is empty");
    return seeds;
}

int run(int argc, char** argv) {
    CLI::App app{"language-guided keypoint localization, desk scale"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "config file (key=value lines)");
    app.add_option("--set", common.overrides, "override, e.g. --set train.lr=0.001");

    // generate
    auto* gen = app.add_subcommand("generate", "write synthetic train/val datasets");
    uint64_t gen_seed = 0;
    int gen_count = -1;
    double gen_split = -1.0;
    std::string gen_out = "out/data";
    gen->add_option("--seed", gen_seed, "base sample seed");
    gen->add_option("--count", gen_count, "total sample count");
    gen->add_option("--split-ratio", gen_split, "train fraction in (0,1]");
    gen->add_option("--out", gen_out, "output directory");
    gen->callback([&] {
        RunConfig cfg = load_run_config(common);
        if (gen_count >= 0) cfg.data_count = gen_count;
        if (gen_split >= 0.0) cfg.split_ratio = gen_split;
        cfg.finalize();
        const GenerateResult r = generate_splits(cfg, gen_seed, gen_out);
        std::printf("train=%d -> %s\nval=%d -> %s\n", r.train_count, r.train_path.c_str(),
                    r.val_count, r.val_path.c_str());
    });

    // train
    auto* tr = app.add_subcommand("train", "teacher-forced training run");
    std::string tr_data, tr_out = "out/run", tr_resume, tr_connector;
    long long tr_max_steps = -1;
    uint64_t tr_seed = 0;
    bool tr_seed_set = false;
    tr->add_option("--data", tr_data, "training records file")->required();
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--resume", tr_resume, "training state to resume from");
    tr->add_option("--max-steps", tr_max_steps, "cap on optimizer steps this call");
    tr->add_option("--connector", tr_connector, "connector mode: mlp or linear");
    tr->add_option("--seed", tr_seed, "training seed")->each([&](const std::string&) {
        tr_seed_set = true;
    });
    tr->callback([&] {
        RunConfig cfg = load_run_config(common);
        if (!tr_connector.empty()) cfg.model.conn.mode = connector_mode_from_string(tr_connector);
        if (tr_seed_set) cfg.train.seed = tr_seed;
        cfg.finalize();
        const TrainOutputs out = run_training(cfg, tr_data, tr_out, tr_resume, tr_max_steps);
        std::printf("steps=%lld initial_loss=%.6f final_loss=%.6f\ncheckpoint=%s\ncurve=%s\n",
                    out.steps, out.initial_loss, out.final_loss, out.checkpoint_path.c_str(),
                    out.curve_path.c_str());
    });

    // eval
    auto* ev = app.add_subcommand("eval", "decode a dataset and score it");
    std::string ev_ckpt, ev_data, ev_out = "out/eval";
    int ev_limit = -1;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--data", ev_data, "records file to evaluate")->required();
    ev->add_option("--out", ev_out, "output directory");
    ev->add_option("--limit", ev_limit, "evaluate only the first N samples");
    ev->callback([&] {
        RunConfig cfg = load_run_config(common);
        if (ev_limit >= 0) cfg.eval_limit = ev_limit;
        cfg.finalize();
        const EvalOutputs out = run_eval(cfg, ev_ckpt, ev_data, ev_out);
        std::fputs(report_table(out.report).c_str(), stdout);
        std::printf("predictions=%s\nreport=%s\n", out.predictions_path.c_str(),
                    out.report_path.c_str());
    });

    // predict
    auto* pr = app.add_subcommand("predict", "locate one keypoint in a PGM image");
    std::string pr_ckpt, pr_image, pr_name, pr_marker;
    pr->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
    pr->add_option("--image", pr_image, "input image (PGM)")->required();
    pr->add_option("--keypoint", pr_name, "keypoint name, e.g. 'left wrist'")->required();
    pr->add_option("--marker", pr_marker, "write the image with a cross at the prediction");
    pr->callback([&] {
        RunConfig cfg = load_run_config(common);
        cfg.finalize();
        const PredictOutput out = run_predict(cfg, pr_ckpt, pr_image, pr_name, pr_marker);
        if (out.parsed) {
            std::printf("x=%.3f y=%.3f\n", out.x, out.y);
        } else {
            std::printf("parse failure: '%s'\n", out.text.c_str());
        }
    });

    // ablate
    auto* ab = app.add_subcommand("ablate", "mlp-vs-linear connector comparison");
    std::string ab_seeds = "1,2,3";
    std::string ab_out = "out/ablate";
    bool ab_expressivity = false;
    ab->add_option("--seeds", ab_seeds, "comma-separated seed list (>= 3 for the table)");
    ab->add_option("--out", ab_out, "output directory");
    ab->add_flag("--expressivity", ab_expressivity,
                 "run the connector regression study instead of the full pipeline");
    ab->callback([&] {
        if (ab_expressivity) {
            const ExpressivityResult r = run_expressivity(ExpressivityConfig{});
            std::printf("linear_mse=%.6f mlp_mse=%.6f ratio=%.2f\n", r.linear_mse, r.mlp_mse,
                        r.ratio());
            return;
        }
        RunConfig cfg = load_run_config(common);
        cfg.finalize();
        const AblationTable table =
            run_pipeline_ablation(cfg, parse_seed_list(ab_seeds), ab_out);
        std::fputs(table.format().c_str(), stdout);
        std::ofstream tf((std::filesystem::path(ab_out) / "ablation.txt").string());
        tf << table.format();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const TrainAbort& e) {
        std::fprintf(stderr, "training aborted: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "file error: %s\n", e.what());
        return 4;
    } catch (const IntegrityError& e) {
        std::fprintf(stderr, "integrity error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        // ConfigError, DomainError, ShapeError, CapacityError and anything else
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

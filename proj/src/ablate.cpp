#include "posellm/ablate.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "posellm/connector.hpp"
#include "posellm/errors.hpp"
#include "posellm/pipeline.hpp"
#include "posellm/rng.hpp"
#include "posellm/trainer.hpp"

namespace posellm {

double linear_least_squares_mse(const std::vector<double>& x, const std::vector<double>& y,
                                int rows, int d_in, int d_out) {
    // normal equations over the bias-augmented design matrix
    const int da = d_in + 1;
    std::vector<double> xtx(static_cast<size_t>(da) * da, 0.0);
    std::vector<double> xty(static_cast<size_t>(da) * d_out, 0.0);
    auto xv = [&](int r, int c) { return c < d_in ? x[static_cast<size_t>(r) * d_in + c] : 1.0; };
    for (int r = 0; r < rows; ++r) {
        for (int i = 0; i < da; ++i) {
            const double xi = xv(r, i);
            for (int j = 0; j < da; ++j) xtx[static_cast<size_t>(i) * da + j] += xi * xv(r, j);
            for (int j = 0; j < d_out; ++j) {
                xty[static_cast<size_t>(i) * d_out + j] += xi * y[static_cast<size_t>(r) * d_out + j];
            }
        }
    }
    // Cholesky with a tiny ridge for numerical safety
    for (int i = 0; i < da; ++i) xtx[static_cast<size_t>(i) * da + i] += 1e-9;
    std::vector<double> chol(xtx);
    for (int i = 0; i < da; ++i) {
        for (int j = 0; j <= i; ++j) {
            double acc = chol[static_cast<size_t>(i) * da + j];
            for (int k = 0; k < j; ++k) {
                acc -= chol[static_cast<size_t>(i) * da + k] * chol[static_cast<size_t>(j) * da + k];
            }
            if (i == j) {
                if (acc <= 0.0) throw DomainError("least squares: matrix not positive definite");
                chol[static_cast<size_t>(i) * da + i] = std::sqrt(acc);
            } else {
                chol[static_cast<size_t>(i) * da + j] = acc / chol[static_cast<size_t>(j) * da + j];
            }
        }
    }
    // solve L L^T W = X^T Y column by column
    std::vector<double> w(static_cast<size_t>(da) * d_out, 0.0);
    std::vector<double> tmp(static_cast<size_t>(da));
    for (int c = 0; c < d_out; ++c) {
        for (int i = 0; i < da; ++i) {
            double acc = xty[static_cast<size_t>(i) * d_out + c];
            for (int k = 0; k < i; ++k) acc -= chol[static_cast<size_t>(i) * da + k] * tmp[static_cast<size_t>(k)];
            tmp[static_cast<size_t>(i)] = acc / chol[static_cast<size_t>(i) * da + i];
        }
        for (int i = da - 1; i >= 0; --i) {
            double acc = tmp[static_cast<size_t>(i)];
            for (int k = i + 1; k < da; ++k) acc -= chol[static_cast<size_t>(k) * da + i] * w[static_cast<size_t>(k) * d_out + c];
            w[static_cast<size_t>(i) * d_out + c] = acc / chol[static_cast<size_t>(i) * da + i];
        }
    }
    double mse = 0.0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d_out; ++c) {
            double pred = 0.0;
            for (int i = 0; i < da; ++i) pred += xv(r, i) * w[static_cast<size_t>(i) * d_out + c];
            const double e = pred - y[static_cast<size_t>(r) * d_out + c];
            mse += e * e;
        }
    }
    return mse / (static_cast<double>(rows) * d_out);
}

ExpressivityResult run_expressivity(const ExpressivityConfig& cfg) {
    Rng rng(cfg.seed);
    Mat x(cfg.n_tokens, cfg.d);
    for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
    Mat target(cfg.n_tokens, cfg.d);
    for (size_t i = 0; i < x.data.size(); ++i) target.data[i] = x.data[i] * x.data[i];

    ExpressivityResult result;
    result.linear_mse = linear_least_squares_mse(x.data, target.data, cfg.n_tokens, cfg.d, cfg.d);

    ConnectorConfig conn;
    conn.mode = ConnectorMode::mlp;
    conn.d_vis = cfg.d;
    conn.d_hid = cfg.d_hid;
    conn.d_out = cfg.d;
    ParamStore store;
    build_connector_params(store, conn, cfg.seed ^ 0xabcdef);
    ConnectorRefs refs = connector_refs(store, conn);

    const double denom = static_cast<double>(cfg.n_tokens) * cfg.d;
    std::vector<double> m(store.grad_size(), 0.0), v(store.grad_size(), 0.0);
    ConnectorCache cache;
    Mat pred, upstream(cfg.n_tokens, cfg.d), dx(cfg.n_tokens, cfg.d);
    double mse = 0.0;
    for (int step = 1; step <= cfg.steps; ++step) {
        connect_forward(x, refs, cache, pred);
        mse = 0.0;
        for (size_t i = 0; i < pred.data.size(); ++i) {
            const double e = pred.data[i] - target.data[i];
            upstream.data[i] = 2.0 * e / denom;
            mse += e * e;
        }
        mse /= denom;
        GradBuffer gb(store);
        dx.zero();
        connect_backward(x, refs, cache, upstream, dx, gb);
        for (auto& p : store.all()) {
            adamw_step(p.w.data.data(), gb.raw().data() + p.offset, m.data() + p.offset,
                       v.data() + p.offset, p.w.size(), step, cfg.lr, 0.0, 0.9, 0.999, 1e-8);
        }
    }
    connect_forward(x, refs, cache, pred);
    mse = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double e = pred.data[i] - target.data[i];
        mse += e * e;
    }
    result.mlp_mse = mse / denom;
    return result;
}

std::string AblationTable::format() const {
    char buf[256];
    std::string out = "connector      seed        AP   PCKh@0.5   PCKh@0.1\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-9s %9llu %9.1f %10.1f %10.1f\n", r.mode.c_str(),
                      static_cast<unsigned long long>(r.seed), r.ap, r.pckh05, r.pckh01);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-9s %9s %9.1f %10.1f\n", "mlp", "mean", mlp_mean_ap,
                  mlp_mean_pckh05);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-9s %9s %9.1f %10.1f\n", "linear", "mean", linear_mean_ap,
                  linear_mean_pckh05);
    out += buf;
    return out;
}

AblationTable run_pipeline_ablation(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                    const std::string& out_dir) {
    namespace fs = std::filesystem;
    AblationTable table;
    double ap_sum[2] = {0.0, 0.0};
    double pckh_sum[2] = {0.0, 0.0};

    for (const uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.train.seed = seed;
        cfg.model.init_seed = base.model.init_seed ^ seed;

        const std::string seed_dir = (fs::path(out_dir) / ("seed" + std::to_string(seed))).string();
        const GenerateResult data = generate_splits(cfg, seed, seed_dir);

        for (const int mode : {0, 1}) {
            cfg.model.conn.mode = mode == 0 ? ConnectorMode::mlp : ConnectorMode::linear;
            const std::string run_dir =
                (fs::path(seed_dir) / to_string(cfg.model.conn.mode)).string();
            run_training(cfg, data.train_path, run_dir);
            const EvalOutputs ev = run_eval(cfg, (fs::path(run_dir) / "model.ckpt").string(),
                                            data.val_path, run_dir);
            AblationRow row;
            row.mode = to_string(cfg.model.conn.mode);
            row.seed = seed;
            row.ap = ev.report.ap.ap;
            row.pckh05 = ev.report.pckh05.overall;
            row.pckh01 = ev.report.pckh01.overall;
            table.rows.push_back(row);
            ap_sum[mode] += row.ap;
            pckh_sum[mode] += row.pckh05;
        }
    }
    const double n = static_cast<double>(seeds.size());
    table.mlp_mean_ap = ap_sum[0] / n;
    table.linear_mean_ap = ap_sum[1] / n;
    table.mlp_mean_pckh05 = pckh_sum[0] / n;
    table.linear_mean_pckh05 = pckh_sum[1] / n;
    return table;
}

}  // namespace posellm

#include "posellm/layers.hpp"

#include <cmath>

#include "posellm/connector.hpp"
#include "posellm/errors.hpp"
#include "posellm/rng.hpp"

namespace posellm {

// ---------------------------------------------------------------------------
// LoRA
// ---------------------------------------------------------------------------

LoraPair& LoraSet::attach(ParamStore& store, const std::string& target, int r, double alpha,
                          uint64_t seed) {
    Param* base = store.find(target);
    if (base == nullptr) throw ConfigError("lora: unknown target parameter '" + target + "'");
    if (base->w.rows < 2 || base->w.cols < 1) {
        throw ConfigError("lora: target '" + target + "' is not a 2-D weight");
    }
    if (r <= 0) throw ConfigError("lora: rank must be positive");
    if (by_target_.count(target)) throw ConfigError("lora: duplicate target '" + target + "'");

    Param& a = store.add("lora." + target + ".a", r, base->w.rows, true);
    Param& b = store.add("lora." + target + ".b", base->w.cols, r, true);
    store.init_trunc_normal(a, seed, 0.02);
    // b starts at zero so the adapter path is exactly the identity

    LoraPair pair{&a, &b, r, alpha};
    return by_target_.emplace(target, pair).first->second;
}

const LoraPair* LoraSet::find(const std::string& target) const {
    auto it = by_target_.find(target);
    return it == by_target_.end() ? nullptr : &it->second;
}

std::vector<std::string> LoraSet::targets_sorted() const {
    std::vector<std::string> out;
    out.reserve(by_target_.size());
    for (const auto& [name, pair] : by_target_) out.push_back(name);
    return out;
}

void LoraSet::merge_into(ParamStore& store) const {
    for (const auto& [name, pair] : by_target_) {
        Param& base = store.get(name);
        const Mat& a = pair.a->w;  // r x d_in
        const Mat& b = pair.b->w;  // d_out x r
        const double s = pair.scale();
        // W(d_in x d_out) += s * A^T B^T
        for (int i = 0; i < base.w.rows; ++i) {
            for (int j = 0; j < base.w.cols; ++j) {
                double acc = 0.0;
                for (int t = 0; t < pair.r; ++t) acc += a.at(t, i) * b.at(j, t);
                base.w.at(i, j) += s * acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

void linear_forward(const Mat& x, const LinearRef& lin, Mat& y) {
    const Mat& w = lin.w->w;
    if (x.cols != w.rows) {
        throw ShapeError("linear: input width " + std::to_string(x.cols) + " != expected " +
                         std::to_string(w.rows));
    }
    y.rows = x.rows;
    y.cols = w.cols;
    y.data.assign(static_cast<size_t>(y.rows) * y.cols, 0.0);
    if (lin.bias != nullptr) add_row_vector(y, lin.bias->w.data.data());
    matmul_acc(x, w, y);
    if (lin.lora != nullptr) {
        const LoraPair& l = *lin.lora;
        Mat u(x.rows, l.r);  // s * x A^T
        matmul_a_bt_acc(x.data.data(), l.a->w.data.data(), u.data.data(), x.rows, x.cols, l.r);
        const double s = l.scale();
        for (double& v : u.data) v *= s;
        matmul_a_bt_acc(u.data.data(), l.b->w.data.data(), y.data.data(), u.rows, l.r, y.cols);
    }
}

void linear_backward(const Mat& x, const LinearRef& lin, const Mat& dy, Mat* dx, GradBuffer& gb) {
    const Mat& w = lin.w->w;
    if (dx != nullptr) {
        matmul_a_bt_acc(dy.data.data(), w.data.data(), dx->data.data(), dy.rows, dy.cols, w.rows);
    }
    if (double* gw = gb.slot(*lin.w)) {
        matmul_at_b_acc(x.data.data(), dy.data.data(), gw, x.rows, x.cols, dy.cols);
    }
    if (lin.bias != nullptr) {
        if (double* gbias = gb.slot(*lin.bias)) col_sums_acc(dy, gbias);
    }
    if (lin.lora != nullptr) {
        const LoraPair& l = *lin.lora;
        const double s = l.scale();
        // u = s * x A^T, v = s * dy B
        Mat u(x.rows, l.r);
        matmul_a_bt_acc(x.data.data(), l.a->w.data.data(), u.data.data(), x.rows, x.cols, l.r);
        for (double& t : u.data) t *= s;
        Mat v(dy.rows, l.r);
        matmul_acc(dy.data.data(), l.b->w.data.data(), v.data.data(), dy.rows, dy.cols, l.r);
        for (double& t : v.data) t *= s;

        if (double* gb_b = gb.slot(*l.b)) {
            // dB = dy^T u / s * s = dy^T (x A^T) * s; u already carries s
            matmul_at_b_acc(dy.data.data(), u.data.data(), gb_b, dy.rows, dy.cols, l.r);
        }
        if (double* gb_a = gb.slot(*l.a)) {
            // dA = (s dy B)^T x; v carries s
            matmul_at_b_acc(v.data.data(), x.data.data(), gb_a, v.rows, l.r, x.cols);
        }
        if (dx != nullptr) {
            matmul_acc(v.data.data(), l.a->w.data.data(), dx->data.data(), v.rows, l.r, x.cols);
        }
    }
}

// ---------------------------------------------------------------------------
// layer norm
// ---------------------------------------------------------------------------

void layer_norm_forward(const Mat& x, const LayerNormRef& ln, LayerNormCache& cache, Mat& y) {
    const int d = x.cols;
    cache.xhat = Mat(x.rows, d);
    cache.rstd.assign(static_cast<size_t>(x.rows), 0.0);
    y.rows = x.rows;
    y.cols = d;
    y.data.resize(x.size());
    const double* g = ln.gain->w.data.data();
    const double* b = ln.bias->w.data.data();
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xi[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.rstd[static_cast<size_t>(i)] = rstd;
        double* xh = cache.xhat.row(i);
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * rstd;
            yi[j] = xh[j] * g[j] + b[j];
        }
    }
}

void layer_norm_backward(const LayerNormRef& ln, const LayerNormCache& cache, const Mat& dy,
                         Mat& dx_acc, GradBuffer& gb) {
    const int d = dy.cols;
    const double* g = ln.gain->w.data.data();
    double* ggain = gb.slot(*ln.gain);
    double* gbias = gb.slot(*ln.bias);
    for (int i = 0; i < dy.rows; ++i) {
        const double* dyi = dy.row(i);
        const double* xh = cache.xhat.row(i);
        const double rstd = cache.rstd[static_cast<size_t>(i)];
        double sum_dg = 0.0, sum_dgx = 0.0;
        for (int j = 0; j < d; ++j) {
            const double dg = dyi[j] * g[j];
            sum_dg += dg;
            sum_dgx += dg * xh[j];
        }
        const double inv_d = 1.0 / d;
        double* dxi = dx_acc.row(i);
        for (int j = 0; j < d; ++j) {
            const double dg = dyi[j] * g[j];
            dxi[j] += rstd * (dg - inv_d * sum_dg - xh[j] * inv_d * sum_dgx);
        }
        if (ggain != nullptr) {
            for (int j = 0; j < d; ++j) ggain[j] += dyi[j] * xh[j];
        }
        if (gbias != nullptr) {
            for (int j = 0; j < d; ++j) gbias[j] += dyi[j];
        }
    }
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

void attention_forward(const Mat& x, const AttnRef& attn, bool causal, AttnCache& cache, Mat& y) {
    const int S = x.rows;
    const int d = x.cols;
    const int nh = attn.heads;
    const int dh = d / nh;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    linear_forward(x, attn.q, cache.q);
    linear_forward(x, attn.k, cache.k);
    linear_forward(x, attn.v, cache.v);

    cache.probs = Mat(nh * S, S);
    cache.ctx = Mat(S, d);

    for (int h = 0; h < nh; ++h) {
        const int off = h * dh;
        for (int i = 0; i < S; ++i) {
            const int jmax = causal ? i : S - 1;
            const double* qi = cache.q.row(i) + off;
            double* prow = cache.probs.row(h * S + i);
            double maxv = -1e300;
            for (int j = 0; j <= jmax; ++j) {
                const double* kj = cache.k.row(j) + off;
                double acc = 0.0;
                for (int t = 0; t < dh; ++t) acc += qi[t] * kj[t];
                acc *= inv_sqrt_dh;
                prow[j] = acc;
                if (acc > maxv) maxv = acc;
            }
            double z = 0.0;
            for (int j = 0; j <= jmax; ++j) {
                prow[j] = std::exp(prow[j] - maxv);
                z += prow[j];
            }
            const double inv_z = 1.0 / z;
            for (int j = 0; j <= jmax; ++j) prow[j] *= inv_z;

            double* ci = cache.ctx.row(i) + off;
            for (int j = 0; j <= jmax; ++j) {
                const double p = prow[j];
                const double* vj = cache.v.row(j) + off;
                for (int t = 0; t < dh; ++t) ci[t] += p * vj[t];
            }
        }
    }
    linear_forward(cache.ctx, attn.o, y);
}

void attention_backward(const Mat& x, const AttnRef& attn, bool causal, const AttnCache& cache,
                        const Mat& dy, Mat& dx_acc, GradBuffer& gb) {
    const int S = x.rows;
    const int d = x.cols;
    const int nh = attn.heads;
    const int dh = d / nh;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dctx(S, d);
    linear_backward(cache.ctx, attn.o, dy, &dctx, gb);

    Mat dq(S, d), dk(S, d), dv(S, d);
    std::vector<double> dprobs(static_cast<size_t>(S));
    for (int h = 0; h < nh; ++h) {
        const int off = h * dh;
        for (int i = 0; i < S; ++i) {
            const int jmax = causal ? i : S - 1;
            const double* prow = cache.probs.row(h * S + i);
            const double* dci = dctx.row(i) + off;

            // dprobs_j = <dctx_i, v_j>, dv_j += p_ij dctx_i
            for (int j = 0; j <= jmax; ++j) {
                const double* vj = cache.v.row(j) + off;
                double acc = 0.0;
                for (int t = 0; t < dh; ++t) acc += dci[t] * vj[t];
                dprobs[static_cast<size_t>(j)] = acc;
                const double p = prow[j];
                double* dvj = dv.row(j) + off;
                for (int t = 0; t < dh; ++t) dvj[t] += p * dci[t];
            }
            // softmax jacobian
            double dot = 0.0;
            for (int j = 0; j <= jmax; ++j) dot += prow[j] * dprobs[static_cast<size_t>(j)];
            // dscore_j = p_j (dprobs_j - dot); fold in the 1/sqrt(dh) scale
            const double* qi = cache.q.row(i) + off;
            double* dqi = dq.row(i) + off;
            for (int j = 0; j <= jmax; ++j) {
                const double ds = prow[j] * (dprobs[static_cast<size_t>(j)] - dot) * inv_sqrt_dh;
                if (ds == 0.0) continue;
                const double* kj = cache.k.row(j) + off;
                double* dkj = dk.row(j) + off;
                for (int t = 0; t < dh; ++t) {
                    dqi[t] += ds * kj[t];
                    dkj[t] += ds * qi[t];
                }
            }
        }
    }
    linear_backward(x, attn.q, dq, &dx_acc, gb);
    linear_backward(x, attn.k, dk, &dx_acc, gb);
    linear_backward(x, attn.v, dv, &dx_acc, gb);
}

// ---------------------------------------------------------------------------
// mlp
// ---------------------------------------------------------------------------

void mlp_forward(const Mat& x, const MlpRef& mlp, MlpCache& cache, Mat& y) {
    linear_forward(x, mlp.fc1, cache.mid);
    cache.act = cache.mid;
    for (double& v : cache.act.data) v = gelu(v);
    linear_forward(cache.act, mlp.fc2, y);
}

void mlp_backward(const Mat& x, const MlpRef& mlp, const MlpCache& cache, const Mat& dy,
                  Mat& dx_acc, GradBuffer& gb) {
    Mat dact(cache.act.rows, cache.act.cols);
    linear_backward(cache.act, mlp.fc2, dy, &dact, gb);
    for (size_t i = 0; i < dact.data.size(); ++i) {
        dact.data[i] *= gelu_grad(cache.mid.data[i]);
    }
    linear_backward(x, mlp.fc1, dact, &dx_acc, gb);
}

// ---------------------------------------------------------------------------
// block
// ---------------------------------------------------------------------------

void block_forward(Mat& x, const BlockRef& blk, bool causal, BlockCache& cache) {
    layer_norm_forward(x, blk.ln1, cache.ln1, cache.h1);
    Mat branch;
    attention_forward(cache.h1, blk.attn, causal, cache.attn, branch);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += branch.data[i];

    layer_norm_forward(x, blk.ln2, cache.ln2, cache.h2);
    mlp_forward(cache.h2, blk.mlp, cache.mlp, branch);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += branch.data[i];
}

void block_backward(Mat& dx, const BlockRef& blk, bool causal, const BlockCache& cache,
                    GradBuffer& gb) {
    // x2 = x1 + mlp(ln2(x1)); x1 = x0 + attn(ln1(x0))
    Mat dh2(dx.rows, dx.cols);
    mlp_backward(cache.h2, blk.mlp, cache.mlp, dx, dh2, gb);
    layer_norm_backward(blk.ln2, cache.ln2, dh2, dx, gb);

    Mat dh1(dx.rows, dx.cols);
    attention_backward(cache.h1, blk.attn, causal, cache.attn, dx, dh1, gb);
    layer_norm_backward(blk.ln1, cache.ln1, dh1, dx, gb);
}

void build_block_params(ParamStore& store, const std::string& prefix, int d, int mlp_ratio,
                        uint64_t seed) {
    auto add_weight = [&](const std::string& name, int r, int c) {
        Param& p = store.add(name, r, c);
        store.init_trunc_normal(p, seed, 0.02);
    };
    auto add_zero = [&](const std::string& name, int c) { store.add(name, 1, c); };
    auto add_ones = [&](const std::string& name, int c) {
        Param& p = store.add(name, 1, c);
        std::fill(p.w.data.begin(), p.w.data.end(), 1.0);
    };

    add_ones(prefix + ".ln1.g", d);
    add_zero(prefix + ".ln1.b", d);
    add_weight(prefix + ".attn.wq", d, d);
    add_zero(prefix + ".attn.bq", d);
    add_weight(prefix + ".attn.wk", d, d);
    add_zero(prefix + ".attn.bk", d);
    add_weight(prefix + ".attn.wv", d, d);
    add_zero(prefix + ".attn.bv", d);
    add_weight(prefix + ".attn.wo", d, d);
    add_zero(prefix + ".attn.bo", d);
    add_ones(prefix + ".ln2.g", d);
    add_zero(prefix + ".ln2.b", d);
    const int dh = d * mlp_ratio;
    add_weight(prefix + ".mlp.w1", d, dh);
    add_zero(prefix + ".mlp.b1", dh);
    add_weight(prefix + ".mlp.w2", dh, d);
    add_zero(prefix + ".mlp.b2", d);
}

BlockRef make_block_ref(ParamStore& store, const LoraSet& lora, const std::string& prefix,
                        int heads) {
    BlockRef blk;
    blk.ln1 = {&store.get(prefix + ".ln1.g"), &store.get(prefix + ".ln1.b")};
    blk.attn.q = {&store.get(prefix + ".attn.wq"), &store.get(prefix + ".attn.bq"),
                  lora.find(prefix + ".attn.wq")};
    blk.attn.k = {&store.get(prefix + ".attn.wk"), &store.get(prefix + ".attn.bk"),
                  lora.find(prefix + ".attn.wk")};
    blk.attn.v = {&store.get(prefix + ".attn.wv"), &store.get(prefix + ".attn.bv"),
                  lora.find(prefix + ".attn.wv")};
    blk.attn.o = {&store.get(prefix + ".attn.wo"), &store.get(prefix + ".attn.bo"),
                  lora.find(prefix + ".attn.wo")};
    blk.attn.heads = heads;
    blk.ln2 = {&store.get(prefix + ".ln2.g"), &store.get(prefix + ".ln2.b")};
    blk.mlp.fc1 = {&store.get(prefix + ".mlp.w1"), &store.get(prefix + ".mlp.b1"), nullptr};
    blk.mlp.fc2 = {&store.get(prefix + ".mlp.w2"), &store.get(prefix + ".mlp.b2"), nullptr};
    return blk;
}

}  // namespace posellm

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "posellm/encoder.hpp"
#include "posellm/errors.hpp"
#include "posellm/rng.hpp"
#include "test_util.hpp"

using namespace posellm;

namespace {

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

struct BuiltEncoder {
    ParamStore store;
    LoraSet lora;
    EncoderRefs refs;
    EncoderConfig cfg;
};

BuiltEncoder make_encoder(EncoderConfig cfg, uint64_t seed) {
    BuiltEncoder be;
    be.cfg = cfg;
    build_encoder_params(be.store, cfg, seed);
    be.refs = encoder_refs(be.store, be.lora, cfg);
    return be;
}

std::vector<double> random_image(int size, uint64_t seed, bool binary = false) {
    std::vector<double> img(static_cast<size_t>(size) * size);
    Rng rng(seed);
    for (double& v : img) v = binary ? (rng.uniform() < 0.2 ? 1.0 : 0.0) : rng.uniform();
    return img;
}

// ---------------------------------------------------------------------------
// plain re-implementation of the same equations, scalar loops throughout
// ---------------------------------------------------------------------------

std::vector<double> naive_layernorm(const std::vector<double>& x, int rows, int d,
                                    const double* g, const double* b) {
    std::vector<double> y(x.size());
    for (int i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x[static_cast<size_t>(i) * d + j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x[static_cast<size_t>(i) * d + j] - mean;
            var += c * c;
        }
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + 1e-5);
        for (int j = 0; j < d; ++j) {
            y[static_cast<size_t>(i) * d + j] =
                (x[static_cast<size_t>(i) * d + j] - mean) * rstd * g[j] + b[j];
        }
    }
    return y;
}

std::vector<double> naive_linear(const std::vector<double>& x, int rows, int d_in,
                                 const Mat& w, const Mat& bias) {
    std::vector<double> y(static_cast<size_t>(rows) * w.cols);
    for (int i = 0; i < rows; ++i) {
        for (int o = 0; o < w.cols; ++o) {
            double acc = bias.at(0, o);
            for (int j = 0; j < d_in; ++j) acc += x[static_cast<size_t>(i) * d_in + j] * w.at(j, o);
            y[static_cast<size_t>(i) * w.cols + o] = acc;
        }
    }
    return y;
}

std::vector<double> naive_encoder(const std::vector<double>& image, const EncoderConfig& cfg,
                                  ParamStore& store) {
    const int g = cfg.image_size / cfg.patch_size;
    const int p = cfg.patch_size;
    const int n = g * g;
    const int d = cfg.d_vis;

    // patch extraction + projection + positions
    const Mat& pw = store.get("enc.patch.w").w;
    const Mat& pb = store.get("enc.patch.b").w;
    const Mat& pos = store.get("enc.pos").w;
    std::vector<double> x(static_cast<size_t>(n) * d, 0.0);
    for (int py = 0; py < g; ++py) {
        for (int px = 0; px < g; ++px) {
            const int tok = py * g + px;
            for (int o = 0; o < d; ++o) {
                double acc = pb.at(0, o);
                for (int yy = 0; yy < p; ++yy) {
                    for (int xx = 0; xx < p; ++xx) {
                        const double pix =
                            image[static_cast<size_t>(py * p + yy) * cfg.image_size + px * p + xx];
                        acc += pix * pw.at(yy * p + xx, o);
                    }
                }
                x[static_cast<size_t>(tok) * d + o] = acc + pos.at(tok, o);
            }
        }
    }

    const int dh = d / cfg.heads;
    for (int blk = 0; blk < cfg.depth; ++blk) {
        const std::string pre = "enc.block" + std::to_string(blk);
        const std::vector<double> h1 =
            naive_layernorm(x, n, d, store.get(pre + ".ln1.g").w.data.data(),
                            store.get(pre + ".ln1.b").w.data.data());
        const std::vector<double> q =
            naive_linear(h1, n, d, store.get(pre + ".attn.wq").w, store.get(pre + ".attn.bq").w);
        const std::vector<double> k =
            naive_linear(h1, n, d, store.get(pre + ".attn.wk").w, store.get(pre + ".attn.bk").w);
        const std::vector<double> v =
            naive_linear(h1, n, d, store.get(pre + ".attn.wv").w, store.get(pre + ".attn.bv").w);
        std::vector<double> ctx(static_cast<size_t>(n) * d, 0.0);
        for (int head = 0; head < cfg.heads; ++head) {
            const int off = head * dh;
            for (int i = 0; i < n; ++i) {
                std::vector<double> scores(static_cast<size_t>(n));
                double maxv = -1e300;
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < dh; ++t) {
                        acc += q[static_cast<size_t>(i) * d + off + t] *
                               k[static_cast<size_t>(j) * d + off + t];
                    }
                    scores[static_cast<size_t>(j)] = acc / std::sqrt(static_cast<double>(dh));
                    maxv = std::max(maxv, scores[static_cast<size_t>(j)]);
                }
                double z = 0.0;
                for (int j = 0; j < n; ++j) {
                    scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - maxv);
                    z += scores[static_cast<size_t>(j)];
                }
                for (int j = 0; j < n; ++j) {
                    const double prob = scores[static_cast<size_t>(j)] / z;
                    for (int t = 0; t < dh; ++t) {
                        ctx[static_cast<size_t>(i) * d + off + t] +=
                            prob * v[static_cast<size_t>(j) * d + off + t];
                    }
                }
            }
        }
        const std::vector<double> attn_out =
            naive_linear(ctx, n, d, store.get(pre + ".attn.wo").w, store.get(pre + ".attn.bo").w);
        for (size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];

        const std::vector<double> h2 =
            naive_layernorm(x, n, d, store.get(pre + ".ln2.g").w.data.data(),
                            store.get(pre + ".ln2.b").w.data.data());
        std::vector<double> mid = naive_linear(h2, n, d, store.get(pre + ".mlp.w1").w,
                                               store.get(pre + ".mlp.b1").w);
        for (double& t : mid) t = gelu_ref(t);
        const std::vector<double> out = naive_linear(mid, n, d * cfg.mlp_ratio,
                                                     store.get(pre + ".mlp.w2").w,
                                                     store.get(pre + ".mlp.b2").w);
        for (size_t i = 0; i < x.size(); ++i) x[i] += out[i];
    }
    return x;
}

}  // namespace

TEST_CASE("token count follows the patch grid") {
    EncoderConfig cfg{64, 8, 0, 16, 4, 4};
    BuiltEncoder be = make_encoder(cfg, 1);
    CHECK(cfg.tokens() == 64);
    for (int b = 0; b < 2; ++b) {
        const std::vector<double> img = random_image(64, 10 + static_cast<uint64_t>(b));
        EncoderCache cache;
        Mat tokens;
        encode_forward(img.data(), 64, 64, cfg, be.refs, cache, tokens);
        CHECK(tokens.rows == 64);
        CHECK(tokens.cols == 16);
    }
}

TEST_CASE("depth 0 on a zero image with zero bias yields the positional table") {
    EncoderConfig cfg{32, 8, 0, 12, 4, 4};
    BuiltEncoder be = make_encoder(cfg, 2);
    be.refs.patch_b->w.zero();
    const std::vector<double> img(32 * 32, 0.0);
    EncoderCache cache;
    Mat tokens;
    encode_forward(img.data(), 32, 32, cfg, be.refs, cache, tokens);
    CHECK(tokens.data == be.refs.pos->w.data);
}

TEST_CASE("shape errors name expected and actual") {
    EncoderConfig cfg{32, 8, 0, 12, 4, 4};
    BuiltEncoder be = make_encoder(cfg, 3);
    const std::vector<double> img(24 * 24, 0.0);
    EncoderCache cache;
    Mat tokens;
    CHECK_THROWS_WITH_AS(encode_forward(img.data(), 24, 24, cfg, be.refs, cache, tokens),
                         doctest::Contains("32"), ShapeError);
}

TEST_CASE("config invariants are enforced") {
    EncoderConfig bad{60, 8, 2, 64, 4, 4};  // 60 % 8 != 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    EncoderConfig bad2{64, 8, 2, 62, 4, 4};  // 62 % 4 != 0
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("depth-2 forward matches the scalar re-implementation") {
    EncoderConfig cfg{32, 8, 2, 24, 4, 2};
    BuiltEncoder be = make_encoder(cfg, 99);
    const std::vector<double> img = random_image(32, 5);

    EncoderCache cache;
    Mat tokens;
    encode_forward(img.data(), 32, 32, cfg, be.refs, cache, tokens);
    const std::vector<double> expect = naive_encoder(img, cfg, be.store);

    REQUIRE(tokens.size() == expect.size());
    double worst = 0.0;
    for (size_t i = 0; i < expect.size(); ++i) {
        const double denom = std::max({std::fabs(expect[i]), std::fabs(tokens.data[i]), 1e-9});
        worst = std::max(worst, std::fabs(expect[i] - tokens.data[i]) / denom);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("translating by one patch stride permutes patch embeddings exactly") {
    EncoderConfig cfg{64, 8, 0, 16, 4, 4};
    BuiltEncoder be = make_encoder(cfg, 7);
    const int g = cfg.grid();

    const std::vector<double> base = random_image(64, 21, /*binary=*/true);
    std::vector<double> shifted(base.size(), 0.0);
    for (int y = 0; y < 64; ++y) {
        for (int x = cfg.patch_size; x < 64; ++x) {
            shifted[static_cast<size_t>(y) * 64 + x] =
                base[static_cast<size_t>(y) * 64 + x - cfg.patch_size];
        }
    }

    Mat ta, tb;
    patch_embedding(base.data(), 64, 64, cfg, be.refs, ta);
    patch_embedding(shifted.data(), 64, 64, cfg, be.refs, tb);
    for (int py = 0; py < g; ++py) {
        for (int px = 1; px < g; ++px) {
            const int to = py * g + px;
            const int from = py * g + px - 1;
            for (int j = 0; j < cfg.d_vis; ++j) {
                CHECK(tb.at(to, j) == ta.at(from, j));
            }
        }
    }
}

TEST_CASE("parameter listing is stable, addressable and countable") {
    EncoderConfig cfg{16, 4, 1, 16, 4, 4};
    BuiltEncoder be = make_encoder(cfg, 11);
    const auto params = encoder_parameters(be.store);

    int wq_entries = 0;
    bool sorted = true;
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].first.find("block0.attn.wq") != std::string::npos) ++wq_entries;
        if (i > 0 && params[i].first < params[i - 1].first) sorted = false;
    }
    CHECK(wq_entries == 1);
    CHECK(sorted);

    // second build gives the identical listing
    BuiltEncoder be2 = make_encoder(cfg, 11);
    CHECK(encoder_parameters(be2.store) == params);

    size_t enumerated = 0;
    for (const auto& [name, shape] : params) {
        enumerated += static_cast<size_t>(shape.first) * static_cast<size_t>(shape.second);
    }
    CHECK(enumerated == encoder_parameter_count(cfg));
}

TEST_CASE("analytic gradients match finite differences (depth 1)") {
    EncoderConfig cfg{16, 4, 1, 16, 4, 2};
    BuiltEncoder be = make_encoder(cfg, 55);
    const std::vector<double> img = random_image(16, 3);
    const Mat probe = [] {
        Mat m(16, 16);
        Rng rng(77);
        for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
        return m;
    }();

    auto loss = [&]() {
        EncoderCache cache;
        Mat tokens;
        encode_forward(img.data(), 16, 16, cfg, be.refs, cache, tokens);
        double acc = 0.0;
        for (size_t i = 0; i < tokens.data.size(); ++i) acc += tokens.data[i] * probe.data[i];
        return acc;
    };

    EncoderCache cache;
    Mat tokens;
    encode_forward(img.data(), 16, 16, cfg, be.refs, cache, tokens);
    GradBuffer gb(be.store, /*include_frozen=*/true);
    encode_backward(cfg, be.refs, cache, probe, gb);

    CHECK(testutil::fd_max_rel_err(be.store, loss, gb, 1e-5) < 1e-4);
}

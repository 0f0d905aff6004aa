#include "posellm/connector.hpp"

#include <cmath>

#include "posellm/errors.hpp"
#include "posellm/layers.hpp"
#include "posellm/rng.hpp"

namespace posellm {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double gelu(double x) {
    // Phi(x) = 0.5 erfc(-x / sqrt(2)); exact form, no tanh approximation
    return x * 0.5 * std::erfc(-x * kInvSqrt2);
}

double gelu_grad(double x) {
    const double phi = 0.5 * std::erfc(-x * kInvSqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return phi + x * pdf;
}

ConnectorMode connector_mode_from_string(const std::string& s) {
    if (s == "mlp") return ConnectorMode::mlp;
    if (s == "linear") return ConnectorMode::linear;
    throw ConfigError("connector mode must be 'mlp' or 'linear', got '" + s + "'");
}

std::string to_string(ConnectorMode m) {
    return m == ConnectorMode::mlp ? "mlp" : "linear";
}

void ConnectorConfig::validate() const {
    if (d_vis <= 0 || d_out <= 0) throw ConfigError("connector: widths must be positive");
    if (mode == ConnectorMode::mlp && d_hid <= 0) {
        throw ConfigError("connector: d_hid must be positive in mlp mode");
    }
}

void build_connector_params(ParamStore& store, const ConnectorConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (cfg.mode == ConnectorMode::mlp) {
        Param& w1 = store.add("conn.w1", cfg.d_vis, cfg.d_hid, true);
        store.add("conn.b1", 1, cfg.d_hid, true);
        Param& w2 = store.add("conn.w2", cfg.d_hid, cfg.d_out, true);
        store.add("conn.b2", 1, cfg.d_out, true);
        store.init_trunc_normal(w1, seed, 0.02);
        store.init_trunc_normal(w2, seed, 0.02);
    } else {
        Param& w = store.add("conn.w", cfg.d_vis, cfg.d_out, true);
        store.add("conn.b", 1, cfg.d_out, true);
        store.init_trunc_normal(w, seed, 0.02);
    }
}

ConnectorRefs connector_refs(ParamStore& store, const ConnectorConfig& cfg) {
    ConnectorRefs refs;
    refs.mode = cfg.mode;
    if (cfg.mode == ConnectorMode::mlp) {
        refs.w1 = &store.get("conn.w1");
        refs.b1 = &store.get("conn.b1");
        refs.w2 = &store.get("conn.w2");
        refs.b2 = &store.get("conn.b2");
    } else {
        refs.w = &store.get("conn.w");
        refs.b = &store.get("conn.b");
    }
    return refs;
}

void connect_forward(const Mat& tokens, const ConnectorRefs& refs, ConnectorCache& cache,
                     Mat& out) {
    if (refs.mode == ConnectorMode::mlp) {
        const LinearRef fc1{refs.w1, refs.b1, nullptr};
        const LinearRef fc2{refs.w2, refs.b2, nullptr};
        linear_forward(tokens, fc1, cache.mid);
        Mat act = cache.mid;
        for (double& v : act.data) v = gelu(v);
        linear_forward(act, fc2, out);
    } else {
        const LinearRef fc{refs.w, refs.b, nullptr};
        linear_forward(tokens, fc, out);
    }
}

void connect_backward(const Mat& tokens, const ConnectorRefs& refs, const ConnectorCache& cache,
                      const Mat& upstream, Mat& d_tokens, GradBuffer& gb) {
    if (refs.mode == ConnectorMode::mlp) {
        const LinearRef fc1{refs.w1, refs.b1, nullptr};
        const LinearRef fc2{refs.w2, refs.b2, nullptr};
        Mat act = cache.mid;
        for (double& v : act.data) v = gelu(v);
        Mat dact(act.rows, act.cols);
        linear_backward(act, fc2, upstream, &dact, gb);
        for (size_t i = 0; i < dact.data.size(); ++i) {
            dact.data[i] *= gelu_grad(cache.mid.data[i]);
        }
        linear_backward(tokens, fc1, dact, &d_tokens, gb);
    } else {
        const LinearRef fc{refs.w, refs.b, nullptr};
        linear_backward(tokens, fc, upstream, &d_tokens, gb);
    }
}

}  // namespace posellm

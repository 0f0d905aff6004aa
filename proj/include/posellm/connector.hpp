#pragma once

#include <cstdint>
#include <string>

#include "posellm/params.hpp"
#include "posellm/tensor.hpp"

namespace posellm {

// Exact GELU, x * Phi(x) with Phi the standard normal CDF (erfc-based).
double gelu(double x);
double gelu_grad(double x);

enum class ConnectorMode { mlp, linear };

ConnectorMode connector_mode_from_string(const std::string& s);  // ConfigError on other input
std::string to_string(ConnectorMode m);

struct ConnectorConfig {
    ConnectorMode mode = ConnectorMode::mlp;
    int d_vis = 64;
    int d_hid = 256;  // mlp mode only
    int d_out = 64;

    void validate() const;
};

// Parameter names: conn.w1/b1/w2/b2 in mlp mode, conn.w/b in linear mode.
// The connector is always fully trainable.
void build_connector_params(ParamStore& store, const ConnectorConfig& cfg, uint64_t seed);

struct ConnectorRefs {
    ConnectorMode mode{ConnectorMode::mlp};
    Param* w1{nullptr};
    Param* b1{nullptr};
    Param* w2{nullptr};
    Param* b2{nullptr};
    Param* w{nullptr};
    Param* b{nullptr};
};

ConnectorRefs connector_refs(ParamStore& store, const ConnectorConfig& cfg);

struct ConnectorCache {
    Mat mid;  // pre-activation hidden, tokens x d_hid (mlp mode)
};

// tokens: N x d_vis -> out: N x d_out, applied tokenwise.
// Throws ShapeError when tokens.cols does not match the connector input width.
void connect_forward(const Mat& tokens, const ConnectorRefs& refs, ConnectorCache& cache, Mat& out);

// Accumulates d_tokens (N x d_vis) and parameter gradients for `upstream`
// (N x d_out). `tokens` must be the forward input, `cache` its cache.
void connect_backward(const Mat& tokens, const ConnectorRefs& refs, const ConnectorCache& cache,
                      const Mat& upstream, Mat& d_tokens, GradBuffer& gb);

}  // namespace posellm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posellm/config.hpp"

namespace posellm {

// Connector expressivity study: regress targets requiring a nonlinear
// visual-text fusion (elementwise square of the features) with (a) the
// closed-form optimal linear map and (b) the trained two-layer connector.
struct ExpressivityConfig {
    int d = 8;          // d_vis == d_out
    int d_hid = 32;
    int n_tokens = 1024;
    int steps = 4000;
    double lr = 3e-3;
    uint64_t seed = 7;
};

struct ExpressivityResult {
    double linear_mse{0.0};  // least-squares optimum, bias included
    double mlp_mse{0.0};     // after training
    double ratio() const { return mlp_mse > 0.0 ? linear_mse / mlp_mse : 1e300; }
};

ExpressivityResult run_expressivity(const ExpressivityConfig& cfg);

// Least squares fit y ~ x W + b over rows; returns the achieved MSE.
// Exposed for tests (the linear side of the dual-route check).
double linear_least_squares_mse(const std::vector<double>& x, const std::vector<double>& y,
                                int rows, int d_in, int d_out);

// Full-pipeline ablation: per seed, generate data, train both connector
// modes on identical records, evaluate, tabulate.
struct AblationRow {
    std::string mode;
    uint64_t seed{0};
    double ap{0.0};
    double pckh05{0.0};
    double pckh01{0.0};
};

struct AblationTable {
    std::vector<AblationRow> rows;
    double mlp_mean_ap{0.0};
    double linear_mean_ap{0.0};
    double mlp_mean_pckh05{0.0};
    double linear_mean_pckh05{0.0};

    std::string format() const;
};

AblationTable run_pipeline_ablation(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                    const std::string& out_dir);

}  // namespace posellm

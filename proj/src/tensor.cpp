#include "posellm/tensor.hpp"

#include <cmath>

namespace posellm {

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                ci[j] += aip * bp[j];
            }
        }
    }
}

void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    // c(k x n) += a(m x k)^T b(m x n)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        const double* bi = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            double* cp = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                cp[j] += aip * bi[j];
            }
        }
    }
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    // c(m x n) += a(m x k) b(n x k)^T
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            ci[j] += acc;
        }
    }
}

void add_row_vector(Mat& m, const double* v) {
    for (int i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) r[j] += v[j];
    }
}

void col_sums_acc(const Mat& m, double* out) {
    for (int i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) out[j] += r[j];
    }
}

bool all_finite(const double* v, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

bool all_finite(const Mat& m) { return all_finite(m.data.data(), m.size()); }

}  // namespace posellm

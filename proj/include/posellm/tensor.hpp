#pragma once

#include <cstddef>
#include <vector>

namespace posellm {

// Row-major dense matrix of doubles. Vectors are 1 x n.
struct Mat {
    int rows{0};
    int cols{0};
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// C(MxN) += A(MxK) * B(KxN)
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C(KxN) += A(MxK)^T * B(MxN)      -- dW = X^T dY
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C(MxN) += A(MxK) * B(NxK)^T      -- dX = dY W^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n);

inline void matmul_acc(const Mat& a, const Mat& b, Mat& c) {
    matmul_acc(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols);
}

void add_row_vector(Mat& m, const double* v);       // each row += v
void col_sums_acc(const Mat& m, double* out);       // out[j] += sum_i m(i,j)

bool all_finite(const double* v, size_t n);
bool all_finite(const Mat& m);

}  // namespace posellm

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ncd/error.hpp"

namespace ncd {

// Dense row-major float32 matrix. All heavier kernels accumulate in double
// and round once on store.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    float& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    float* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const float* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix row(std::size_t i) const;
    void set_row(std::size_t i, const Matrix& r);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

void ensure_finite(const Matrix& m, const std::string& context);
void ensure_same_shape(const Matrix& a, const Matrix& b, const std::string& context);

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
void add_in_place(Matrix& a, const Matrix& b);

// Adds row vector `r` (1 x cols) to every row of `a`.
Matrix add_row_broadcast(const Matrix& a, const Matrix& r);
// Column sums as a 1 x cols matrix.
Matrix col_sum(const Matrix& a);

// target <- m * target + (1 - m) * source, elementwise.
void ema_matrix(Matrix& target, const Matrix& source, double momentum);

double l2_norm(const float* v, std::size_t n);
double dot(const float* a, const float* b, std::size_t n);

// Unit vector with the direction of v; throws ZeroVector when ||v|| < 1e-12.
std::vector<float> l2_normalize(const std::vector<float>& v);
// Normalizes every row of m in place; throws ZeroVector on degenerate rows.
void l2_normalize_rows(Matrix& m);

// Entry (i, j) = cos angle between row i of A and row j of B, clamped to [-1, 1].
Matrix pairwise_cosine(const Matrix& a, const Matrix& b);

// Max-subtracted softmax of logits / temperature.
std::vector<float> softmax(const std::vector<float>& logits, double temperature);
// Row-wise softmax with temperature.
Matrix softmax_rows(const Matrix& logits, double temperature);

// Row-wise log-softmax (temperature 1), computed via logsumexp in double.
Matrix log_softmax_rows(const Matrix& logits);

double frobenius_norm(const Matrix& m);
std::size_t argmax_row(const Matrix& m, std::size_t i);

} // namespace ncd

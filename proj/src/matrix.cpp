#include "ncd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ncd {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeMismatch("Matrix: data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::row(std::size_t i) const {
    Matrix r(1, cols_);
    std::copy(row_ptr(i), row_ptr(i) + cols_, r.row_ptr(0));
    return r;
}

void Matrix::set_row(std::size_t i, const Matrix& r) {
    if (r.cols() != cols_ || r.rows() != 1) {
        throw ShapeMismatch("set_row: row shape mismatch");
    }
    std::copy(r.row_ptr(0), r.row_ptr(0) + cols_, row_ptr(i));
}

void ensure_finite(const Matrix& m, const std::string& context) {
    for (float x : m.data()) {
        if (!std::isfinite(x)) {
            throw NonFinite(context + ": non-finite entry");
        }
    }
}

void ensure_same_shape(const Matrix& a, const Matrix& b, const std::string& context) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(context + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()));
    }
    Matrix c(a.rows(), b.cols());
    std::vector<double> acc(b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const float* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                acc[j] += aik * static_cast<double>(brow[j]);
            }
        }
        float* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            crow[j] = static_cast<float>(acc[j]);
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeMismatch("matmul_nt: inner dims " + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const float* arow = a.row_ptr(i);
        float* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            crow[j] = static_cast<float>(dot(arow, b.row_ptr(j), a.cols()));
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeMismatch("matmul_tn: inner dims " + std::to_string(a.rows()) + " vs " +
                            std::to_string(b.rows()));
    }
    std::vector<double> acc(a.cols() * b.cols(), 0.0);
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const float* arow = a.row_ptr(k);
        const float* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            double* accrow = acc.data() + i * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                accrow[j] += aki * static_cast<double>(brow[j]);
            }
        }
    }
    Matrix c(a.cols(), b.cols());
    for (std::size_t t = 0; t < acc.size(); ++t) {
        c.data()[t] = static_cast<float>(acc[t]);
    }
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    ensure_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t t = 0; t < c.size(); ++t) c.data()[t] += b.data()[t];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    ensure_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t t = 0; t < c.size(); ++t) c.data()[t] -= b.data()[t];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (float& x : c.data()) x = static_cast<float>(x * s);
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    ensure_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t t = 0; t < c.size(); ++t) c.data()[t] *= b.data()[t];
    return c;
}

void add_in_place(Matrix& a, const Matrix& b) {
    ensure_same_shape(a, b, "add_in_place");
    for (std::size_t t = 0; t < a.size(); ++t) a.data()[t] += b.data()[t];
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& r) {
    if (r.rows() != 1 || r.cols() != a.cols()) {
        throw ShapeMismatch("add_row_broadcast: bias shape");
    }
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        float* crow = c.row_ptr(i);
        const float* rrow = r.row_ptr(0);
        for (std::size_t j = 0; j < a.cols(); ++j) crow[j] += rrow[j];
    }
    return c;
}

Matrix col_sum(const Matrix& a) {
    Matrix c(1, a.cols());
    std::vector<double> acc(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const float* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) acc[j] += arow[j];
    }
    for (std::size_t j = 0; j < a.cols(); ++j) c(0, j) = static_cast<float>(acc[j]);
    return c;
}

void ema_matrix(Matrix& target, const Matrix& source, double momentum) {
    ensure_same_shape(target, source, "ema_matrix");
    for (std::size_t t = 0; t < target.size(); ++t) {
        target.data()[t] = static_cast<float>(momentum * target.data()[t] +
                                              (1.0 - momentum) * source.data()[t]);
    }
}

double l2_norm(const float* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(v[i]) * v[i];
    return std::sqrt(s);
}

double dot(const float* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

std::vector<float> l2_normalize(const std::vector<float>& v) {
    if (v.empty()) throw ShapeMismatch("l2_normalize: empty vector");
    const double norm = l2_norm(v.data(), v.size());
    if (norm < 1e-12) throw ZeroVector("l2_normalize: norm below 1e-12");
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i] / norm);
    }
    return out;
}

void l2_normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double norm = l2_norm(m.row_ptr(i), m.cols());
        if (norm < 1e-12) {
            throw ZeroVector("l2_normalize_rows: row " + std::to_string(i) +
                             " norm below 1e-12");
        }
        float* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            row[j] = static_cast<float>(row[j] / norm);
        }
    }
}

Matrix pairwise_cosine(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeMismatch("pairwise_cosine: dims " + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.cols()));
    }
    std::vector<double> anorm(a.rows()), bnorm(b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        anorm[i] = l2_norm(a.row_ptr(i), a.cols());
        if (anorm[i] < 1e-12) throw ZeroVector("pairwise_cosine: zero row in A");
    }
    for (std::size_t j = 0; j < b.rows(); ++j) {
        bnorm[j] = l2_norm(b.row_ptr(j), b.cols());
        if (bnorm[j] < 1e-12) throw ZeroVector("pairwise_cosine: zero row in B");
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double v = dot(a.row_ptr(i), b.row_ptr(j), a.cols()) / (anorm[i] * bnorm[j]);
            c(i, j) = static_cast<float>(std::clamp(v, -1.0, 1.0));
        }
    }
    return c;
}

std::vector<float> softmax(const std::vector<float>& logits, double temperature) {
    if (temperature <= 0.0) throw Error("softmax: temperature must be positive");
    if (logits.empty()) throw ShapeMismatch("softmax: empty logits");
    double mx = -std::numeric_limits<double>::infinity();
    for (float x : logits) mx = std::max(mx, static_cast<double>(x) / temperature);
    double sum = 0.0;
    std::vector<double> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(static_cast<double>(logits[i]) / temperature - mx);
        sum += e[i];
    }
    std::vector<float> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<float>(e[i] / sum);
    }
    return out;
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
    if (temperature <= 0.0) throw Error("softmax_rows: temperature must be positive");
    Matrix out(logits.rows(), logits.cols());
    std::vector<double> e(logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const float* row = logits.row_ptr(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            mx = std::max(mx, static_cast<double>(row[j]) / temperature);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            e[j] = std::exp(static_cast<double>(row[j]) / temperature - mx);
            sum += e[j];
        }
        float* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            orow[j] = static_cast<float>(e[j] / sum);
        }
    }
    return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const float* row = logits.row_ptr(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            mx = std::max(mx, static_cast<double>(row[j]));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            sum += std::exp(static_cast<double>(row[j]) - mx);
        }
        const double lse = mx + std::log(sum);
        float* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            orow[j] = static_cast<float>(static_cast<double>(row[j]) - lse);
        }
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (float x : m.data()) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

std::size_t argmax_row(const Matrix& m, std::size_t i) {
    const float* row = m.row_ptr(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols(); ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

} // namespace ncd

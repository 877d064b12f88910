#include "ncd/eigh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ncd {

EighResult sym_eigh(const Matrix& s) {
    const std::size_t n = s.rows();
    if (n == 0 || s.cols() != n) {
        throw ShapeMismatch("sym_eigh: matrix must be square and non-empty");
    }
    double max_abs = 0.0;
    for (float x : s.data()) max_abs = std::max(max_abs, std::fabs(static_cast<double>(x)));
    const double sym_tol = 1e-5 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::fabs(static_cast<double>(s(i, j)) - s(j, i)) > sym_tol) {
                throw NotSymmetric("sym_eigh: asymmetry above tolerance at (" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    // Work on the symmetrized double copy.
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i * n + j] = 0.5 * (static_cast<double>(s(i, j)) + s(j, i));
        }
    }
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    auto off_norm = [&]() {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
        return std::sqrt(2.0 * sum);
    };

    double fro = 0.0;
    for (double x : a) fro += x * x;
    fro = std::sqrt(fro);
    const double stop = std::max(1e-300, 1e-13 * fro);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && off_norm() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return a[x * n + x] < a[y * n + y];
    });

    EighResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        res.eigenvalues[j] = a[order[j] * n + order[j]];
        for (std::size_t i = 0; i < n; ++i) {
            res.eigenvectors(i, j) = static_cast<float>(v[i * n + order[j]]);
        }
    }
    return res;
}

} // namespace ncd

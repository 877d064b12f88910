#pragma once

#include <vector>

#include "ncd/matrix.hpp"

namespace ncd {

struct EighResult {
    std::vector<double> eigenvalues; // ascending
    Matrix eigenvectors;             // column j pairs with eigenvalues[j]
};

// Cyclic Jacobi eigensolver for symmetric matrices, computed in double.
// Throws NotSymmetric when the asymmetry exceeds 1e-5 relative to the
// largest entry magnitude.
EighResult sym_eigh(const Matrix& s);

} // namespace ncd

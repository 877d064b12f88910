#pragma once

#include <filesystem>

#include "ncd/matrix.hpp"

namespace ncd {

// Binary matrix file: 8-byte magic "PDM1\0\0\0\0", rows and cols as
// little-endian u64, then row-major little-endian IEEE-754 float32 payload.
void save_pdm1(const std::filesystem::path& path, const Matrix& m);
Matrix load_pdm1(const std::filesystem::path& path);

} // namespace ncd

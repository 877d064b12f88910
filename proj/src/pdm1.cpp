#include "ncd/pdm1.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace ncd {
namespace {

constexpr std::array<char, 8> kMagic = {'P', 'D', 'M', '1', 0, 0, 0, 0};

void put_u64_le(std::ofstream& out, std::uint64_t v) {
    std::array<unsigned char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64_le(std::ifstream& in) {
    std::array<unsigned char, 8> b;
    in.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void save_pdm1(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_pdm1: cannot open " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u64_le(out, m.rows());
    put_u64_le(out, m.cols());
    std::vector<unsigned char> buf(m.size() * 4);
    for (std::size_t t = 0; t < m.size(); ++t) {
        std::uint32_t bits;
        std::memcpy(&bits, &m.data()[t], 4);
        buf[4 * t + 0] = static_cast<unsigned char>(bits & 0xff);
        buf[4 * t + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
        buf[4 * t + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
        buf[4 * t + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("save_pdm1: write failed for " + path.string());
}

Matrix load_pdm1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_pdm1: cannot open " + path.string());
    std::array<char, 8> magic;
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw Malformed("load_pdm1: bad magic in " + path.string());
    }
    const std::uint64_t rows = get_u64_le(in);
    const std::uint64_t cols = get_u64_le(in);
    if (!in) throw Malformed("load_pdm1: truncated header in " + path.string());
    if (rows > 0 && cols > (1ULL << 40) / rows) {
        throw Malformed("load_pdm1: implausible shape in " + path.string());
    }
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    std::vector<unsigned char> buf(count * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
        throw Malformed("load_pdm1: truncated payload in " + path.string());
    }
    std::vector<float> data(count);
    for (std::size_t t = 0; t < count; ++t) {
        std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * t + 0]) |
                             (static_cast<std::uint32_t>(buf[4 * t + 1]) << 8) |
                             (static_cast<std::uint32_t>(buf[4 * t + 2]) << 16) |
                             (static_cast<std::uint32_t>(buf[4 * t + 3]) << 24);
        std::memcpy(&data[t], &bits, 4);
    }
    return Matrix(rows, cols, std::move(data));
}

} // namespace ncd

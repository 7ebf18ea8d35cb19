#pragma once

// Matrix files. Text: "p n" header then p rows of n numbers. Binary: "EOWS",
// u32 version 1, u64 p, u64 n, then p*n little-endian doubles, row-major.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "matcore.hpp"

namespace eows {

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("binary matrix: truncated file");
  return to_little(v);
}

}  // namespace detail

inline constexpr char kMagic[4] = {'E', 'O', 'W', 'S'};

inline void write_binary(std::ostream& os, const Mat& m) {
  os.write(kMagic, 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) detail::put<double>(os, m(i, j));
}

inline Mat read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw InputError("binary matrix: bad magic");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != 1) throw InputError("binary matrix: unsupported version " + std::to_string(version));
  const auto p = detail::get<std::uint64_t>(is);
  const auto n = detail::get<std::uint64_t>(is);
  if (p == 0 || n == 0 || p > (1ULL << 31) || n > (1ULL << 31))
    throw InputError("binary matrix: bad shape");
  Mat m(static_cast<Index>(p), static_cast<Index>(n));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = detail::get<double>(is);
  require_finite(m, "binary matrix");
  return m;
}

inline void write_text(std::ostream& os, const Mat& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
}

inline Mat read_text(std::istream& is) {
  long long p = 0, n = 0;
  if (!(is >> p >> n) || p < 1 || n < 1) throw InputError("text matrix: bad header");
  Mat m(p, n);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < n; ++j)
      if (!(is >> m(i, j))) throw InputError("text matrix: expected " + std::to_string(p * n) + " values");
  std::string extra;
  if (is >> extra) throw InputError("text matrix: trailing data");
  require_finite(m, "text matrix");
  return m;
}

// Format is detected from the first four bytes.
inline Mat read_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "': file not found or unreadable");
  char head[4] = {0, 0, 0, 0};
  f.read(head, 4);
  const bool binary = f.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0;
  f.clear();
  f.seekg(0);
  return binary ? read_binary(f) : read_text(f);
}

// Binary when the path ends in ".eows", text otherwise.
inline void write_matrix(const std::string& path, const Mat& m) {
  const bool binary = path.size() >= 5 && path.compare(path.size() - 5, 5, ".eows") == 0;
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw InputError("cannot write " + path);
  if (binary)
    write_binary(f, m);
  else
    write_text(f, m);
  if (!f) throw InputError("write failed: " + path);
}

}  // namespace eows

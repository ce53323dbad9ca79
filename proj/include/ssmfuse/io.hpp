#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"

namespace ssmfuse {

/// Rectangular matrix as read from disk.  rows == 1 is how feature vectors
/// travel through the same format.
struct MatrixData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
};

namespace detail {

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back((unsigned char)(v));
  out.push_back((unsigned char)(v >> 8));
  out.push_back((unsigned char)(v >> 16));
  out.push_back((unsigned char)(v >> 24));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline void put_f64le(std::vector<unsigned char>& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int s = 0; s < 64; s += 8) out.push_back((unsigned char)(v >> s));
}

inline double get_f64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return std::bit_cast<double>(v);
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

/// Binary matrix format: magic "SSMF", u32 rows, u32 cols (little endian),
/// then rows*cols doubles, little endian, row-major.  Doubles are stored
/// bit-exactly, so write followed by read reproduces every payload byte.
inline void write_matrix_file(const std::string& path, std::size_t rows,
                              std::size_t cols, std::span<const double> values) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("write_matrix_file: size mismatch");
  std::vector<unsigned char> bytes;
  bytes.reserve(12 + 8 * values.size());
  bytes.insert(bytes.end(), {'S', 'S', 'M', 'F'});
  detail::put_u32le(bytes, std::uint32_t(rows));
  detail::put_u32le(bytes, std::uint32_t(cols));
  for (double d : values) detail::put_f64le(bytes, d);
  detail::write_file_bytes(path, bytes);
}

inline MatrixData read_matrix_file(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SSMF", 4) != 0)
    throw std::runtime_error("bad magic: " + path);
  if (bytes.size() < 12) throw std::runtime_error("truncated: " + path);
  MatrixData m;
  m.rows = detail::get_u32le(bytes.data() + 4);
  m.cols = detail::get_u32le(bytes.data() + 8);
  const std::size_t expect = 12 + 8 * m.rows * m.cols;
  if (bytes.size() < expect) throw std::runtime_error("truncated: " + path);
  if (bytes.size() > expect) throw std::runtime_error("trailing data: " + path);
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = detail::get_f64le(bytes.data() + 12 + 8 * i);
  return m;
}

inline void write_matrix(const SquareMatrix& m, const std::string& path) {
  write_matrix_file(path, m.n, m.n, m.values);
}

inline SquareMatrix read_matrix(const std::string& path,
                                MatrixKind kind = MatrixKind::distance) {
  const MatrixData data = read_matrix_file(path);
  if (data.rows != data.cols) throw std::runtime_error("non-square: " + path);
  SquareMatrix m(data.rows, kind);
  m.values = data.values;
  return m;
}

/// CSV import/export: one row per line, comma separated, locale independent.
inline void write_csv(const std::string& path, std::size_t rows, std::size_t cols,
                      std::span<const double> values) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("write_csv: size mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values[r * cols + c]);
      out << buf;
      if (c + 1 < cols) out << ',';
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline MatrixData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  MatrixData m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t cols = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      const char* comma = static_cast<const char*>(std::memchr(p, ',', std::size_t(end - p)));
      const char* stop = comma ? comma : end;
      while (p < stop && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      const auto res = std::from_chars(p, stop, v);
      if (res.ec != std::errc())
        throw std::runtime_error("bad csv number in " + path);
      m.values.push_back(v);
      ++cols;
      p = comma ? comma + 1 : end;
    }
    if (m.rows == 0) {
      m.cols = cols;
    } else if (cols != m.cols) {
      throw std::runtime_error("ragged csv: " + path);
    }
    ++m.rows;
  }
  if (m.rows == 0) throw std::runtime_error("empty input: " + path);
  return m;
}

}  // namespace ssmfuse

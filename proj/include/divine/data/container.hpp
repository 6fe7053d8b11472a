#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

#include "divine/numerics/tensor.hpp"

namespace divine {

// Embedding container layout (all little-endian):
//   "DVE1" | u16 version | u32 T | u32 d | T*d float32 row-major payload
inline constexpr std::array<char, 4> kContainerMagic{'D', 'V', 'E', '1'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderSize = 4 + 2 + 4 + 4;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_container(const Matrix& seq) {
  if (!seq.allFinite()) throw std::invalid_argument("container payload must be finite");
  if (seq.rows() > std::numeric_limits<std::uint32_t>::max() || seq.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("container dimensions exceed u32");
  }
  constexpr double fmax = std::numeric_limits<float>::max();
  if (seq.size() > 0 && seq.cwiseAbs().maxCoeff() > fmax) throw std::invalid_argument("container payload overflows float32");
  std::string out;
  out.reserve(kContainerHeaderSize + static_cast<std::size_t>(seq.size()) * 4);
  out.append(kContainerMagic.data(), kContainerMagic.size());
  detail::put_le<std::uint16_t>(out, kContainerVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.cols()));
  for (Index i = 0; i < seq.size(); ++i) {
    detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(seq.data()[i])));
  }
  return out;
}

inline Matrix decode_container(std::string_view bytes) {
  using K = ParseError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kContainerMagic.data(), 4) != 0) {
    throw ParseError(K::bad_magic, 0, "bad container magic (expected DVE1)");
  }
  if (bytes.size() < kContainerHeaderSize) throw ParseError(K::truncated, bytes.size(), "truncated container header");
  const auto version = detail::get_le<std::uint16_t>(bytes, 4);
  if (version != kContainerVersion) throw ParseError(K::bad_version, 4, "unsupported container version " + std::to_string(version));
  const auto t = detail::get_le<std::uint32_t>(bytes, 6);
  const auto d = detail::get_le<std::uint32_t>(bytes, 10);
  const std::uint64_t count = static_cast<std::uint64_t>(t) * d;
  if (count > (std::numeric_limits<std::uint64_t>::max() - kContainerHeaderSize) / 4 ||
      count > static_cast<std::uint64_t>(std::numeric_limits<Index>::max())) {
    throw ParseError(K::dimension_overflow, 6, "container dimensions overflow");
  }
  const std::uint64_t expected = kContainerHeaderSize + count * 4;
  if (bytes.size() < expected) {
    throw ParseError(K::truncated, bytes.size(),
                     "truncated container payload: header declares " + std::to_string(t) + "x" + std::to_string(d) +
                         " (" + std::to_string(expected) + " bytes), file has " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) throw ParseError(K::trailing_bytes, expected, "trailing bytes after container payload");
  Matrix seq(static_cast<Index>(t), static_cast<Index>(d));
  for (Index i = 0; i < seq.size(); ++i) {
    const auto raw = detail::get_le<std::uint32_t>(bytes, kContainerHeaderSize + static_cast<std::size_t>(i) * 4);
    seq.data()[i] = static_cast<double>(std::bit_cast<float>(raw));
  }
  return seq;
}

inline void write_container(const Matrix& seq, const std::filesystem::path& path) {
  const std::string bytes = encode_container(seq);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::io, 0, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline Matrix read_container(const std::filesystem::path& path) { return decode_container(read_file_bytes(path)); }

// Rounds every entry to the nearest float32 so in-memory data equals what
// a container round trip yields.
inline Matrix round_to_float(const Matrix& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace divine

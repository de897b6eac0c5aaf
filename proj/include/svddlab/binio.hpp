#pragma once

// Little-endian primitive encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "svddlab/error.hpp"

namespace svddlab::binio {

template <typename U>
void put_uint(std::ostream& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_uint(std::istream& in, const std::string& what) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError("truncated file while reading " + what);
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<U>(v);
}

inline void put_f64(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in, const std::string& what) {
  return std::bit_cast<double>(get_uint<std::uint64_t>(in, what));
}
inline void put_f32(std::ostream& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(in, what));
}

}  // namespace svddlab::binio

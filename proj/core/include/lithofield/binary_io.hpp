#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "lithofield/error.hpp"

// Little-endian scalar helpers shared by the binary container formats.
namespace lithofield::binary {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(std::string("truncated input reading ") + what);
  }
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(std::string("truncated input reading ") + what);
  }
  return v;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

inline void write_trailer(std::ostream& out, const std::string& json) {
  write_u32(out, static_cast<std::uint32_t>(json.size()));
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
}

inline std::string read_trailer(std::istream& in) {
  const std::uint32_t len = read_u32(in, "trailer length");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw FormatError("truncated JSON trailer");
  return s;
}

}  // namespace lithofield::binary

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "csddp/errors.hpp"

namespace csddp::detail {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  } else {
    return v;
  }
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  const std::uint64_t le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_f64s(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) write_f64(out, v);
  }
}

/// Reads with schema errors on short input.
class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void magic(std::string_view expected) {
    std::string found(expected.size(), '\0');
    in_.read(found.data(), static_cast<std::streamsize>(found.size()));
    if (in_.gcount() == 0) throw SchemaError(what_ + ": empty file");
    if (static_cast<std::size_t>(in_.gcount()) != expected.size() || found != expected)
      throw SchemaError(what_ + ": bad magic, expected '" + std::string(expected) + "'");
  }

  std::uint64_t u64(std::string_view field) {
    std::uint64_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in_.gcount() != sizeof v) throw SchemaError(what_ + ": truncated while reading " + std::string(field));
    return to_little(v);
  }

  double f64(std::string_view field) { return std::bit_cast<double>(u64(field)); }

  void f64s(std::span<double> out, std::string_view field) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto bytes = static_cast<std::streamsize>(out.size() * sizeof(double));
      in_.read(reinterpret_cast<char*>(out.data()), bytes);
      if (in_.gcount() != bytes) throw SchemaError(what_ + ": truncated while reading " + std::string(field));
    } else {
      for (double& v : out) v = f64(field);
    }
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw SchemaError(what_ + ": trailing bytes after payload");
  }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace csddp::detail

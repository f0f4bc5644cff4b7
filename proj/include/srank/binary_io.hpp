#pragma once

// Little-endian primitives shared by the SRNKDATA, SRNKPARM and SRNKCACH
// containers. Integers are fixed width, doubles are IEEE-754 binary64, strings
// are a u32 byte length followed by UTF-8 bytes.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "srank/error.hpp"

namespace srank::io {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  void u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }

  void f64s(std::span<const double> v) {
    for (double x : v) f64(x);
  }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void check() const {
    if (!os_) throw FormatError("write failed");
  }

 private:
  void le(std::uint64_t v, int bytes) {
    std::array<char, 8> buf{};
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(buf.data(), bytes);
  }

  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    is_.read(got.data(), static_cast<std::streamsize>(m.size()));
    if (!is_ || got != m) throw FormatError(context_ + ": bad magic (expected " + std::string(m) + ")");
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }

  void f64s(std::span<double> out) {
    for (double& x : out) x = f64();
  }

  std::string str() {
    const std::uint32_t len = u32();
    if (len > kMaxString) throw FormatError(context_ + ": string length " + std::to_string(len) + " too large");
    std::string s(len, '\0');
    is_.read(s.data(), len);
    if (!is_) truncated();
    return s;
  }

  // Guards allocations driven by counts read from the file.
  std::uint64_t count(std::uint64_t limit, const char* what) {
    const std::uint64_t n = u64();
    if (n > limit) throw FormatError(context_ + ": implausible " + what + " count " + std::to_string(n));
    return n;
  }

  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void truncated() const { throw FormatError(context_ + ": unexpected end of file"); }

  const std::string& context() const { return context_; }

 private:
  static constexpr std::uint32_t kMaxString = 1u << 20;

  std::uint64_t le(int bytes) {
    std::array<unsigned char, 8> buf{};
    is_.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!is_) truncated();
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& is_;
  std::string context_;
};

}  // namespace srank::io

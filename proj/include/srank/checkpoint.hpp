#pragma once

// SRNKPARM parameter checkpoints (layout in docs/formats.md).

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "srank/binary_io.hpp"
#include "srank/ranker.hpp"

namespace srank {

inline constexpr std::string_view kParamsMagic = "SRNKPARM";
inline constexpr std::uint32_t kParamsVersion = 1;

inline void write_params(std::ostream& os, const RankerParams& p) {
  io::Writer w(os);
  w.magic(kParamsMagic);
  w.u32(kParamsVersion);
  std::uint32_t count = 0;
  p.for_each_tensor([&](const std::string&, const Matrix&) { ++count; });
  w.u32(count);
  p.for_each_tensor([&](const std::string& name, const Matrix& m) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    w.f64s(m.flat());
  });
  w.check();
}

inline RankerParams read_params(std::istream& is, const std::string& context = "SRNKPARM") {
  io::Reader rd(is, context);
  rd.expect_magic(kParamsMagic);
  const std::uint32_t version = rd.u32();
  if (version != kParamsVersion) throw FormatError(context + ": unsupported version " + std::to_string(version));
  const std::uint32_t count = rd.u32();
  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = rd.str();
    const std::uint32_t rows = rd.u32();
    const std::uint32_t cols = rd.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1u << 26)) throw FormatError(context + ": tensor too large");
    Matrix m(rows, cols);
    rd.f64s(m.flat());
    if (!tensors.emplace(name, std::move(m)).second) throw FormatError(context + ": duplicate tensor " + name);
  }
  if (!rd.at_end()) throw FormatError(context + ": trailing bytes");

  auto take = [&](const std::string& name) -> const Matrix& {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError(context + ": missing tensor " + name);
    return it->second;
  };
  RankerConfig cfg;
  cfg.d_in = take("encoder.weight").cols();
  cfg.d_model = take("encoder.weight").rows();
  cfg.hidden = take("head.w1").rows();
  cfg.heads = 0;
  while (tensors.count("attn.q." + std::to_string(cfg.heads))) ++cfg.heads;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(context + ": inconsistent dimensions: " + e.what());
  }

  RankerParams p = zero_params(cfg);
  std::size_t used = 0;
  p.for_each_tensor([&](const std::string& name, Matrix& m) {
    const Matrix& src = take(name);
    if (!src.same_shape(m)) throw FormatError(context + ": tensor " + name + " has unexpected shape");
    m = src;
    ++used;
  });
  if (used != tensors.size()) throw FormatError(context + ": unexpected extra tensors");
  return p;
}

inline void write_params(const std::string& path, const RankerParams& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_params(os, p);
}

inline RankerParams read_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_params(is, path);
}

}  // namespace srank

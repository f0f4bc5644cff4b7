#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srank/error.hpp"
#include "srank/numerics.hpp"

namespace srank {

/// One-layer tanh encoder shared by queries and documents:
/// e = tanh(weight * x + bias).
struct Encoder {
  Matrix weight;  // d_model x d_in
  Matrix bias;    // 1 x d_model

  std::size_t d_in() const noexcept { return weight.cols(); }
  std::size_t d_model() const noexcept { return weight.rows(); }

  friend bool operator==(const Encoder&, const Encoder&) = default;
};

inline Encoder zero_encoder(std::size_t d_model, std::size_t d_in) {
  return {Matrix(d_model, d_in), Matrix(1, d_model)};
}

inline std::vector<double> encode(const Encoder& enc, std::span<const double> x) {
  if (x.size() != enc.d_in()) {
    throw ShapeError("encode: input has " + std::to_string(x.size()) + " features, encoder expects " +
                     std::to_string(enc.d_in()));
  }
  std::vector<double> out(enc.d_model());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = std::tanh(dot(enc.weight.row(r), x) + enc.bias(0, r));
  return out;
}

/// Accumulates encoder gradients given d loss / d output for one input.
inline void encoder_backward(const Encoder& enc, std::span<const double> x, std::span<const double> out,
                             std::span<const double> d_out, Encoder& grad) {
  for (std::size_t r = 0; r < enc.d_model(); ++r) {
    const double d_pre = d_out[r] * (1.0 - out[r] * out[r]);
    if (d_pre == 0.0) continue;
    axpy(d_pre, x, grad.weight.row(r));
    grad.bias(0, r) += d_pre;
  }
}

/// Fingerprint of the encoder weights; an embedding cache records the
/// fingerprint of the encoder that produced it.
inline std::uint64_t encoder_digest(const Encoder& enc) {
  Fnv1a h;
  h.update_u64(enc.weight.rows());
  h.update_u64(enc.weight.cols());
  for (double v : enc.weight.flat()) h.update(v);
  for (double v : enc.bias.flat()) h.update(v);
  return h.digest();
}

}  // namespace srank

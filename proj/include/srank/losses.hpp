#pragma once

// Ranking losses for one-positive binary relevance.
//
// Every candidate set carries exactly one relevant document. Under that
// constraint the mean pairwise logistic loss only needs the n score
// differences F_i - F_+ against the positive, so it is computed in O(n)
// rather than through the n x n difference matrix.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "srank/error.hpp"
#include "srank/numerics.hpp"

namespace srank {

using ScoreVector = std::vector<double>;
using LabelVector = std::vector<std::uint8_t>;

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;  // d value / d F
};

enum class LossKind { kLinearPairwise, kMle };

inline std::string to_string(LossKind k) {
  return k == LossKind::kLinearPairwise ? "linear_pairwise" : "mle";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "linear_pairwise") return LossKind::kLinearPairwise;
  if (s == "mle") return LossKind::kMle;
  throw ConfigError("unknown loss '" + s + "' (expected linear_pairwise or mle)");
}

inline LabelVector one_hot(std::size_t n, std::size_t positive) {
  LabelVector y(n, 0);
  y.at(positive) = 1;
  return y;
}

/// Validates the pair and returns the index of the single positive.
inline std::size_t positive_index(std::span<const double> f, std::span<const std::uint8_t> y) {
  if (f.size() != y.size()) {
    throw ShapeError("scores/labels length mismatch: " + std::to_string(f.size()) + " vs " +
                     std::to_string(y.size()));
  }
  if (f.size() < 2) throw ShapeError("pairwise loss needs at least 2 candidates");
  std::size_t pos = f.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 1) throw LabelError("label " + std::to_string(y[i]) + " is not binary");
    if (y[i] == 1) {
      if (pos != f.size()) throw LabelError("more than one positive label");
      pos = i;
    }
  }
  if (pos == f.size()) throw LabelError("no positive label");
  return pos;
}

/// Mean pairwise logistic loss against the single positive, O(n) time and memory.
///
/// value = (-ln 2 + sum_i ln(1 + exp(F_i - F_+))) / (n - 1); the positive's own
/// term is exactly ln 2 and is cancelled rather than skipped.
inline LossOutput linear_pairwise_loss(std::span<const double> f, std::span<const std::uint8_t> y) {
  const std::size_t pos = positive_index(f, y);
  const std::size_t n = f.size();
  const double inv = 1.0 / static_cast<double>(n - 1);
  const double f_pos = f[pos];

  LossOutput out;
  out.grad.assign(n, 0.0);
  double sum = 0.0;
  double pos_grad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = f[i] - f_pos;
    sum += softplus(diff);
    if (i != pos) {
      const double g = sigmoid(diff) * inv;
      out.grad[i] = g;
      pos_grad -= g;
    }
  }
  out.grad[pos] = pos_grad;
  out.value = (sum - std::numbers::ln2) * inv;
  return out;
}

/// Reference O(n^2) evaluation over every ordered pair (i, j). Used to check
/// linear_pairwise_loss; never on the training path.
inline double quadratic_pairwise_oracle(std::span<const double> f, std::span<const std::uint8_t> y) {
  positive_index(f, y);
  const std::size_t n = f.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // pair (negative i, positive j) contributes; every other pair is masked
      if (y[j] == 1 && y[i] == 0) sum += softplus(f[i] - f[j]);
    }
  }
  return sum / static_cast<double>(n - 1);
}

/// Pairwise loss evaluated over chunks of the negatives, each chunk paired with
/// the positive. Chunk c with n_c candidates is weighted (n_c - 1) / (n - 1),
/// which makes the result equal to the unchunked loss.
inline LossOutput chunked_pairwise_loss(std::span<const double> f, std::span<const std::uint8_t> y,
                                        std::size_t chunk_size) {
  if (chunk_size < 2) throw ConfigError("chunk_size must be >= 2");
  const std::size_t pos = positive_index(f, y);
  const std::size_t n = f.size();
  if (chunk_size >= n) return linear_pairwise_loss(f, y);

  const std::size_t per_chunk = chunk_size - 1;
  const double inv = 1.0 / static_cast<double>(n - 1);
  LossOutput out;
  out.grad.assign(n, 0.0);

  std::vector<double> sub_f;
  std::vector<std::size_t> members;
  sub_f.reserve(chunk_size);
  members.reserve(chunk_size);
  LabelVector sub_y;

  std::size_t i = 0;
  while (i < n) {
    sub_f.assign(1, f[pos]);
    members.assign(1, pos);
    while (i < n && members.size() <= per_chunk) {
      if (i != pos) {
        sub_f.push_back(f[i]);
        members.push_back(i);
      }
      ++i;
    }
    if (members.size() < 2) break;  // only the positive was left
    sub_y.assign(sub_f.size(), 0);
    sub_y[0] = 1;
    const LossOutput part = linear_pairwise_loss(sub_f, sub_y);
    const double weight = static_cast<double>(sub_f.size() - 1) * inv;
    out.value += weight * part.value;
    for (std::size_t k = 0; k < members.size(); ++k) out.grad[members[k]] += weight * part.grad[k];
  }
  return out;
}

/// Mean logistic probability that the positive outranks a negative.
inline double ranknet_prob(std::span<const double> f, std::span<const std::uint8_t> y) {
  const std::size_t pos = positive_index(f, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (i != pos) sum += sigmoid(f[pos] - f[i]);
  return sum / static_cast<double>(f.size() - 1);
}

/// RankNet loss under one binary relevance: the mean per-pair -ln sigmoid,
/// which is exactly the linear pairwise loss.
inline LossOutput ranknet_loss(std::span<const double> f, std::span<const std::uint8_t> y) {
  return linear_pairwise_loss(f, y);
}

/// P(d+) = 1 / (1 + sum exp(F_- - F_+)), i.e. the softmax mass on the positive.
inline double mle_prob(std::span<const double> f, std::span<const std::uint8_t> y) {
  const std::size_t pos = positive_index(f, y);
  return std::exp(f[pos] - logsumexp(f));
}

inline LossOutput mle_loss(std::span<const double> f, std::span<const std::uint8_t> y) {
  const std::size_t pos = positive_index(f, y);
  LossOutput out;
  const double lse = logsumexp(f);
  out.value = lse - f[pos];
  out.grad.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out.grad[i] = std::exp(f[i] - lse);
  out.grad[pos] -= 1.0;
  return out;
}

/// Dispatches on the configured loss; chunk_size 0 means unchunked.
inline LossOutput compute_loss(LossKind kind, std::span<const double> f,
                               std::span<const std::uint8_t> y, std::size_t chunk_size = 0) {
  if (kind == LossKind::kMle) return mle_loss(f, y);
  if (chunk_size == 0) return linear_pairwise_loss(f, y);
  return chunked_pairwise_loss(f, y, chunk_size);
}

}  // namespace srank

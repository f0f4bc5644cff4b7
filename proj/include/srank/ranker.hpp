#pragma once

// Cross-attention ranker.
//
// The query embedding attends over the candidate document embeddings, which
// serve as keys and values. Each head produces a context vector; the
// concatenation is projected by W_o into a shared context c. Document j is then
// scored by a one-hidden-layer head over [c ; e_d,j ; e_q * e_d,j].
//
// Document embeddings come from a frozen cache and never receive gradient.
// The query embedding does, and passes it on to the shared encoder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srank/encoder.hpp"
#include "srank/error.hpp"
#include "srank/losses.hpp"
#include "srank/numerics.hpp"

namespace srank {

struct RankerConfig {
  std::size_t d_in = 32;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t hidden = 64;

  std::size_t d_k() const noexcept { return heads == 0 ? 0 : d_model / heads; }

  void validate() const {
    if (d_in == 0 || d_model == 0 || heads == 0 || hidden == 0)
      throw ConfigError("model dimensions must be positive");
    if (d_model % heads != 0)
      throw ConfigError("d_model (" + std::to_string(d_model) + ") must be a multiple of heads (" +
                        std::to_string(heads) + ")");
  }
};

struct RankerParams {
  std::vector<Matrix> wq;  // per head, d_model x d_k
  std::vector<Matrix> wk;
  std::vector<Matrix> wv;
  Matrix wo;  // d_model x d_model
  Matrix w1;  // hidden x 3*d_model, column blocks [context | document | product]
  Matrix b1;  // 1 x hidden
  Matrix w2;  // 1 x hidden
  Matrix b2;  // 1 x 1
  Encoder encoder;

  std::size_t heads() const noexcept { return wq.size(); }
  std::size_t d_model() const noexcept { return wo.rows(); }
  std::size_t d_k() const noexcept { return wq.empty() ? 0 : wq.front().cols(); }
  std::size_t hidden() const noexcept { return w1.rows(); }
  std::size_t d_in() const noexcept { return encoder.d_in(); }

  RankerConfig config() const { return {d_in(), d_model(), heads(), hidden()}; }

  /// Visits every trainable tensor with a stable name, in checkpoint order.
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    for (std::size_t h = 0; h < self.wq.size(); ++h) {
      const std::string suffix = "." + std::to_string(h);
      fn("attn.q" + suffix, self.wq[h]);
      fn("attn.k" + suffix, self.wk[h]);
      fn("attn.v" + suffix, self.wv[h]);
    }
    fn(std::string("attn.out"), self.wo);
    fn(std::string("head.w1"), self.w1);
    fn(std::string("head.b1"), self.b1);
    fn(std::string("head.w2"), self.w2);
    fn(std::string("head.b2"), self.b2);
    fn(std::string("encoder.weight"), self.encoder.weight);
    fn(std::string("encoder.bias"), self.encoder.bias);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
  }

  friend bool operator==(const RankerParams&, const RankerParams&) = default;
};

inline RankerParams zero_params(const RankerConfig& cfg) {
  cfg.validate();
  RankerParams p;
  const std::size_t dk = cfg.d_k();
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    p.wq.emplace_back(cfg.d_model, dk);
    p.wk.emplace_back(cfg.d_model, dk);
    p.wv.emplace_back(cfg.d_model, dk);
  }
  p.wo = Matrix(cfg.d_model, cfg.d_model);
  p.w1 = Matrix(cfg.hidden, 3 * cfg.d_model);
  p.b1 = Matrix(1, cfg.hidden);
  p.w2 = Matrix(1, cfg.hidden);
  p.b2 = Matrix(1, 1);
  p.encoder = zero_encoder(cfg.d_model, cfg.d_in);
  return p;
}

inline RankerParams zeros_like(const RankerParams& p) { return zero_params(p.config()); }

/// All parameters concatenated in visit order.
inline std::vector<double> flatten(const RankerParams& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  p.for_each_tensor([&](const std::string&, const Matrix& m) { out.insert(out.end(), m.flat().begin(), m.flat().end()); });
  return out;
}

inline void unflatten_into(RankerParams& p, std::span<const double> values) {
  if (values.size() != p.parameter_count()) throw ShapeError("flat parameter vector has the wrong length");
  std::size_t off = 0;
  p.for_each_tensor([&](const std::string&, Matrix& m) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.flat().begin());
    off += m.size();
  });
}

/// Glorot-uniform weights, zero biases.
inline RankerParams init_params(const RankerConfig& cfg, Rng& rng) {
  RankerParams p = zero_params(cfg);
  auto glorot = [&rng](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.flat()) v = rng.uniform(-limit, limit);
  };
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    glorot(p.wq[h], cfg.d_model, cfg.d_k());
    glorot(p.wk[h], cfg.d_model, cfg.d_k());
    glorot(p.wv[h], cfg.d_model, cfg.d_k());
  }
  glorot(p.wo, cfg.d_model, cfg.d_model);
  glorot(p.w1, 3 * cfg.d_model, cfg.hidden);
  glorot(p.w2, cfg.hidden, 1);
  glorot(p.encoder.weight, cfg.d_in, cfg.d_model);
  return p;
}

struct ForwardOptions {
  // Ablation: drop e_d,j and e_q * e_d,j from the score head input, leaving
  // only the shared attention context.
  bool per_document_inputs = true;
};

struct ScoredSet {
  ScoreVector scores;
  Matrix attention;  // heads x n
};

/// Intermediates kept by forward for the backward pass. Owns copies of its
/// inputs, so later changes to the caller's embeddings do not affect it.
struct ForwardTrace {
  std::vector<double> e_q;
  Matrix e_d;
  ForwardOptions options;
  std::vector<std::vector<double>> q;       // per head, d_k
  std::vector<std::vector<double>> key_dir;  // per head, W_k q (d_model)
  std::vector<std::vector<double>> doc_mix;  // per head, sum_j a_j e_d,j (d_model)
  std::vector<double> concat;                // heads * d_k
  std::vector<double> context;               // d_model
  Matrix doc_proj;                           // hidden x d_model, W1_doc + W1_prod * diag(e_q)
  Matrix pre_activation;                     // n x hidden
  ScoredSet out;
};

namespace detail {

inline void check_inputs(const RankerParams& p, std::span<const double> e_q, const Matrix& e_d) {
  if (e_q.size() != p.d_model())
    throw ShapeError("query embedding has " + std::to_string(e_q.size()) + " entries, model expects " +
                     std::to_string(p.d_model()));
  if (e_d.rows() == 0) throw ShapeError("candidate set is empty");
  if (e_d.cols() != p.d_model())
    throw ShapeError("document embeddings have " + std::to_string(e_d.cols()) +
                     " columns, model expects " + std::to_string(p.d_model()));
}

}  // namespace detail

/// Forward pass that records what backward needs.
///
/// Per head, q_h K_h^T = e_d (W_k q_h) and a_h V_h = (a_h e_d) W_v, so keys and
/// values are never materialised as n x d_k matrices.
inline ForwardTrace forward_trace(const RankerParams& p, std::span<const double> e_q, const Matrix& e_d,
                                  ForwardOptions options = {}) {
  detail::check_inputs(p, e_q, e_d);
  const std::size_t n = e_d.rows();
  const std::size_t d = p.d_model();
  const std::size_t dk = p.d_k();
  const std::size_t heads = p.heads();
  const std::size_t hidden = p.hidden();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  ForwardTrace t;
  t.e_q.assign(e_q.begin(), e_q.end());
  t.e_d = e_d;
  t.options = options;
  t.q.assign(heads, std::vector<double>(dk, 0.0));
  t.key_dir.assign(heads, std::vector<double>(d, 0.0));
  t.doc_mix.assign(heads, std::vector<double>(d, 0.0));
  t.concat.assign(heads * dk, 0.0);
  t.out.attention = Matrix(heads, n);

  for (std::size_t h = 0; h < heads; ++h) {
    auto& q = t.q[h];
    for (std::size_t i = 0; i < d; ++i) axpy(e_q[i], p.wq[h].row(i), q);
    auto& kd = t.key_dir[h];
    for (std::size_t i = 0; i < d; ++i) kd[i] = dot(p.wk[h].row(i), q);

    auto attn = t.out.attention.row(h);
    for (std::size_t j = 0; j < n; ++j) attn[j] = dot(e_d.row(j), kd) * scale;
    softmax_inplace(attn);

    auto& mix = t.doc_mix[h];
    for (std::size_t j = 0; j < n; ++j) axpy(attn[j], e_d.row(j), mix);
    std::span<double> ctx_h(t.concat.data() + h * dk, dk);
    for (std::size_t i = 0; i < d; ++i) axpy(mix[i], p.wv[h].row(i), ctx_h);
  }

  t.context.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) axpy(t.concat[i], p.wo.row(i), t.context);

  // Shared part of the hidden pre-activation: W1_ctx c + b1.
  std::vector<double> shared(hidden);
  for (std::size_t r = 0; r < hidden; ++r)
    shared[r] = dot(p.w1.row(r).subspan(0, d), t.context) + p.b1(0, r);

  if (options.per_document_inputs) {
    t.doc_proj = Matrix(hidden, d);
    for (std::size_t r = 0; r < hidden; ++r) {
      const auto w = p.w1.row(r);
      auto out = t.doc_proj.row(r);
      for (std::size_t i = 0; i < d; ++i) out[i] = w[d + i] + w[2 * d + i] * e_q[i];
    }
  }

  t.pre_activation = Matrix(n, hidden);
  t.out.scores.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto z = t.pre_activation.row(j);
    double s = p.b2(0, 0);
    for (std::size_t r = 0; r < hidden; ++r) {
      z[r] = shared[r];
      if (options.per_document_inputs) z[r] += dot(t.doc_proj.row(r), e_d.row(j));
      if (z[r] > 0.0) s += p.w2(0, r) * z[r];
    }
    t.out.scores[j] = s;
  }
  return t;
}

inline ScoredSet forward(const RankerParams& p, std::span<const double> e_q, const Matrix& e_d,
                         ForwardOptions options = {}) {
  return forward_trace(p, e_q, e_d, options).out;
}

struct RankerGradients {
  RankerParams params;          // encoder part stays zero; see query_encoder_backward
  std::vector<double> d_query;  // d loss / d e_q
};

/// Reverse-mode gradients of the scores, given d loss / d scores.
/// Uses only the trace; no gradient is produced for the document embeddings.
inline RankerGradients backward(const RankerParams& p, const ForwardTrace& t, std::span<const double> upstream) {
  const std::size_t n = t.e_d.rows();
  if (upstream.size() != n) throw ShapeError("upstream gradient length does not match candidate count");
  const std::size_t d = p.d_model();
  const std::size_t dk = p.d_k();
  const std::size_t hidden = p.hidden();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  RankerGradients g{zeros_like(p), std::vector<double>(d, 0.0)};
  auto& gp = g.params;

  // Score head.
  std::vector<double> dz_sum(hidden, 0.0);
  Matrix d_doc_proj(t.options.per_document_inputs ? hidden : 0, d);
  std::vector<double> dz(hidden);
  for (std::size_t j = 0; j < n; ++j) {
    const double gj = upstream[j];
    if (gj == 0.0) continue;
    gp.b2(0, 0) += gj;
    const auto z = t.pre_activation.row(j);
    for (std::size_t r = 0; r < hidden; ++r) {
      if (z[r] > 0.0) {
        gp.w2(0, r) += gj * z[r];
        dz[r] = gj * p.w2(0, r);
      } else {
        dz[r] = 0.0;
      }
      dz_sum[r] += dz[r];
    }
    if (t.options.per_document_inputs) {
      const auto ed = t.e_d.row(j);
      for (std::size_t r = 0; r < hidden; ++r)
        if (dz[r] != 0.0) axpy(dz[r], ed, d_doc_proj.row(r));
    }
  }

  std::vector<double> d_context(d, 0.0);
  for (std::size_t r = 0; r < hidden; ++r) {
    gp.b1(0, r) = dz_sum[r];
    if (dz_sum[r] == 0.0 && !t.options.per_document_inputs) continue;
    const auto w = p.w1.row(r);
    auto gw = gp.w1.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      gw[i] += dz_sum[r] * t.context[i];
      d_context[i] += dz_sum[r] * w[i];
    }
    if (t.options.per_document_inputs) {
      const auto dm = d_doc_proj.row(r);
      for (std::size_t i = 0; i < d; ++i) {
        gw[d + i] += dm[i];
        gw[2 * d + i] += dm[i] * t.e_q[i];
        g.d_query[i] += dm[i] * w[2 * d + i];
      }
    }
  }

  // Output projection: context = concat * W_o.
  std::vector<double> d_concat(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    axpy(t.concat[i], d_context, gp.wo.row(i));
    d_concat[i] = dot(p.wo.row(i), d_context);
  }

  // Attention heads.
  std::vector<double> d_mix(d), d_attn(n), d_key_dir(d), dq(dk);
  for (std::size_t h = 0; h < p.heads(); ++h) {
    const std::span<const double> d_ctx_h(d_concat.data() + h * dk, dk);
    const auto& mix = t.doc_mix[h];
    for (std::size_t i = 0; i < d; ++i) {
      axpy(mix[i], d_ctx_h, gp.wv[h].row(i));
      d_mix[i] = dot(p.wv[h].row(i), d_ctx_h);
    }
    const auto attn = t.out.attention.row(h);
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      d_attn[j] = dot(t.e_d.row(j), d_mix);
      weighted += attn[j] * d_attn[j];
    }
    std::fill(d_key_dir.begin(), d_key_dir.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double d_logit = attn[j] * (d_attn[j] - weighted);
      axpy(d_logit * scale, t.e_d.row(j), d_key_dir);
    }
    std::fill(dq.begin(), dq.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      axpy(d_key_dir[i], t.q[h], gp.wk[h].row(i));
      axpy(d_key_dir[i], p.wk[h].row(i), dq);
    }
    for (std::size_t i = 0; i < d; ++i) {
      axpy(t.e_q[i], dq, gp.wq[h].row(i));
      g.d_query[i] += dot(p.wq[h].row(i), dq);
    }
  }
  return g;
}

/// Convenience overload that recomputes the forward pass.
inline RankerGradients backward(const RankerParams& p, std::span<const double> e_q, const Matrix& e_d,
                                std::span<const double> upstream, ForwardOptions options = {}) {
  return backward(p, forward_trace(p, e_q, e_d, options), upstream);
}

struct StepResult {
  LossOutput loss;
  RankerParams grads;  // includes encoder gradients through the query path
  ScoreVector scores;
};

/// Loss and gradients for one candidate set, starting from raw query features.
/// e_d is the frozen document embedding matrix.
inline StepResult loss_and_gradients(const RankerParams& p, std::span<const double> query_features,
                                     const Matrix& e_d, std::span<const std::uint8_t> labels, LossKind kind,
                                     std::size_t chunk_size = 0, ForwardOptions options = {}) {
  const std::vector<double> e_q = encode(p.encoder, query_features);
  const ForwardTrace trace = forward_trace(p, e_q, e_d, options);
  StepResult r;
  r.loss = compute_loss(kind, trace.out.scores, labels, chunk_size);
  RankerGradients g = backward(p, trace, r.loss.grad);
  encoder_backward(p.encoder, query_features, e_q, g.d_query, g.params.encoder);
  r.grads = std::move(g.params);
  r.scores = trace.out.scores;
  return r;
}

/// p <- p - lr * g. Throws TrainingError (and leaves p untouched) if any
/// gradient entry is not finite.
inline void sgd_step(RankerParams& p, const RankerParams& g, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive and finite");
  std::vector<Matrix*> targets;
  p.for_each_tensor([&](const std::string&, Matrix& m) { targets.push_back(&m); });
  std::size_t k = 0;
  g.for_each_tensor([&](const std::string& name, const Matrix& m) {
    if (k >= targets.size() || !m.same_shape(*targets[k]))
      throw ShapeError("gradient tensor " + name + " does not match parameters");
    if (!m.all_finite()) throw TrainingError("non-finite gradient in " + name);
    ++k;
  });
  k = 0;
  g.for_each_tensor([&](const std::string&, const Matrix& m) {
    auto dst = targets[k++]->flat();
    const auto src = m.flat();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] -= lr * src[i];
  });
}

/// Lowest index among the maxima.
inline std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw ShapeError("argmax of empty score vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best]) best = j;
  return best;
}

/// Top-one decision. std::nullopt means NO_ANSWER: the Empty candidate won.
inline std::optional<std::size_t> decide(std::span<const double> scores, std::size_t empty_index) {
  if (empty_index >= scores.size()) throw ShapeError("empty_index out of range");
  const std::size_t best = argmax_lowest(scores);
  if (best == empty_index) return std::nullopt;
  return best;
}

inline std::optional<std::size_t> predict(const RankerParams& p, std::span<const double> e_q, const Matrix& e_d,
                                          std::size_t empty_index) {
  return decide(forward(p, e_q, e_d).scores, empty_index);
}

}  // namespace srank

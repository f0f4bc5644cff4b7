#pragma once

// Self-check suite run by `srank verify`: oracle equivalence, gradient checks,
// chunk invariance, forward symmetries and container round-trips.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "srank/checkpoint.hpp"
#include "srank/data.hpp"
#include "srank/embedding_store.hpp"
#include "srank/losses.hpp"
#include "srank/numerics.hpp"
#include "srank/ranker.hpp"

namespace srank {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace verify_detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

struct Instance {
  std::vector<double> f;
  LabelVector y;
};

inline Instance random_instance(Rng& rng, std::size_t n, double scale = 3.0) {
  Instance in;
  in.f.resize(n);
  for (double& x : in.f) x = scale * rng.normal();
  in.y = one_hot(n, rng.uniform_int(0, n - 1));
  return in;
}

inline CheckResult oracle_equivalence(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto in = random_instance(rng, rng.uniform_int(2, 64));
    worst = std::max(worst, std::abs(linear_pairwise_loss(in.f, in.y).value - quadratic_pairwise_oracle(in.f, in.y)));
  }
  return {"oracle_equivalence", worst <= 1e-9, "max |linear - quadratic| = " + sci(worst) + " over 1000 sets"};
}

inline CheckResult worked_values() {
  const double a = linear_pairwise_loss(std::vector<double>{0, 0, 0}, LabelVector{1, 0, 0}).value;
  const double b = linear_pairwise_loss(std::vector<double>{2, 0}, LabelVector{1, 0}).value;
  const double err = std::max(std::abs(a - std::log(2.0)), std::abs(b - std::log1p(std::exp(-2.0))));
  return {"worked_values", err <= 1e-12, "max error " + sci(err)};
}

inline CheckResult chunk_invariance(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto in = random_instance(rng, 50);
    const auto full = linear_pairwise_loss(in.f, in.y);
    for (std::size_t c : {2, 3, 7, 49}) {
      const auto part = chunked_pairwise_loss(in.f, in.y, c);
      worst = std::max(worst, std::abs(part.value - full.value));
      for (std::size_t i = 0; i < 50; ++i) worst = std::max(worst, std::abs(part.grad[i] - full.grad[i]));
    }
  }
  return {"chunk_invariance", worst <= 1e-9, "max value/grad deviation " + sci(worst)};
}

inline CheckResult loss_gradients(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto in = random_instance(rng, rng.uniform_int(2, 16), 2.0);
    for (auto fn : {&linear_pairwise_loss, &mle_loss}) {
      const auto out = fn(in.f, in.y);
      const auto y = in.y;
      worst = std::max(worst, check_gradient([&](std::span<const double> x) { return fn(x, y).value; }, in.f,
                                             out.grad, 1e-5));
    }
  }
  return {"loss_gradients", worst <= 1e-6, "max relative error " + sci(worst)};
}

inline CheckResult translation_invariance(std::uint64_t seed) {
  Rng rng(seed);
  double worst_value = 0.0, worst_sum = 0.0;
  for (int t = 0; t < 200; ++t) {
    auto in = random_instance(rng, rng.uniform_int(2, 64));
    const double c = rng.uniform(-50, 50);
    auto shifted = in.f;
    for (double& x : shifted) x += c;
    for (auto fn : {&linear_pairwise_loss, &mle_loss}) {
      const auto a = fn(in.f, in.y);
      worst_value = std::max(worst_value, std::abs(a.value - fn(shifted, in.y).value));
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(a.grad.begin(), a.grad.end(), 0.0)));
    }
  }
  return {"translation_invariance", worst_value <= 1e-9 && worst_sum <= 1e-10,
          "value drift " + sci(worst_value) + ", gradient sum " + sci(worst_sum)};
}

struct TinyModel {
  RankerParams params;
  std::vector<double> x_q;
  Matrix e_d;
  LabelVector y;
};

/// Random d_model=8, H=2, hidden=16 instance. Instances with a ReLU
/// pre-activation within `kink_margin` of zero are redrawn, so a central
/// difference of step <= kink_margin never straddles the kink.
inline TinyModel tiny_model(std::uint64_t seed, std::size_t n = 5, double kink_margin = 0.005) {
  Rng rng(seed);
  for (;;) {
    TinyModel m;
    m.params = init_params({6, 8, 2, 16}, rng);
    for (double& b : m.params.b1.flat()) b = rng.uniform(-0.1, 0.1);
    m.x_q.resize(6);
    for (double& x : m.x_q) x = rng.normal();
    m.e_d = Matrix(n, 8);
    for (double& x : m.e_d.flat()) x = std::tanh(rng.normal());
    m.y = one_hot(n, rng.uniform_int(0, n - 1));
    const auto trace = forward_trace(m.params, encode(m.params.encoder, m.x_q), m.e_d);
    const auto z = trace.pre_activation.flat();
    if (std::all_of(z.begin(), z.end(), [&](double v) { return std::abs(v) >= kink_margin; })) return m;
  }
}

// Step for full-model checks. Several parameters (b2, and context weights of
// units active for every candidate) have an exactly zero gradient, where the
// central difference is pure roundoff of order ulp(loss) / h; h = 1e-3 keeps
// that well under the 1e-8 relative-error floor.
inline constexpr double kModelGradientStep = 1e-3;

inline CheckResult ranker_gradients(std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const TinyModel m = tiny_model(seed + s);
    for (LossKind kind : {LossKind::kLinearPairwise, LossKind::kMle}) {
      const auto step = loss_and_gradients(m.params, m.x_q, m.e_d, m.y, kind);
      RankerParams probe = m.params;
      auto f = [&](std::span<const double> x) {
        unflatten_into(probe, x);
        return loss_and_gradients(probe, m.x_q, m.e_d, m.y, kind).loss.value;
      };
      worst = std::max(worst, check_gradient(f, flatten(m.params), flatten(step.grads), kModelGradientStep));
    }
  }
  return {"ranker_gradients", worst <= 1e-4, "max relative error " + sci(worst) + " over all parameters"};
}

inline CheckResult forward_equivariance(std::uint64_t seed) {
  const TinyModel m = tiny_model(seed, 7);
  const auto e_q = encode(m.params.encoder, m.x_q);
  const auto base = forward(m.params, e_q, m.e_d);
  std::vector<std::size_t> perm(m.e_d.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  Matrix permuted(m.e_d.rows(), m.e_d.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy(m.e_d.row(perm[i]).begin(), m.e_d.row(perm[i]).end(), permuted.row(i).begin());
  const auto moved = forward(m.params, e_q, permuted);
  double worst = 0.0, row_sum = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) worst = std::max(worst, std::abs(moved.scores[i] - base.scores[perm[i]]));
  for (std::size_t h = 0; h < base.attention.rows(); ++h) {
    const auto r = base.attention.row(h);
    row_sum = std::max(row_sum, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
  }
  return {"forward_equivariance", worst <= 1e-12 && row_sum <= 1e-12,
          "permutation deviation " + sci(worst) + ", attention row-sum error " + sci(row_sum)};
}

inline CheckResult container_roundtrips(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.seed = seed;
  sc.n_groups = 4;
  sc.n_queries = 200;
  const Dataset ds = generate_synthetic(sc);
  std::stringstream data(std::ios::in | std::ios::out | std::ios::binary);
  write_dataset(data, ds.catalog, ds.records);
  const bool data_ok = read_dataset(data) == ds;

  Rng rng(seed);
  const RankerParams p = init_params({sc.d_in, 16, 2, 8}, rng);
  std::stringstream params(std::ios::in | std::ios::out | std::ios::binary);
  write_params(params, p);
  const bool params_ok = read_params(params) == p;

  const EmbeddingCache cache = build_cache(p.encoder, ds.catalog);
  std::stringstream cache_bytes(std::ios::in | std::ios::out | std::ios::binary);
  write_cache(cache_bytes, cache);
  const bool cache_ok = read_cache(cache_bytes) == cache;

  const bool digest_ok =
      dataset_digest(ds.catalog, ds.records) == dataset_digest(generate_synthetic(sc).catalog, ds.records);
  return {"container_roundtrips", data_ok && params_ok && cache_ok && digest_ok,
          std::string("SRNKDATA ") + (data_ok ? "ok" : "MISMATCH") + ", SRNKPARM " + (params_ok ? "ok" : "MISMATCH") +
              ", SRNKCACH " + (cache_ok ? "ok" : "MISMATCH") + ", digest " + (digest_ok ? "stable" : "UNSTABLE")};
}

inline CheckResult numerics_properties(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  bool lse_bounds = true;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = rng.uniform_int(1, 40);
    Matrix m(1, n);
    for (double& x : m.flat()) x = 20.0 * rng.normal();
    const auto s = softmax_rows(m);
    worst = std::max(worst, std::abs(std::accumulate(s.flat().begin(), s.flat().end(), 0.0) - 1.0));
    const double lse = logsumexp(m.flat());
    const double mx = *std::max_element(m.flat().begin(), m.flat().end());
    lse_bounds = lse_bounds && lse >= mx && lse <= mx + std::log(static_cast<double>(n)) + 1e-12;
  }
  return {"numerics_properties", worst <= 1e-12 && lse_bounds,
          "softmax row-sum error " + sci(worst) + (lse_bounds ? ", logsumexp bounds hold" : ", logsumexp bounds VIOLATED")};
}

}  // namespace verify_detail

inline std::vector<CheckResult> run_verification(std::uint64_t seed = 20240601) {
  using namespace verify_detail;
  const std::vector<std::pair<std::string, std::function<CheckResult()>>> checks = {
      {"oracle_equivalence", [&] { return oracle_equivalence(seed); }},
      {"worked_values", [] { return worked_values(); }},
      {"chunk_invariance", [&] { return chunk_invariance(seed); }},
      {"loss_gradients", [&] { return loss_gradients(seed); }},
      {"translation_invariance", [&] { return translation_invariance(seed); }},
      {"ranker_gradients", [&] { return ranker_gradients(seed); }},
      {"forward_equivariance", [&] { return forward_equivariance(seed); }},
      {"container_roundtrips", [&] { return container_roundtrips(seed); }},
      {"numerics_properties", [&] { return numerics_properties(seed); }},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, check] : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {name, false, std::string("threw: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace srank

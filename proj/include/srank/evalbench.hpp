#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srank/data.hpp"
#include "srank/embedding_store.hpp"
#include "srank/losses.hpp"
#include "srank/metrics.hpp"
#include "srank/training.hpp"

namespace srank {

// ---------------------------------------------------------------------------
// Loss comparison

struct LossArm {
  LossKind loss = LossKind::kLinearPairwise;
  double final_accuracy = 0.0;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> epochs_to_converge;
  bool diverged = false;
  std::string error;
  std::vector<double> loss_trace;
};

/// Trains one model per loss from identical seeds, data and initial weights.
/// A diverging arm is reported, not rethrown.
inline std::vector<LossArm> compare_losses(const Dataset& data, const TrainConfig& base, double holdout_fraction = 0.2) {
  const auto [train, heldout] = split_holdout(data.records, holdout_fraction);
  std::vector<LossArm> arms;
  for (LossKind kind : {LossKind::kLinearPairwise, LossKind::kMle}) {
    TrainConfig cfg = base;
    cfg.loss = kind;
    cfg.chunk_size = kind == LossKind::kMle ? 0 : base.chunk_size;
    LossArm arm;
    arm.loss = kind;
    TrainerState s = init_trainer(cfg, data.catalog);
    try {
      self_train_cycle(s, cfg, train, data.catalog);
      if (!heldout.empty()) arm.final_accuracy = evaluate(s.params, s.cache, heldout, data.catalog).top_one_accuracy;
    } catch (const TrainingError& e) {
      arm.diverged = true;
      arm.error = e.what();
    }
    arm.epochs_run = s.epoch;
    if (s.converged) arm.epochs_to_converge = s.epoch;
    arm.loss_trace = s.loss_trace();
    arms.push_back(std::move(arm));
  }
  return arms;
}

inline std::vector<LossArm> compare_losses(const SyntheticConfig& data_cfg, const TrainConfig& base,
                                           double holdout_fraction = 0.2) {
  return compare_losses(generate_synthetic(data_cfg), base, holdout_fraction);
}

// ---------------------------------------------------------------------------
// Loss scaling benchmark

struct BenchPoint {
  std::size_t n = 0;
  std::size_t inner_iterations = 0;
  double linear_seconds = 0.0;     // median per call
  double quadratic_seconds = 0.0;  // median per call
  double max_abs_difference = 0.0;
};

struct BenchReport {
  std::size_t repetitions = 0;
  std::vector<BenchPoint> points;
  double linear_slope = 0.0;
  double quadratic_slope = 0.0;
  double linear_doubling_ratio = 0.0;
  double quadratic_doubling_ratio = 0.0;
  double max_abs_difference = 0.0;
};

struct BenchOptions {
  std::size_t repetitions = 5;
  double min_measurement_seconds = 0.02;
  std::uint64_t seed = 7;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(k, v.size() - 1)];
}

/// Least-squares slope of ln(y) against ln(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline volatile double bench_sink = 0.0;

/// Median seconds per call. Inner iterations double until one measurement
/// lasts at least `min_seconds`; the calibration runs double as warm-up.
template <class Fn>
double time_per_call(Fn&& fn, std::size_t reps, double min_seconds, std::size_t& iterations) {
  using clock = std::chrono::steady_clock;
  auto measure = [&](std::size_t iters) {
    const auto t0 = clock::now();
    double acc = 0.0;
    for (std::size_t i = 0; i < iters; ++i) acc += fn();
    const auto t1 = clock::now();
    bench_sink = bench_sink + acc;
    return std::chrono::duration<double>(t1 - t0).count();
  };
  iterations = 1;
  while (measure(iterations) < min_seconds) iterations *= 2;
  std::vector<double> samples;
  for (std::size_t r = 0; r < reps; ++r) samples.push_back(measure(iterations) / static_cast<double>(iterations));
  return median(samples);
}

}  // namespace detail

/// Times linear_pairwise_loss against quadratic_pairwise_oracle on random
/// inputs per size, and fits log-log slopes over the upper half of the sizes.
inline BenchReport bench_loss_scaling(std::vector<std::size_t> sizes, BenchOptions opt = {}) {
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (sizes.size() < 2 || sizes.front() < 2) throw ConfigError("bench needs at least 2 distinct sizes, each >= 2");
  if (sizes.back() < 16 * sizes.front()) throw ConfigError("bench sizes must span at least 16x");
  if (opt.repetitions < 5) throw ConfigError("bench needs at least 5 repetitions");

  BenchReport rep;
  rep.repetitions = opt.repetitions;
  Rng rng(opt.seed);
  for (std::size_t n : sizes) {
    std::vector<double> f(n);
    for (double& x : f) x = 3.0 * rng.normal();
    const LabelVector y = one_hot(n, rng.uniform_int(0, n - 1));

    BenchPoint p;
    p.n = n;
    p.max_abs_difference = std::abs(linear_pairwise_loss(f, y).value - quadratic_pairwise_oracle(f, y));
    std::size_t iters = 0;
    p.linear_seconds = detail::time_per_call([&] { return linear_pairwise_loss(f, y).value; }, opt.repetitions,
                                             opt.min_measurement_seconds, iters);
    p.inner_iterations = iters;
    p.quadratic_seconds = detail::time_per_call([&] { return quadratic_pairwise_oracle(f, y); }, opt.repetitions,
                                                opt.min_measurement_seconds, iters);
    rep.max_abs_difference = std::max(rep.max_abs_difference, p.max_abs_difference);
    rep.points.push_back(p);
  }

  std::vector<double> xs, lin, quad;
  for (std::size_t i = rep.points.size() / 2; i < rep.points.size(); ++i) {
    xs.push_back(static_cast<double>(rep.points[i].n));
    lin.push_back(rep.points[i].linear_seconds);
    quad.push_back(rep.points[i].quadratic_seconds);
  }
  if (xs.size() < 2) {
    xs.insert(xs.begin(), static_cast<double>(rep.points.front().n));
    lin.insert(lin.begin(), rep.points.front().linear_seconds);
    quad.insert(quad.begin(), rep.points.front().quadratic_seconds);
  }
  rep.linear_slope = detail::loglog_slope(xs, lin);
  rep.quadratic_slope = detail::loglog_slope(xs, quad);

  // Growth between the two largest sizes, normalised to one doubling.
  const auto& hi = rep.points[rep.points.size() - 1];
  const auto& lo = rep.points[rep.points.size() - 2];
  const double doublings = std::log2(static_cast<double>(hi.n) / static_cast<double>(lo.n));
  rep.linear_doubling_ratio = std::pow(hi.linear_seconds / lo.linear_seconds, 1.0 / doublings);
  rep.quadratic_doubling_ratio = std::pow(hi.quadratic_seconds / lo.quadratic_seconds, 1.0 / doublings);
  return rep;
}

/// Parses "256..16384" (powers of two between the bounds) or "10,20,40".
inline std::vector<std::size_t> parse_sizes(const std::string& spec) {
  std::vector<std::size_t> out;
  const auto dots = spec.find("..");
  try {
    if (dots != std::string::npos) {
      const std::size_t lo = std::stoul(spec.substr(0, dots));
      const std::size_t hi = std::stoul(spec.substr(dots + 2));
      if (lo < 1 || hi < lo) throw ConfigError("bad size range " + spec);
      for (std::size_t n = lo; n <= hi; n *= 2) out.push_back(n);
    } else {
      std::size_t start = 0;
      while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const auto tok = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) out.push_back(std::stoul(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse sizes '" + spec + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inference latency: cached document embeddings vs re-encoding per query

struct LatencyStats {
  double median_seconds = 0.0;
  double p95_seconds = 0.0;
};

struct InferenceBench {
  std::size_t queries = 0;
  std::size_t repetitions = 0;
  LatencyStats cached;
  LatencyStats reencode;
  double ratio = 0.0;  // reencode median / cached median
};

inline InferenceBench bench_inference(const RankerParams& params, const EmbeddingCache& cache,
                                      const std::vector<RankingRecord>& records, const DocumentCatalog& catalog,
                                      std::size_t repetitions = 5) {
  if (records.empty()) throw EvalError("bench_inference needs at least one record");
  using clock = std::chrono::steady_clock;
  const auto idx = catalog.group_index();
  std::vector<double> cached_t, reencode_t;
  double sink = 0.0;

  auto run_cached = [&](const RankingRecord& r) {
    const auto& g = catalog.groups[idx.at(r.group_id)];
    Matrix e_d(g.documents.size(), params.d_model());
    for (std::size_t j = 0; j < g.documents.size(); ++j) {
      const auto& v = cache.at(g.documents[j].id);
      std::copy(v.begin(), v.end(), e_d.row(j).begin());
    }
    const auto e_q = encode(params.encoder, r.features);
    return predict(params, e_q, e_d, g.empty_index()).value_or(0);
  };
  auto run_reencode = [&](const RankingRecord& r) {
    const auto& g = catalog.groups[idx.at(r.group_id)];
    Matrix e_d(g.documents.size(), params.d_model());
    for (std::size_t j = 0; j < g.documents.size(); ++j) {
      const auto v = encode(params.encoder, g.documents[j].features);
      std::copy(v.begin(), v.end(), e_d.row(j).begin());
    }
    const auto e_q = encode(params.encoder, r.features);
    return predict(params, e_q, e_d, g.empty_index()).value_or(0);
  };

  for (const auto& r : records) sink += static_cast<double>(run_cached(r) + run_reencode(r));  // warm-up
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (const auto& r : records) {
      auto t0 = clock::now();
      sink += static_cast<double>(run_cached(r));
      auto t1 = clock::now();
      sink += static_cast<double>(run_reencode(r));
      auto t2 = clock::now();
      cached_t.push_back(std::chrono::duration<double>(t1 - t0).count());
      reencode_t.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
  }
  detail::bench_sink = detail::bench_sink + sink;

  InferenceBench b;
  b.queries = records.size();
  b.repetitions = repetitions;
  b.cached = {detail::median(cached_t), detail::percentile(cached_t, 0.95)};
  b.reencode = {detail::median(reencode_t), detail::percentile(reencode_t, 0.95)};
  b.ratio = b.reencode.median_seconds / b.cached.median_seconds;
  return b;
}

}  // namespace srank

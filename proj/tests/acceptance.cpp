// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "srank/srank.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

double median(std::vector<double> v) { return srank::detail::median(std::move(v)); }

srank::LabelVector random_labels(srank::Rng& rng, std::size_t n) { return srank::one_hot(n, rng.uniform_int(0, n - 1)); }

std::vector<double> random_scores(srank::Rng& rng, std::size_t n, double scale = 3.0) {
  std::vector<double> f(n);
  for (double& x : f) x = scale * rng.normal();
  return f;
}

// 1 -------------------------------------------------------------------------
Outcome oracle_equivalence() {
  const auto t0 = clock_type::now();
  srank::Rng rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = rng.uniform_int(2, 64);
    const auto f = random_scores(rng, n);
    const auto y = random_labels(rng, n);
    worst = std::max(worst, std::abs(srank::linear_pairwise_loss(f, y).value - srank::quadratic_pairwise_oracle(f, y)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0,
          "max |linear - quadratic| = " + num(worst) + " (<= 1e-9) over 1000 sets, " + num(secs, 3) + " s (< 5 s)"};
}

// 2 -------------------------------------------------------------------------
Outcome worked_values() {
  const double a = srank::linear_pairwise_loss(std::vector<double>{0, 0, 0}, srank::LabelVector{1, 0, 0}).value;
  const double b = srank::linear_pairwise_loss(std::vector<double>{2, 0}, srank::LabelVector{1, 0}).value;
  const double ea = std::abs(a - std::log(2.0));
  const double eb = std::abs(b - std::log1p(std::exp(-2.0)));
  srank::Rng rng(1002);
  double pair = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto f = random_scores(rng, 2, 5.0);
    const auto y = random_labels(rng, 2);
    pair = std::max(pair, std::abs(srank::linear_pairwise_loss(f, y).value - srank::mle_loss(f, y).value));
  }
  return {ea <= 1e-12 && eb <= 1e-12 && pair <= 1e-12,
          "ln2 error " + num(ea) + ", ln(1+e^-2) error " + num(eb) + ", n=2 pairwise vs MLE max diff " + num(pair) +
              " over 100 pairs (all <= 1e-12)"};
}

// 3 -------------------------------------------------------------------------
Outcome chunk_invariance() {
  srank::Rng rng(1003);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto f = random_scores(rng, 50);
    const auto y = random_labels(rng, 50);
    const auto full = srank::linear_pairwise_loss(f, y);
    for (std::size_t c : {2, 3, 7, 49}) {
      const auto part = srank::chunked_pairwise_loss(f, y, c);
      worst = std::max(worst, std::abs(part.value - full.value));
      for (std::size_t i = 0; i < 50; ++i) worst = std::max(worst, std::abs(part.grad[i] - full.grad[i]));
    }
  }

  srank::SyntheticConfig sc;
  sc.seed = 31;
  sc.n_queries = 2000;
  const auto ds = srank::generate_synthetic(sc);
  srank::TrainConfig tc;
  tc.max_epochs = 5;
  tc.refresh_interval = 2;
  tc.seed = 31;
  auto trace_for = [&](std::size_t chunk) {
    tc.chunk_size = chunk;
    srank::TrainerState s = srank::init_trainer(tc, ds.catalog);
    srank::self_train_cycle(s, tc, ds.records, ds.catalog);
    return s.loss_trace();
  };
  const auto plain = trace_for(0);
  const auto chunked = trace_for(8);
  double trace_diff = plain.size() == chunked.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(plain.size(), chunked.size()); ++i)
    trace_diff = std::max(trace_diff, std::abs(plain[i] - chunked[i]));
  return {worst <= 1e-9 && trace_diff <= 1e-9,
          "n=50, chunks {2,3,7,49}: max value/grad deviation " + num(worst) +
              "; chunk-size-8 training trace vs unchunked over " + std::to_string(plain.size()) +
              " epochs: max diff " + num(trace_diff) + " (both <= 1e-9)"};
}

// 4 -------------------------------------------------------------------------
Outcome gradient_checks() {
  const auto t0 = clock_type::now();
  srank::Rng rng(1004);
  double loss_worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = rng.uniform_int(2, 16);
    const auto f = random_scores(rng, n, 2.0);
    const auto y = random_labels(rng, n);
    for (auto fn : {&srank::linear_pairwise_loss, &srank::mle_loss}) {
      const auto out = fn(f, y);
      loss_worst = std::max(loss_worst, srank::check_gradient([&](std::span<const double> x) { return fn(x, y).value; },
                                                              f, out.grad, 1e-5));
    }
  }
  double model_worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = srank::verify_detail::tiny_model(4000 + seed);
    params = m.params.parameter_count();
    for (auto kind : {srank::LossKind::kLinearPairwise, srank::LossKind::kMle}) {
      const auto step = srank::loss_and_gradients(m.params, m.x_q, m.e_d, m.y, kind);
      srank::RankerParams probe = m.params;
      model_worst = std::max(
          model_worst, srank::check_gradient(
                           [&](std::span<const double> x) {
                             srank::unflatten_into(probe, x);
                             return srank::loss_and_gradients(probe, m.x_q, m.e_d, m.y, kind).loss.value;
                           },
                           srank::flatten(m.params), srank::flatten(step.grads), srank::verify_detail::kModelGradientStep));
    }
  }
  const double secs = seconds_since(t0);
  return {loss_worst <= 1e-6 && model_worst <= 1e-4 && secs < 30.0,
          "loss max rel error " + num(loss_worst) + " (<= 1e-6, n <= 16, h=1e-5); full model (d_model=8, H=2, hidden=16, " +
              std::to_string(params) + " params) max rel error " + num(model_worst) + " (<= 1e-4); " + num(secs, 3) +
              " s (< 30 s)"};
}

// 5 -------------------------------------------------------------------------
Outcome complexity() {
  const auto t0 = clock_type::now();
  const auto r = srank::bench_loss_scaling(srank::parse_sizes("256..16384"), {});
  const double secs = seconds_since(t0);
  const bool ok = r.linear_slope <= 1.3 && r.quadratic_slope >= 1.7 && r.linear_doubling_ratio <= 2.6 &&
                  r.quadratic_doubling_ratio >= 3.0 && r.max_abs_difference <= 1e-9 && secs < 120.0;
  return {ok, "slopes linear " + num(r.linear_slope, 3) + " (<= 1.3), quadratic " + num(r.quadratic_slope, 3) +
                  " (>= 1.7); doubling at 16384: linear " + num(r.linear_doubling_ratio, 3) + "x (<= 2.6), quadratic " +
                  num(r.quadratic_doubling_ratio, 3) + "x (>= 3); " + num(secs, 3) + " s (< 120 s)"};
}

// 6, 7 -----------------------------------------------------------------------
struct SeedRun {
  double accuracy = 0.0;
  double baseline = 0.0;
  double seconds = 0.0;
  double worst_refresh_delta = INFINITY;  // adapted - pre, minimum over refreshes
  double worst_immediate_delta = INFINITY;
  std::size_t refreshes = 0;
  bool frozen_windows = true;
  std::size_t window_checks = 0;
};

SeedRun default_task_run(std::uint64_t seed) {
  srank::SyntheticConfig sc;  // 22 groups, sizes 3-26 plus Empty, noise 0.3, 10k queries, 10% empty
  sc.seed = seed;
  const auto ds = srank::generate_synthetic(sc);
  const auto [train, held] = srank::split_holdout(ds.records, 0.2);
  srank::TrainConfig tc;
  tc.seed = seed;
  tc.refresh_interval = 10;
  tc.max_epochs = 21;
  tc.tolerance = 0.0;

  SeedRun out;
  const auto t0 = clock_type::now();
  srank::TrainerState s = srank::init_trainer(tc, ds.catalog);
  std::map<std::uint64_t, srank::EmbeddingCache> windows{{s.cache.version, s.cache}};
  srank::self_train_cycle(s, tc, train, ds.catalog, held, [&](const srank::EpochLog&) {
    const auto it = windows.find(s.cache.version);
    if (it == windows.end()) {
      windows.emplace(s.cache.version, s.cache);
    } else {
      out.frozen_windows = out.frozen_windows && it->second == s.cache;
      ++out.window_checks;
    }
  });
  out.seconds = seconds_since(t0);
  out.accuracy = srank::evaluate(s.params, s.cache, held, ds.catalog).top_one_accuracy;
  out.baseline = srank::nearest_prototype_baseline(held, ds.catalog).top_one_accuracy;
  for (const auto& e : srank::refresh_effects(s.log)) {
    ++out.refreshes;
    out.worst_immediate_delta = std::min(out.worst_immediate_delta, e.immediate - e.pre);
    if (e.adapted) out.worst_refresh_delta = std::min(out.worst_refresh_delta, *e.adapted - e.pre);
  }
  return out;
}

std::vector<SeedRun>& default_runs() {
  static std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> r;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::cerr << "  default task, seed " << seed << "..." << std::endl;
      r.push_back(default_task_run(seed));
    }
    return r;
  }();
  return runs;
}

Outcome learning() {
  const auto& runs = default_runs();
  std::vector<double> acc, base, margin;
  double slowest = 0.0;
  std::string per_seed;
  for (const auto& r : runs) {
    acc.push_back(r.accuracy);
    base.push_back(r.baseline);
    margin.push_back(r.accuracy - r.baseline);
    slowest = std::max(slowest, r.seconds);
    per_seed += (per_seed.empty() ? "" : " ") + num(r.accuracy, 4) + "/" + num(r.baseline, 4);
  }
  const bool ok = median(acc) >= 0.90 && median(margin) > 0.0 && median(acc) > median(base) && slowest < 300.0;
  return {ok, "held-out accuracy median " + num(median(acc)) + " (>= 0.90) vs nearest-prototype median " +
                  num(median(base)) + "; per seed ranker/baseline " + per_seed + "; slowest seed " + num(slowest, 3) +
                  " s (< 300 s)"};
}

Outcome refresh() {
  const auto& runs = default_runs();
  std::vector<double> delta, immediate;
  bool frozen = true;
  std::size_t checks = 0, refreshes = 0;
  for (const auto& r : runs) {
    delta.push_back(r.worst_refresh_delta);
    immediate.push_back(r.worst_immediate_delta);
    frozen = frozen && r.frozen_windows;
    checks += r.window_checks;
    refreshes += r.refreshes;
  }
  const bool ok = refreshes == 2 * runs.size() && median(delta) >= -0.01 && frozen && checks > 0;
  return {ok, "post-refresh minus pre-refresh accuracy, worst refresh per seed, median " + num(median(delta)) +
                  " (>= -0.01) over " + std::to_string(refreshes) + " refreshes (interval 10); median immediate delta " +
                  num(median(immediate)) + " (logged); cache bitwise constant within windows: " +
                  (frozen ? "yes" : "NO") + " (" + std::to_string(checks) + " epoch checks)"};
}

// 8 -------------------------------------------------------------------------
Outcome mutable_batches() {
  srank::SyntheticConfig sc;
  sc.seed = 8;
  sc.n_groups = 48;
  sc.n_queries = 5000;
  const auto ds = srank::generate_synthetic(sc);
  srank::Rng rng(8);
  const auto params = srank::init_params({sc.d_in, 64, 4, 64}, rng);
  const auto cache = srank::build_cache(params.encoder, ds.catalog);
  const srank::BatchIterator batches(ds.records, ds.catalog, cache, 8);
  const auto idx = ds.catalog.group_index();

  std::set<std::size_t> sizes;
  std::size_t total = 0, batch_count = 0, mismatched = 0;
  batches.for_each(1, [&](const srank::Batch& b) {
    const std::size_t want = ds.catalog.groups[idx.at(b.record->group_id)].documents.size();
    if (b.size() != want || b.embeddings->rows() != want) ++mismatched;
    // The forward pass consumes the set at its own size.
    if (srank::forward(params, srank::encode(params.encoder, b.record->features), *b.embeddings).scores.size() != want)
      ++mismatched;
    sizes.insert(b.size());
    total += b.size();
    ++batch_count;
  });
  std::size_t expected = 0;
  for (const auto& r : ds.records) expected += ds.catalog.groups[idx.at(r.group_id)].documents.size();
  bool covers = true;
  for (std::size_t n = 4; n <= 27; ++n) covers = covers && sizes.count(n);
  const bool ok = covers && total == expected && mismatched == 0 && batch_count == ds.records.size();
  return {ok, "one epoch over " + std::to_string(batch_count) + " batches, sizes " + std::to_string(*sizes.begin()) +
                  ".." + std::to_string(*sizes.rbegin()) + " (" + std::to_string(sizes.size()) +
                  " distinct, every size in [4,27]: " + (covers ? "yes" : "NO") + "); sum of batch sizes " +
                  std::to_string(total) + " vs sum of (group size + 1) " + std::to_string(expected) +
                  "; padded or truncated sets: " + std::to_string(mismatched)};
}

// 9 -------------------------------------------------------------------------
Outcome empty_gating() {
  std::vector<double> f1;
  std::size_t checked = 0, violations = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::cerr << "  20% empty task, seed " << seed << "..." << std::endl;
    srank::SyntheticConfig sc;
    sc.seed = 900 + seed;
    sc.empty_rate = 0.2;
    const auto ds = srank::generate_synthetic(sc);
    const auto [train, held] = srank::split_holdout(ds.records, 0.2);
    srank::TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = 12;
    tc.tolerance = 0.0;
    srank::TrainerState s = srank::init_trainer(tc, ds.catalog);
    srank::self_train_cycle(s, tc, train, ds.catalog);
    const auto report = srank::evaluate(s.params, s.cache, held, ds.catalog);
    f1.push_back(report.silent_f1);
    per_seed += (per_seed.empty() ? "" : " ") + num(report.silent_f1, 4);

    const srank::BatchIterator batches(held, ds.catalog, s.cache, 0);
    for (std::size_t i = 0; i < batches.size(); ++i) {
      const auto b = batches.batch(i);
      const auto e_q = srank::encode(s.params.encoder, b.record->features);
      const auto scores = srank::forward(s.params, e_q, *b.embeddings).scores;
      const double top = *std::max_element(scores.begin(), scores.end());
      std::size_t first_max = 0;
      while (scores[first_max] != top) ++first_max;
      const bool empty_wins = first_max == b.empty_index;
      const auto pred = srank::predict(s.params, e_q, *b.embeddings, b.empty_index);
      violations += (pred.has_value() == empty_wins) || (pred && *pred != first_max);
      ++checked;
    }
  }
  const bool ok = median(f1) >= 0.85 && violations == 0;
  return {ok, "silent F1 median " + num(median(f1)) + " (>= 0.85), per seed " + per_seed + "; NO_ANSWER iff Empty wins: " +
                  std::to_string(violations) + " violations in " + std::to_string(checked) + " predictions"};
}

// 10 ------------------------------------------------------------------------
template <class Write>
std::string bytes_of(Write&& write) {
  std::ostringstream os(std::ios::binary);
  write(os);
  return os.str();
}

int run_cli(const std::string& args, double& secs) {
  const auto t0 = clock_type::now();
  const std::string cmd = "'" SRANK_CLI_PATH "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  secs = seconds_since(t0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism_and_formats() {
  srank::SyntheticConfig sc;
  sc.seed = 10;
  sc.n_queries = 3000;
  const auto a = srank::generate_synthetic(sc);
  const auto b = srank::generate_synthetic(sc);
  const bool digests = srank::dataset_digest(a.catalog, a.records) == srank::dataset_digest(b.catalog, b.records);

  srank::TrainConfig tc;
  tc.seed = 10;
  tc.max_epochs = 3;
  tc.refresh_interval = 2;
  auto train = [&] {
    srank::TrainerState s = srank::init_trainer(tc, a.catalog);
    srank::self_train_cycle(s, tc, a.records, a.catalog);
    return s;
  };
  const auto s1 = train();
  const auto s2 = train();
  const bool traces = s1.loss_trace() == s2.loss_trace() && s1.params == s2.params && s1.cache == s2.cache;

  const std::string data_bytes = bytes_of([&](std::ostream& os) { srank::write_dataset(os, a.catalog, a.records); });
  std::istringstream data_in(data_bytes, std::ios::binary);
  const auto data_back = srank::read_dataset(data_in);
  const bool data_rt = data_back == a &&
                       bytes_of([&](std::ostream& os) { srank::write_dataset(os, data_back.catalog, data_back.records); }) ==
                           data_bytes;

  const std::string param_bytes = bytes_of([&](std::ostream& os) { srank::write_params(os, s1.params); });
  std::istringstream param_in(param_bytes, std::ios::binary);
  const auto params_back = srank::read_params(param_in);
  const bool params_rt =
      params_back == s1.params && bytes_of([&](std::ostream& os) { srank::write_params(os, params_back); }) == param_bytes;

  const std::string cache_bytes = bytes_of([&](std::ostream& os) { srank::write_cache(os, s1.cache); });
  std::istringstream cache_in(cache_bytes, std::ios::binary);
  const auto cache_back = srank::read_cache(cache_in);
  const bool cache_rt =
      cache_back == s1.cache && bytes_of([&](std::ostream& os) { srank::write_cache(os, cache_back); }) == cache_bytes;

  double verify_secs = 0.0;
  const int verify_code = run_cli("verify", verify_secs);
  const bool ok = digests && traces && data_rt && params_rt && cache_rt && verify_code == 0 && verify_secs < 120.0;
  auto yn = [](bool v) { return v ? std::string("yes") : std::string("NO"); };
  return {ok, "dataset digests equal: " + yn(digests) + "; loss traces equal: " + yn(traces) +
                  "; bit-exact round-trips SRNKDATA " + yn(data_rt) + ", SRNKPARM " + yn(params_rt) + ", SRNKCACH " +
                  yn(cache_rt) + "; `srank verify` exit " + std::to_string(verify_code) + " in " + num(verify_secs, 3) +
                  " s (< 120 s)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"worked values", worked_values},
      {"chunk invariance", chunk_invariance},
      {"gradient checks", gradient_checks},
      {"complexity", complexity},
      {"learning", learning},
      {"self-training refresh", refresh},
      {"mutable batches", mutable_batches},
      {"empty gating", empty_gating},
      {"determinism and formats", determinism_and_formats},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}

#pragma once

// Self-training loop.
//
// Document embeddings are read from a frozen cache. Each step updates the
// ranker and, through the query path only, the shared encoder. Every
// `refresh_interval` epochs the cache is rebuilt from the current encoder.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srank/batching.hpp"
#include "srank/embedding_store.hpp"
#include "srank/error.hpp"
#include "srank/losses.hpp"
#include "srank/metrics.hpp"
#include "srank/ranker.hpp"

namespace srank {

struct TrainConfig {
  RankerConfig model;
  LossKind loss = LossKind::kLinearPairwise;
  std::size_t chunk_size = 0;  // 0: unchunked
  std::size_t refresh_interval = 10;
  double learning_rate = 0.05;
  std::size_t max_epochs = 30;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  // Held-out accuracy every k epochs (0: only around refreshes and at the end).
  std::size_t eval_every = 0;

  void validate() const {
    model.validate();
    if (refresh_interval == 0) throw ConfigError("refresh interval must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (chunk_size == 1) throw ConfigError("chunk_size must be 0 (off) or >= 2");
    if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  }
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::uint64_t cache_version = 0;  // version used during the epoch
  bool refreshed = false;           // cache rebuilt after this epoch
  bool follows_refresh = false;     // first epoch trained on a rebuilt cache
  std::optional<double> heldout_accuracy;
  // Only on refresh epochs: held-out accuracy just before and just after the rebuild.
  std::optional<double> pre_refresh_accuracy;
  std::optional<double> immediate_post_refresh_accuracy;
};

/// Held-out accuracy around one cache refresh. `adapted` is measured after the
/// first epoch trained on the rebuilt cache; the rebuild shifts the calibration
/// of the Empty candidate and one epoch re-aligns it.
struct RefreshEffect {
  std::size_t epoch = 0;
  double pre = 0.0;
  double immediate = 0.0;
  std::optional<double> adapted;
};

struct TrainerState {
  RankerParams params;
  EmbeddingCache cache;
  std::size_t epoch = 0;
  bool converged = false;
  std::vector<EpochLog> log;

  std::vector<double> loss_trace() const {
    std::vector<double> t;
    for (const auto& e : log) t.push_back(e.mean_loss);
    return t;
  }
};

/// Fresh parameters from the seed, and the initial cache from that encoder.
inline TrainerState init_trainer(const TrainConfig& cfg, const DocumentCatalog& catalog) {
  cfg.validate();
  if (cfg.model.d_in != catalog.d_in)
    throw ConfigError("model d_in " + std::to_string(cfg.model.d_in) + " != dataset d_in " +
                      std::to_string(catalog.d_in));
  Rng rng(cfg.seed);
  TrainerState s;
  s.params = init_params(cfg.model, rng);
  s.cache = build_cache(s.params.encoder, catalog);
  return s;
}

/// One pass over `train` with one SGD step per candidate set. Returns the mean loss.
inline double train_epoch(TrainerState& s, const TrainConfig& cfg, const std::vector<RankingRecord>& train,
                          const DocumentCatalog& catalog) {
  const BatchIterator batches(train, catalog, s.cache, cfg.seed);
  const std::size_t epoch = s.epoch + 1;
  double total = 0.0;
  std::size_t step = 0;
  batches.for_each(epoch, [&](const Batch& b) {
    StepResult r =
        loss_and_gradients(s.params, b.record->features, *b.embeddings, b.labels, cfg.loss, cfg.chunk_size);
    if (!std::isfinite(r.loss.value))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                          " (query " + b.record->query_id + ")");
    try {
      sgd_step(s.params, r.grads, cfg.learning_rate);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(step));
    }
    total += r.loss.value;
    ++step;
  });
  return train.empty() ? 0.0 : total / static_cast<double>(train.size());
}

using EpochObserver = std::function<void(const EpochLog&)>;

/// Runs epochs until convergence or cfg.max_epochs. Convergence: at a refresh,
/// the epoch mean loss changed by less than `tolerance` (relative) since the
/// previous refresh.
inline void self_train_cycle(TrainerState& s, const TrainConfig& cfg, const std::vector<RankingRecord>& train,
                             const DocumentCatalog& catalog, const std::vector<RankingRecord>& heldout = {},
                             const EpochObserver& observer = {}) {
  cfg.validate();
  if (s.cache.entries.empty()) s.cache = build_cache(s.params.encoder, catalog, s.cache.version);
  std::optional<double> loss_at_last_refresh;
  auto heldout_accuracy = [&]() -> std::optional<double> {
    if (heldout.empty()) return std::nullopt;
    return evaluate(s.params, s.cache, heldout, catalog).top_one_accuracy;
  };

  while (s.epoch < cfg.max_epochs && !s.converged) {
    EpochLog entry;
    entry.cache_version = s.cache.version;
    entry.mean_loss = train_epoch(s, cfg, train, catalog);
    ++s.epoch;
    entry.epoch = s.epoch;

    if (refresh_policy(s.epoch, cfg.refresh_interval) == RefreshDecision::kRefresh) {
      entry.pre_refresh_accuracy = heldout_accuracy();
      s.cache = build_cache(s.params.encoder, catalog, s.cache.version);
      entry.refreshed = true;
      entry.immediate_post_refresh_accuracy = heldout_accuracy();
      entry.heldout_accuracy = entry.immediate_post_refresh_accuracy;
      if (loss_at_last_refresh) {
        const double prev = *loss_at_last_refresh;
        const double rel = std::abs(entry.mean_loss - prev) / std::max(std::abs(prev), 1e-300);
        s.converged = rel < cfg.tolerance;
      }
      loss_at_last_refresh = entry.mean_loss;
    } else {
      entry.follows_refresh = !s.log.empty() && s.log.back().refreshed;
      if (entry.follows_refresh || (cfg.eval_every != 0 && s.epoch % cfg.eval_every == 0) ||
          s.epoch == cfg.max_epochs)
        entry.heldout_accuracy = heldout_accuracy();
    }
    s.log.push_back(entry);
    if (observer) observer(entry);
  }
}

inline std::vector<RefreshEffect> refresh_effects(const std::vector<EpochLog>& log) {
  std::vector<RefreshEffect> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (!log[i].refreshed || !log[i].pre_refresh_accuracy) continue;
    RefreshEffect e{log[i].epoch, *log[i].pre_refresh_accuracy, *log[i].immediate_post_refresh_accuracy, {}};
    if (i + 1 < log.size() && log[i + 1].follows_refresh) e.adapted = log[i + 1].heldout_accuracy;
    out.push_back(e);
  }
  return out;
}

}  // namespace srank

#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "srank/batching.hpp"
#include "srank/data.hpp"
#include "srank/embedding_store.hpp"
#include "srank/ranker.hpp"

namespace srank {

struct SizeBucket {
  std::size_t correct = 0;
  std::size_t total = 0;

  friend bool operator==(const SizeBucket&, const SizeBucket&) = default;
};

/// Top-one accuracy plus abstention quality. Silent precision and recall use
/// the convention 0/0 = 1; F1 is 0 when both are 0.
struct EvalReport {
  std::size_t n_queries = 0;
  std::size_t correct = 0;
  std::size_t gold_empty = 0;
  std::size_t predicted_no_answer = 0;
  std::size_t correct_no_answer = 0;
  double top_one_accuracy = 0.0;
  double silent_precision = 1.0;
  double silent_recall = 1.0;
  double silent_f1 = 1.0;
  std::map<std::size_t, SizeBucket> by_candidate_count;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Accumulates top-one decisions into an EvalReport.
class EvalTally {
 public:
  // `prediction` is the chosen candidate index, or nullopt for NO_ANSWER.
  void add(std::optional<std::size_t> prediction, std::size_t gold_index, std::size_t empty_index,
           std::size_t candidate_count) {
    const bool gold_is_empty = gold_index == empty_index;
    const bool hit = prediction ? *prediction == gold_index : gold_is_empty;
    ++r_.n_queries;
    r_.correct += hit ? 1 : 0;
    r_.gold_empty += gold_is_empty ? 1 : 0;
    if (!prediction) {
      ++r_.predicted_no_answer;
      r_.correct_no_answer += gold_is_empty ? 1 : 0;
    }
    auto& bucket = r_.by_candidate_count[candidate_count];
    ++bucket.total;
    bucket.correct += hit ? 1 : 0;
  }

  EvalReport finish() const {
    if (r_.n_queries == 0) throw EvalError("cannot evaluate an empty record set");
    EvalReport r = r_;
    auto ratio = [](std::size_t num, std::size_t den) {
      return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    r.top_one_accuracy = ratio(r.correct, r.n_queries);
    r.silent_precision = ratio(r.correct_no_answer, r.predicted_no_answer);
    r.silent_recall = ratio(r.correct_no_answer, r.gold_empty);
    const double ps = r.silent_precision + r.silent_recall;
    r.silent_f1 = ps == 0.0 ? 0.0 : 2.0 * r.silent_precision * r.silent_recall / ps;
    return r;
  }

 private:
  EvalReport r_;
};

inline EvalReport evaluate(const RankerParams& params, const EmbeddingCache& cache,
                           const std::vector<RankingRecord>& records, const DocumentCatalog& catalog) {
  if (records.empty()) throw EvalError("cannot evaluate an empty record set");
  const BatchIterator batches(records, catalog, cache, 0);
  EvalTally tally;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const Batch b = batches.batch(i);
    const auto e_q = encode(params.encoder, b.record->features);
    tally.add(predict(params, e_q, *b.embeddings, b.empty_index), b.gold_index, b.empty_index, b.size());
  }
  return tally.finish();
}

/// Fixed baseline: the non-Empty document whose raw features are nearest to
/// the query. It never abstains.
inline EvalReport nearest_prototype_baseline(const std::vector<RankingRecord>& records,
                                             const DocumentCatalog& catalog) {
  const auto idx = catalog.group_index();
  EvalTally tally;
  for (const auto& r : records) {
    const auto& g = catalog.groups.at(idx.at(r.group_id));
    std::size_t best = g.documents.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.documents.size(); ++j) {
      if (g.documents[j].is_empty) continue;
      const double dist = detail::distance(r.features, g.documents[j].features);
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    const std::size_t gold = g.index_of(r.gold_id);
    tally.add(best, gold, g.empty_index(), g.documents.size());
  }
  return tally.finish();
}

}  // namespace srank

#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "srank/data.hpp"
#include "srank/embedding_store.hpp"
#include "srank/losses.hpp"
#include "srank/numerics.hpp"

namespace srank {

/// One training example: a query and its full candidate set. The size is the
/// group's document count; nothing is padded or truncated.
struct Batch {
  const RankingRecord* record = nullptr;
  const DocumentGroup* group = nullptr;
  const Matrix* embeddings = nullptr;  // n x d_model, group order, Empty included
  LabelVector labels;
  std::size_t gold_index = 0;
  std::size_t empty_index = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Yields one Batch per record per epoch, in a per-epoch shuffled order.
///
/// Embedding matrices are resolved from the cache once at construction, so
/// every batch in the iterator's lifetime sees the same frozen vectors.
class BatchIterator {
 public:
  BatchIterator(const std::vector<RankingRecord>& records, const DocumentCatalog& catalog,
                const EmbeddingCache& cache, std::uint64_t shuffle_seed)
      : records_(&records), catalog_(&catalog), seed_(shuffle_seed) {
    const auto idx = catalog.group_index();
    group_embeddings_.reserve(catalog.groups.size());
    for (const auto& g : catalog.groups) {
      const std::size_t width = g.documents.empty() ? 0 : cache.at(g.documents.front().id).size();
      Matrix m(g.documents.size(), width);
      for (std::size_t j = 0; j < g.documents.size(); ++j) {
        const auto& v = cache.at(g.documents[j].id);
        if (v.size() != width) throw ShapeError("inconsistent embedding width for " + g.documents[j].id);
        std::copy(v.begin(), v.end(), m.row(j).begin());
      }
      group_embeddings_.push_back(std::move(m));
      empty_index_.push_back(g.empty_index());
    }
    slots_.reserve(records.size());
    for (const auto& r : records) {
      const auto it = idx.find(r.group_id);
      if (it == idx.end()) throw IntegrityError("record " + r.query_id + ": unknown group " + r.group_id);
      const auto gold = catalog.groups[it->second].index_of(r.gold_id);
      if (gold == catalog.groups[it->second].documents.size())
        throw IntegrityError("record " + r.query_id + ": gold id " + r.gold_id + " is not in its group");
      slots_.push_back({it->second, gold});
    }
  }

  std::size_t size() const noexcept { return slots_.size(); }

  std::vector<std::size_t> epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(slots_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed_ ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1)));
    rng.shuffle(order);
    return order;
  }

  Batch batch(std::size_t record_index) const {
    const Slot& s = slots_.at(record_index);
    Batch b;
    b.record = &(*records_)[record_index];
    b.group = &catalog_->groups[s.group];
    b.embeddings = &group_embeddings_[s.group];
    b.labels = one_hot(b.group->documents.size(), s.gold);
    b.gold_index = s.gold;
    b.empty_index = empty_index_[s.group];
    return b;
  }

  template <class Fn>
  void for_each(std::size_t epoch, Fn&& fn) const {
    for (std::size_t i : epoch_order(epoch)) fn(batch(i));
  }

  const Matrix& group_embeddings(std::size_t group) const { return group_embeddings_.at(group); }

 private:
  struct Slot {
    std::size_t group;
    std::size_t gold;
  };

  const std::vector<RankingRecord>* records_;
  const DocumentCatalog* catalog_;
  std::uint64_t seed_;
  std::vector<Matrix> group_embeddings_;
  std::vector<std::size_t> empty_index_;
  std::vector<Slot> slots_;
};

}  // namespace srank

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "srank/binary_io.hpp"
#include "srank/data.hpp"
#include "srank/encoder.hpp"
#include "srank/error.hpp"

namespace srank {

/// Frozen document embeddings keyed by document id.
struct EmbeddingCache {
  std::map<std::string, std::vector<double>> entries;
  std::uint64_t version = 0;      // strictly increases on every rebuild
  std::uint64_t source_hash = 0;  // encoder_digest of the generating encoder

  const std::vector<double>& at(const std::string& id) const {
    const auto it = entries.find(id);
    if (it == entries.end()) throw StalenessError("embedding cache has no entry for document " + id);
    return it->second;
  }

  bool contains(const std::string& id) const { return entries.count(id) != 0; }

  /// True when the cache was not produced by this encoder state.
  bool stale_for(const Encoder& enc) const { return source_hash != encoder_digest(enc); }

  friend bool operator==(const EmbeddingCache&, const EmbeddingCache&) = default;
};

/// Encodes every document in the catalog, Empty documents included.
inline EmbeddingCache build_cache(const Encoder& enc, const DocumentCatalog& catalog,
                                  std::uint64_t previous_version = 0) {
  if (catalog.groups.empty()) throw DataError("cannot build an embedding cache from an empty catalog");
  EmbeddingCache cache;
  cache.version = previous_version + 1;
  cache.source_hash = encoder_digest(enc);
  for (const auto& g : catalog.groups) {
    bool has_empty = false;
    for (const auto& d : g.documents) {
      has_empty = has_empty || d.is_empty;
      if (!cache.entries.emplace(d.id, encode(enc, d.features)).second)
        throw DataError("duplicate document id " + d.id);
    }
    if (!has_empty) throw DataError("group " + g.id + " has no Empty document");
  }
  return cache;
}

enum class RefreshDecision { kHold, kRefresh };

/// Refresh after every `interval` completed epochs (epochs are 1-based).
inline RefreshDecision refresh_policy(std::size_t epoch, std::size_t interval) {
  if (interval == 0) throw ConfigError("refresh interval must be >= 1");
  return (epoch > 0 && epoch % interval == 0) ? RefreshDecision::kRefresh : RefreshDecision::kHold;
}

/// Single-writer, multi-reader holder. Readers take a snapshot and keep
/// using it; a refresh publishes a whole new cache in one swap.
class SharedCache {
 public:
  SharedCache() = default;
  explicit SharedCache(EmbeddingCache initial) : current_(std::make_shared<const EmbeddingCache>(std::move(initial))) {}

  std::shared_ptr<const EmbeddingCache> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  void publish(EmbeddingCache next) {
    auto fresh = std::make_shared<const EmbeddingCache>(std::move(next));
    std::lock_guard lock(mu_);
    if (current_ && fresh->version <= current_->version)
      throw DataError("cache version must increase on publish (" + std::to_string(current_->version) + " -> " +
                      std::to_string(fresh->version) + ")");
    current_ = std::move(fresh);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const EmbeddingCache> current_;
};

// ---------------------------------------------------------------------------
// SRNKCACH container (layout in docs/formats.md)

inline constexpr std::string_view kCacheMagic = "SRNKCACH";

inline void write_cache(std::ostream& os, const EmbeddingCache& cache) {
  io::Writer w(os);
  w.magic(kCacheMagic);
  w.u64(cache.version);
  w.u64(cache.source_hash);
  w.u64(cache.entries.size());
  for (const auto& [id, vec] : cache.entries) {
    w.str(id);
    w.u32(static_cast<std::uint32_t>(vec.size()));
    w.f64s(vec);
  }
  w.check();
}

inline EmbeddingCache read_cache(std::istream& is, const std::string& context = "SRNKCACH") {
  io::Reader rd(is, context);
  rd.expect_magic(kCacheMagic);
  EmbeddingCache cache;
  cache.version = rd.u64();
  cache.source_hash = rd.u64();
  const std::uint64_t n = rd.count(1u << 24, "entry");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string id = rd.str();
    const std::uint32_t dim = rd.u32();
    if (dim > (1u << 16)) throw FormatError(context + ": implausible embedding width");
    std::vector<double> v(dim);
    rd.f64s(v);
    if (!cache.entries.emplace(std::move(id), std::move(v)).second)
      throw IntegrityError(context + ": duplicate cache entry");
  }
  if (!rd.at_end()) throw FormatError(context + ": trailing bytes");
  return cache;
}

inline void write_cache(const std::string& path, const EmbeddingCache& cache) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_cache(os, cache);
}

inline EmbeddingCache read_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_cache(is, path);
}

}  // namespace srank

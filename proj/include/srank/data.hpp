#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "srank/binary_io.hpp"
#include "srank/error.hpp"
#include "srank/numerics.hpp"

namespace srank {

struct Document {
  std::string id;
  std::vector<double> features;
  bool is_empty = false;

  friend bool operator==(const Document&, const Document&) = default;
};

/// One candidate set: the documents a query of this group is ranked against,
/// including exactly one Empty document.
struct DocumentGroup {
  std::string id;
  std::vector<Document> documents;

  std::size_t empty_index() const {
    for (std::size_t i = 0; i < documents.size(); ++i)
      if (documents[i].is_empty) return i;
    throw IntegrityError("group " + id + " has no Empty document");
  }

  std::size_t index_of(const std::string& doc_id) const {
    for (std::size_t i = 0; i < documents.size(); ++i)
      if (documents[i].id == doc_id) return i;
    return documents.size();
  }

  friend bool operator==(const DocumentGroup&, const DocumentGroup&) = default;
};

struct DocumentCatalog {
  std::size_t d_in = 0;
  std::vector<DocumentGroup> groups;

  std::size_t document_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.documents.size();
    return n;
  }

  std::unordered_map<std::string, std::size_t> group_index() const {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < groups.size(); ++i) idx.emplace(groups[i].id, i);
    return idx;
  }

  /// Throws IntegrityError on duplicate ids, a group without exactly one
  /// Empty document, or features of the wrong width.
  void validate() const {
    std::set<std::string> group_ids, doc_ids;
    for (const auto& g : groups) {
      if (!group_ids.insert(g.id).second) throw IntegrityError("duplicate group id " + g.id);
      std::size_t empties = 0;
      for (const auto& d : g.documents) {
        if (!doc_ids.insert(d.id).second) throw IntegrityError("duplicate document id " + d.id);
        if (d.features.size() != d_in)
          throw IntegrityError("document " + d.id + " has " + std::to_string(d.features.size()) +
                               " features, expected " + std::to_string(d_in));
        empties += d.is_empty ? 1 : 0;
      }
      if (empties != 1)
        throw IntegrityError("group " + g.id + " has " + std::to_string(empties) + " Empty documents");
    }
  }

  friend bool operator==(const DocumentCatalog&, const DocumentCatalog&) = default;
};

struct RankingRecord {
  std::string query_id;
  std::string group_id;
  std::vector<double> features;
  std::string gold_id;  // may name the group's Empty document

  friend bool operator==(const RankingRecord&, const RankingRecord&) = default;
};

struct Dataset {
  DocumentCatalog catalog;
  std::vector<RankingRecord> records;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Checks every record against the catalog. Throws IntegrityError naming the record.
inline void validate_records(const DocumentCatalog& catalog, const std::vector<RankingRecord>& records) {
  const auto idx = catalog.group_index();
  for (const auto& r : records) {
    const auto it = idx.find(r.group_id);
    if (it == idx.end()) throw IntegrityError("record " + r.query_id + ": unknown group " + r.group_id);
    const auto& g = catalog.groups[it->second];
    if (g.index_of(r.gold_id) == g.documents.size())
      throw IntegrityError("record " + r.query_id + ": gold id " + r.gold_id + " is not in group " + g.id);
    if (r.features.size() != catalog.d_in)
      throw IntegrityError("record " + r.query_id + ": wrong feature width");
  }
}

inline bool is_empty_gold(const DocumentCatalog& catalog, const std::unordered_map<std::string, std::size_t>& idx,
                          const RankingRecord& r) {
  const auto& g = catalog.groups.at(idx.at(r.group_id));
  return g.documents.at(g.index_of(r.gold_id)).is_empty;
}

// ---------------------------------------------------------------------------
// Synthetic generation

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t n_groups = 22;
  std::size_t size_min = 3;  // non-Empty documents per group
  std::size_t size_max = 26;
  std::size_t d_in = 32;
  std::size_t n_queries = 10000;
  double empty_rate = 0.1;
  // Query noise: each coordinate ~ N(0, noise^2 / d_in), so `noise` is the
  // RMS length of the displacement from the gold prototype.
  double noise = 0.3;
  // No-answer queries are resampled until they are at least this far from
  // every prototype in their group.
  double far_margin = 1.0;

  void validate() const {
    if (size_min < 2) throw ConfigError("size_min must be >= 2");
    if (size_max < size_min) throw ConfigError("size_max must be >= size_min");
    if (n_groups == 0) throw ConfigError("n_groups must be positive");
    if (d_in == 0) throw ConfigError("d_in must be positive");
    if (!(empty_rate >= 0.0 && empty_rate < 1.0)) throw ConfigError("empty_rate must be in [0, 1)");
    if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  }
};

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm < 1e-12) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Unit-norm query far from every non-Empty prototype of the group.
inline std::vector<double> far_query(Rng& rng, const DocumentGroup& g, std::size_t d_in, double margin) {
  std::vector<double> best;
  double best_gap = -1.0;
  for (int attempt = 0; attempt < 128; ++attempt) {
    auto v = random_unit(rng, d_in);
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& doc : g.documents)
      if (!doc.is_empty) gap = std::min(gap, distance(v, doc.features));
    if (gap > best_gap) {
      best_gap = gap;
      best = std::move(v);
    }
    if (best_gap >= margin) break;
  }
  return best;
}

inline std::string padded(std::size_t i, int width) {
  std::string s = std::to_string(i);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

}  // namespace detail

inline std::string empty_document_id(const std::string& group_id) { return group_id + "/empty"; }

/// Planted nearest-prototype task. Each document gets a random unit-norm
/// prototype as its features; a query for document d is prototype(d) plus
/// Gaussian noise. With probability empty_rate a query is instead drawn far
/// from every prototype of its group and labelled with the group's Empty
/// document (all-zero features, placed first in the group).
///
/// Group sizes are uniform in [size_min, size_max]; when there are at least as
/// many groups as sizes, every size is first used once so the whole range is
/// represented.
inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng catalog_rng = root.split();
  Rng query_rng = root.split();

  const std::size_t width = cfg.size_max - cfg.size_min + 1;
  std::vector<std::size_t> sizes;
  if (cfg.n_groups >= width)
    for (std::size_t s = cfg.size_min; s <= cfg.size_max; ++s) sizes.push_back(s);
  while (sizes.size() < cfg.n_groups) sizes.push_back(catalog_rng.uniform_int(cfg.size_min, cfg.size_max));
  catalog_rng.shuffle(sizes);

  Dataset ds;
  ds.catalog.d_in = cfg.d_in;
  const int gw = static_cast<int>(std::to_string(cfg.n_groups - 1).size());
  for (std::size_t gi = 0; gi < cfg.n_groups; ++gi) {
    DocumentGroup g;
    g.id = "g" + detail::padded(gi, gw);
    g.documents.push_back({empty_document_id(g.id), std::vector<double>(cfg.d_in, 0.0), true});
    const int dw = static_cast<int>(std::to_string(sizes[gi] - 1).size());
    for (std::size_t k = 0; k < sizes[gi]; ++k)
      g.documents.push_back({g.id + "/d" + detail::padded(k, dw), detail::random_unit(catalog_rng, cfg.d_in), false});
    ds.catalog.groups.push_back(std::move(g));
  }

  const double sd = cfg.noise / std::sqrt(static_cast<double>(cfg.d_in));
  const int qw = static_cast<int>(std::to_string(cfg.n_queries == 0 ? 0 : cfg.n_queries - 1).size());
  ds.records.reserve(cfg.n_queries);
  for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
    const auto& g = ds.catalog.groups[query_rng.uniform_int(0, cfg.n_groups - 1)];
    RankingRecord r;
    r.query_id = "q" + detail::padded(qi, qw);
    r.group_id = g.id;
    if (query_rng.bernoulli(cfg.empty_rate)) {
      r.features = detail::far_query(query_rng, g, cfg.d_in, cfg.far_margin);
      r.gold_id = g.documents[g.empty_index()].id;
    } else {
      // Document 0 is the Empty one; pick among the rest.
      const auto& gold = g.documents[query_rng.uniform_int(1, g.documents.size() - 1)];
      r.features = gold.features;
      for (double& x : r.features) x += sd * query_rng.normal();
      r.gold_id = gold.id;
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

/// Appends round(rate * n_g) synthesized no-answer records for each group g
/// with n_g records. Original records are kept unchanged and in order.
inline std::vector<RankingRecord> augment_with_empty(const std::vector<RankingRecord>& records,
                                                     const DocumentCatalog& catalog, double rate,
                                                     std::uint64_t seed, double far_margin = 1.0) {
  if (!(rate >= 0.0)) throw ConfigError("augmentation rate must be >= 0");
  std::vector<RankingRecord> out = records;
  if (rate == 0.0) return out;
  std::map<std::string, std::size_t> per_group;
  for (const auto& r : records) ++per_group[r.group_id];
  const auto idx = catalog.group_index();
  Rng rng(seed);
  for (const auto& [gid, count] : per_group) {
    const auto it = idx.find(gid);
    if (it == idx.end()) throw IntegrityError("augment: unknown group " + gid);
    const auto& g = catalog.groups[it->second];
    const auto extra = static_cast<std::size_t>(std::llround(rate * static_cast<double>(count)));
    for (std::size_t k = 0; k < extra; ++k) {
      RankingRecord r;
      r.query_id = "aug/" + gid + "/" + std::to_string(k);
      r.group_id = gid;
      r.features = detail::far_query(rng, g, catalog.d_in, far_margin);
      r.gold_id = g.documents[g.empty_index()].id;
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Deterministic train/held-out split: the trailing `fraction` of records is held out.
inline std::pair<std::vector<RankingRecord>, std::vector<RankingRecord>> split_holdout(
    const std::vector<RankingRecord>& records, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must be in [0, 1)");
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
  const auto cut = records.begin() + static_cast<std::ptrdiff_t>(records.size() - held);
  return {{records.begin(), cut}, {cut, records.end()}};
}

// ---------------------------------------------------------------------------
// SRNKDATA container (layout in docs/formats.md)

inline constexpr std::string_view kDataMagic = "SRNKDATA";
inline constexpr std::uint32_t kDataVersion = 1;

inline void write_dataset(std::ostream& os, const DocumentCatalog& catalog, const std::vector<RankingRecord>& records) {
  catalog.validate();
  validate_records(catalog, records);
  io::Writer w(os);
  w.magic(kDataMagic);
  w.u32(kDataVersion);
  w.u32(static_cast<std::uint32_t>(catalog.d_in));
  w.u32(static_cast<std::uint32_t>(catalog.groups.size()));
  for (const auto& g : catalog.groups) {
    w.str(g.id);
    w.u32(static_cast<std::uint32_t>(g.documents.size()));
    for (const auto& d : g.documents) {
      w.str(d.id);
      w.u8(d.is_empty ? 1 : 0);
      w.f64s(d.features);
    }
  }
  w.u64(records.size());
  for (const auto& r : records) {
    w.str(r.query_id);
    w.str(r.group_id);
    w.str(r.gold_id);
    w.f64s(r.features);
  }
  w.check();
}

inline Dataset read_dataset(std::istream& is, const std::string& context = "SRNKDATA") {
  io::Reader rd(is, context);
  rd.expect_magic(kDataMagic);
  const std::uint32_t version = rd.u32();
  if (version != kDataVersion) throw FormatError(context + ": unsupported version " + std::to_string(version));
  Dataset ds;
  ds.catalog.d_in = rd.u32();
  if (ds.catalog.d_in == 0 || ds.catalog.d_in > (1u << 16)) throw FormatError(context + ": implausible d_in");
  const std::uint32_t n_groups = rd.u32();
  for (std::uint32_t gi = 0; gi < n_groups; ++gi) {
    DocumentGroup g;
    g.id = rd.str();
    const std::uint32_t n_docs = rd.u32();
    for (std::uint32_t k = 0; k < n_docs; ++k) {
      Document d;
      d.id = rd.str();
      const std::uint8_t flag = rd.u8();
      if (flag > 1) throw FormatError(context + ": bad is_empty flag for " + d.id);
      d.is_empty = flag == 1;
      d.features.resize(ds.catalog.d_in);
      rd.f64s(d.features);
      g.documents.push_back(std::move(d));
    }
    ds.catalog.groups.push_back(std::move(g));
  }
  const std::uint64_t n_records = rd.u64();
  for (std::uint64_t i = 0; i < n_records; ++i) {
    RankingRecord r;
    r.query_id = rd.str();
    r.group_id = rd.str();
    r.gold_id = rd.str();
    r.features.resize(ds.catalog.d_in);
    rd.f64s(r.features);
    ds.records.push_back(std::move(r));
  }
  if (!rd.at_end()) throw FormatError(context + ": trailing bytes after record block");
  ds.catalog.validate();
  validate_records(ds.catalog, ds.records);
  return ds;
}

inline void write_dataset(const std::string& path, const DocumentCatalog& catalog,
                          const std::vector<RankingRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_dataset(os, catalog, records);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_dataset(is, path);
}

inline std::uint64_t digest_bytes(const std::string& bytes) {
  Fnv1a h;
  h.update(std::as_bytes(std::span(bytes.data(), bytes.size())));
  return h.digest();
}

/// FNV-1a digest of the serialized SRNKDATA bytes.
inline std::uint64_t dataset_digest(const DocumentCatalog& catalog, const std::vector<RankingRecord>& records) {
  std::ostringstream os(std::ios::binary);
  write_dataset(os, catalog, records);
  return digest_bytes(os.str());
}

}  // namespace srank

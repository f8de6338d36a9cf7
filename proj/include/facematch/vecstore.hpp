#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "facematch/errors.hpp"
#include "facematch/hnsw_graph.hpp"

namespace facematch::vecstore {

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got);
};

class EmptyStore : public Error {
 public:
  EmptyStore() : Error("EmptyStore", "vector store is empty") {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("InvalidArgument", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("IoError", message) {}
};

class FormatVersionMismatch : public Error {
 public:
  explicit FormatVersionMismatch(const std::string& message)
      : Error("FormatVersionMismatch", message) {}
};

class ChecksumMismatch : public Error {
 public:
  explicit ChecksumMismatch(const std::string& message) : Error("ChecksumMismatch", message) {}
};

enum class IndexKind { kFlat, kHnsw };

std::string_view to_string(IndexKind kind);
// Throws InvalidArgument for anything but "flat" / "hnsw".
IndexKind parse_index_kind(std::string_view name);

struct IndexConfig {
  std::size_t dimension = 512;
  IndexKind kind = IndexKind::kFlat;
  std::size_t hnsw_m = 16;
  std::size_t hnsw_ef_construction = 200;
  std::size_t hnsw_ef_search = 800;
  std::uint64_t hnsw_seed = 42;

  void validate() const;
};

// Only "name" and "image_url" survive save/load.
using Metadata = std::map<std::string, std::string>;

struct MatchResult {
  std::string id;
  float score = 0.0f;
  int rank = 0;

  bool operator==(const MatchResult&) const = default;
};

// Dot product; equals cosine similarity for unit vectors.
float cosine_score(std::span<const float> a, std::span<const float> b);

// In-process index of unit vectors keyed by stable string ids. Vectors are
// L2-normalized on the way in, so scores are cosine similarities.
//
// Readers (search, lookups, save) share a lock; upsert takes it exclusively.
class VectorStore {
 public:
  explicit VectorStore(IndexConfig config = {});
  VectorStore(VectorStore&&) noexcept;
  VectorStore& operator=(VectorStore&&) noexcept;
  ~VectorStore();

  const IndexConfig& config() const noexcept { return config_; }

  // Returns true when `id` was new, false when an existing vector was
  // replaced. Throws DimensionMismatch, InvalidArgument (empty id, zero or
  // non-finite vector).
  bool upsert(const std::string& id, std::span<const float> values, Metadata metadata = {});

  // Top min(k, size()) by score descending, ties by id ascending, ranks from
  // 1. HNSW uses max(ef_search, k) candidates. Throws EmptyStore,
  // DimensionMismatch, InvalidArgument (k == 0).
  std::vector<MatchResult> search(std::span<const float> query, std::size_t k) const;
  std::vector<MatchResult> search(std::span<const float> query, std::size_t k,
                                  std::size_t ef_search) const;

  std::size_t size() const;
  bool contains(const std::string& id) const;
  std::optional<Metadata> metadata(const std::string& id) const;
  std::optional<std::vector<float>> vector(const std::string& id) const;
  // Ids in insertion (row) order.
  std::vector<std::string> ids() const;

  // Directory layout: index.meta, vectors.f32, profiles.tsv, graph.bin (hnsw).
  // Throws IoError.
  void save(const std::filesystem::path& dir) const;
  // Throws IoError, FormatVersionMismatch, ChecksumMismatch.
  static VectorStore load(const std::filesystem::path& dir);

 private:
  std::vector<MatchResult> search_locked(std::span<const float> query, std::size_t k,
                                         std::size_t ef_search) const;
  std::vector<float> normalize(std::span<const float> values) const;

  IndexConfig config_;
  std::unique_ptr<std::shared_mutex> mutex_;
  std::vector<float> rows_;
  std::vector<std::string> ids_;
  std::vector<Metadata> metadata_;
  std::unordered_map<std::string, std::uint32_t> row_of_;
  std::optional<HnswGraph> graph_;
};

}  // namespace facematch::vecstore

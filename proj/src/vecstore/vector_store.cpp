#include <algorithm>
#include <cmath>
#include <mutex>

#include "facematch/vecstore.hpp"

namespace facematch::vecstore {

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : Error("DimensionMismatch", "expected a " + std::to_string(expected) +
                                     "-dimensional vector, got " + std::to_string(got)) {}

std::string_view to_string(IndexKind kind) { return kind == IndexKind::kFlat ? "flat" : "hnsw"; }

IndexKind parse_index_kind(std::string_view name) {
  if (name == "flat") return IndexKind::kFlat;
  if (name == "hnsw") return IndexKind::kHnsw;
  throw InvalidArgument("unknown index kind '" + std::string(name) + "' (expected flat or hnsw)");
}

void IndexConfig::validate() const {
  if (dimension < 1) throw InvalidArgument("index dimension must be at least 1");
  if (hnsw_m < 1 || hnsw_ef_construction < 1 || hnsw_ef_search < 1) {
    throw InvalidArgument("hnsw parameters must be at least 1");
  }
}

VectorStore::VectorStore(IndexConfig config)
    : config_(config), mutex_(std::make_unique<std::shared_mutex>()) {
  config_.validate();
  if (config_.kind == IndexKind::kHnsw) {
    graph_.emplace(config_.hnsw_m, config_.hnsw_ef_construction, config_.hnsw_seed);
  }
}

VectorStore::VectorStore(VectorStore&&) noexcept = default;
VectorStore& VectorStore::operator=(VectorStore&&) noexcept = default;
VectorStore::~VectorStore() = default;

std::vector<float> VectorStore::normalize(std::span<const float> values) const {
  if (values.size() != config_.dimension) throw DimensionMismatch(config_.dimension, values.size());
  double sq = 0.0;
  for (float v : values) sq += static_cast<double>(v) * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw InvalidArgument("vector must be finite and non-zero");
  }
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i] * inv);
  return out;
}

bool VectorStore::upsert(const std::string& id, std::span<const float> values, Metadata metadata) {
  if (id.empty()) throw InvalidArgument("vector id must not be empty");
  const std::vector<float> unit = normalize(values);

  std::unique_lock lock(*mutex_);
  const VectorView view{rows_.data(), config_.dimension};
  if (auto it = row_of_.find(id); it != row_of_.end()) {
    const std::uint32_t row = it->second;
    std::copy(unit.begin(), unit.end(), rows_.begin() + static_cast<std::ptrdiff_t>(row * config_.dimension));
    metadata_[row] = std::move(metadata);
    if (graph_) graph_->relink(view, row);
    return false;
  }

  const auto row = static_cast<std::uint32_t>(ids_.size());
  rows_.insert(rows_.end(), unit.begin(), unit.end());
  ids_.push_back(id);
  metadata_.push_back(std::move(metadata));
  row_of_.emplace(id, row);
  if (graph_) graph_->insert(VectorView{rows_.data(), config_.dimension}, row);
  return true;
}

std::vector<MatchResult> VectorStore::search(std::span<const float> query, std::size_t k) const {
  return search(query, k, config_.hnsw_ef_search);
}

std::vector<MatchResult> VectorStore::search(std::span<const float> query, std::size_t k,
                                             std::size_t ef_search) const {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  const std::vector<float> unit = normalize(query);
  std::shared_lock lock(*mutex_);
  if (ids_.empty()) throw EmptyStore();
  return search_locked(unit, k, ef_search);
}

std::vector<MatchResult> VectorStore::search_locked(std::span<const float> query, std::size_t k,
                                                    std::size_t ef_search) const {
  struct Scored {
    float score;
    std::uint32_t row;
  };
  std::vector<Scored> scored;
  const VectorView view{rows_.data(), config_.dimension};

  if (graph_) {
    for (const auto& [d, row] : graph_->search(view, query.data(), std::max(ef_search, k))) {
      scored.push_back({dot(query.data(), view.row(row), view.dim), row});
    }
  } else {
    scored.reserve(ids_.size());
    for (std::uint32_t row = 0; row < ids_.size(); ++row) {
      scored.push_back({dot(query.data(), view.row(row), view.dim), row});
    }
  }

  const auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids_[a.row] < ids_[b.row];
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);

  std::vector<MatchResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({ids_[scored[i].row], std::clamp(scored[i].score, -1.0f, 1.0f),
                   static_cast<int>(i + 1)});
  }
  return out;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(*mutex_);
  return ids_.size();
}

bool VectorStore::contains(const std::string& id) const {
  std::shared_lock lock(*mutex_);
  return row_of_.contains(id);
}

std::optional<Metadata> VectorStore::metadata(const std::string& id) const {
  std::shared_lock lock(*mutex_);
  auto it = row_of_.find(id);
  if (it == row_of_.end()) return std::nullopt;
  return metadata_[it->second];
}

std::optional<std::vector<float>> VectorStore::vector(const std::string& id) const {
  std::shared_lock lock(*mutex_);
  auto it = row_of_.find(id);
  if (it == row_of_.end()) return std::nullopt;
  const auto begin = rows_.begin() + static_cast<std::ptrdiff_t>(it->second * config_.dimension);
  return std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(config_.dimension));
}

std::vector<std::string> VectorStore::ids() const {
  std::shared_lock lock(*mutex_);
  return ids_;
}

}  // namespace facematch::vecstore

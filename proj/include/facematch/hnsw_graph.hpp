#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace facematch::vecstore {

float dot(const float* a, const float* b, std::size_t dim);

// Rows of a row-major float matrix; the graph never owns vectors.
struct VectorView {
  const float* data = nullptr;
  std::size_t dim = 0;

  const float* row(std::uint32_t i) const { return data + static_cast<std::size_t>(i) * dim; }
};

// Hierarchical navigable small-world graph over unit vectors, distance
// 1 - dot. Node levels are a pure function of (seed, node), so a graph is
// fully determined by the insertion order.
class HnswGraph {
 public:
  using Neighbor = std::pair<float, std::uint32_t>;  // (distance, node)
  using Links = std::vector<std::vector<std::uint32_t>>;  // per level, level 0 first

  static constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

  HnswGraph(std::size_t m, std::size_t ef_construction, std::uint64_t seed);

  std::size_t size() const noexcept { return links_.size(); }
  std::size_t m() const noexcept { return m_; }
  std::uint32_t entry_point() const noexcept { return entry_point_; }
  int max_level() const noexcept { return max_level_; }
  int level(std::uint32_t node) const { return static_cast<int>(links_[node].size()) - 1; }
  const std::vector<std::uint32_t>& neighbors(std::uint32_t node, int level) const {
    return links_[node][level];
  }

  // `node` must equal size(); its vector must already be readable in `vectors`.
  void insert(VectorView vectors, std::uint32_t node);

  // Recomputes the outgoing links of an existing node after its vector changed.
  void relink(VectorView vectors, std::uint32_t node);

  // Up to `ef` nearest nodes, ascending distance.
  std::vector<Neighbor> search(VectorView vectors, const float* query, std::size_t ef) const;

  // Rebuilds a graph from persisted adjacency. Throws std::invalid_argument on
  // inconsistent input.
  static HnswGraph from_links(std::size_t m, std::size_t ef_construction, std::uint64_t seed,
                              std::vector<Links> links, std::uint32_t entry_point);

  int level_for(std::uint32_t node) const;

 private:
  std::size_t max_links(int level) const { return level == 0 ? 2 * m_ : m_; }

  std::vector<Neighbor> search_layer(VectorView vectors, const float* query,
                                     const std::vector<std::uint32_t>& entries, std::size_t ef,
                                     int level, std::uint32_t exclude) const;
  std::uint32_t greedy_descend(VectorView vectors, const float* query, int from_level,
                               int to_level) const;
  std::vector<std::uint32_t> select_neighbors(VectorView vectors, std::vector<Neighbor> candidates,
                                              std::size_t limit) const;
  void connect(VectorView vectors, std::uint32_t node, int level,
               const std::vector<std::uint32_t>& chosen);

  std::size_t m_;
  std::size_t ef_construction_;
  std::uint64_t seed_;
  double level_mult_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_point_ = kNoNode;
  int max_level_ = -1;
};

}  // namespace facematch::vecstore

#include "facematch/hnsw_graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace facematch::vecstore {

namespace {

constexpr int kMaxLevel = 16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

float distance(const float* a, const float* b, std::size_t dim) { return 1.0f - dot(a, b, dim); }

// Per-thread visited marks with an epoch counter, so concurrent searches never
// share scratch state.
class VisitedSet {
 public:
  void reset(std::size_t n) {
    if (marks_.size() < n) marks_.resize(n, 0);
    if (++epoch_ == 0) {
      std::fill(marks_.begin(), marks_.end(), 0);
      epoch_ = 1;
    }
  }
  // Returns true the first time a node is seen.
  bool visit(std::uint32_t node) {
    if (marks_[node] == epoch_) return false;
    marks_[node] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

VisitedSet& visited_set() {
  thread_local VisitedSet set;
  return set;
}

struct Closer {
  bool operator()(const HnswGraph::Neighbor& a, const HnswGraph::Neighbor& b) const {
    return a.first > b.first;
  }
};

}  // namespace

HnswGraph::HnswGraph(std::size_t m, std::size_t ef_construction, std::uint64_t seed)
    : m_(m),
      ef_construction_(ef_construction),
      seed_(seed),
      level_mult_(m > 1 ? 1.0 / std::log(static_cast<double>(m)) : 1.0) {}

int HnswGraph::level_for(std::uint32_t node) const {
  const std::uint64_t bits = splitmix64(seed_ ^ splitmix64(node));
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
  const double level = std::floor(-std::log(1.0 - u) * level_mult_);
  return static_cast<int>(std::min<double>(level, kMaxLevel));
}

std::vector<HnswGraph::Neighbor> HnswGraph::search_layer(VectorView vectors, const float* query,
                                                         const std::vector<std::uint32_t>& entries,
                                                         std::size_t ef, int level,
                                                         std::uint32_t exclude) const {
  VisitedSet& visited = visited_set();
  visited.reset(links_.size());

  std::priority_queue<Neighbor, std::vector<Neighbor>, Closer> frontier;
  std::priority_queue<Neighbor> best;  // farthest on top

  for (auto e : entries) {
    if (!visited.visit(e)) continue;
    const float d = distance(query, vectors.row(e), vectors.dim);
    frontier.emplace(d, e);
    best.emplace(d, e);
    if (best.size() > ef) best.pop();
  }

  while (!frontier.empty()) {
    const auto [d, node] = frontier.top();
    if (best.size() >= ef && d > best.top().first) break;
    frontier.pop();
    for (auto n : links_[node][level]) {
      if (!visited.visit(n)) continue;
      const float dn = distance(query, vectors.row(n), vectors.dim);
      if (best.size() < ef || dn < best.top().first) {
        frontier.emplace(dn, n);
        best.emplace(dn, n);
        if (best.size() > ef) best.pop();
      }
    }
  }

  std::vector<Neighbor> out;
  out.reserve(best.size());
  while (!best.empty()) {
    if (best.top().second != exclude) out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::uint32_t HnswGraph::greedy_descend(VectorView vectors, const float* query, int from_level,
                                        int to_level) const {
  std::uint32_t cur = entry_point_;
  float cur_d = distance(query, vectors.row(cur), vectors.dim);
  for (int l = from_level; l >= to_level; --l) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto n : links_[cur][l]) {
        const float d = distance(query, vectors.row(n), vectors.dim);
        if (d < cur_d) {
          cur_d = d;
          cur = n;
          moved = true;
        }
      }
    }
  }
  return cur;
}

std::vector<std::uint32_t> HnswGraph::select_neighbors(VectorView vectors,
                                                       std::vector<Neighbor> candidates,
                                                       std::size_t limit) const {
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::uint32_t> chosen;
  if (candidates.size() <= limit) {
    for (const auto& c : candidates) chosen.push_back(c.second);
    return chosen;
  }
  // Keep a candidate only if it is closer to the base than to every neighbour
  // already kept; this spreads links across directions.
  for (const auto& [d, c] : candidates) {
    if (chosen.size() >= limit) break;
    bool keep = true;
    for (auto s : chosen) {
      if (distance(vectors.row(c), vectors.row(s), vectors.dim) < d) {
        keep = false;
        break;
      }
    }
    if (keep) chosen.push_back(c);
  }
  return chosen;
}

void HnswGraph::connect(VectorView vectors, std::uint32_t node, int level,
                        const std::vector<std::uint32_t>& chosen) {
  links_[node][level] = chosen;
  const std::size_t cap = max_links(level);
  for (auto n : chosen) {
    auto& back = links_[n][level];
    if (std::find(back.begin(), back.end(), node) != back.end()) continue;
    if (back.size() < cap) {
      back.push_back(node);
      continue;
    }
    std::vector<Neighbor> pool;
    pool.reserve(back.size() + 1);
    const float* base = vectors.row(n);
    for (auto b : back) pool.emplace_back(distance(base, vectors.row(b), vectors.dim), b);
    pool.emplace_back(distance(base, vectors.row(node), vectors.dim), node);
    back = select_neighbors(vectors, std::move(pool), cap);
  }
}

void HnswGraph::insert(VectorView vectors, std::uint32_t node) {
  if (node != links_.size()) throw std::invalid_argument("hnsw: nodes must be inserted in order");
  const int level = level_for(node);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);

  if (entry_point_ == kNoNode) {
    entry_point_ = node;
    max_level_ = level;
    return;
  }

  const float* query = vectors.row(node);
  std::vector<std::uint32_t> entries = {
      level < max_level_ ? greedy_descend(vectors, query, max_level_, level + 1) : entry_point_};
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto candidates = search_layer(vectors, query, entries, ef_construction_, l, node);
    entries.clear();
    for (const auto& c : candidates) entries.push_back(c.second);
    connect(vectors, node, l, select_neighbors(vectors, std::move(candidates), m_));
  }

  if (level > max_level_) {
    entry_point_ = node;
    max_level_ = level;
  }
}

void HnswGraph::relink(VectorView vectors, std::uint32_t node) {
  if (links_.size() <= 1) return;
  const float* query = vectors.row(node);
  const int level = this->level(node);
  std::vector<std::uint32_t> entries = {
      level < max_level_ ? greedy_descend(vectors, query, max_level_, level + 1) : entry_point_};
  for (int l = level; l >= 0; --l) {
    auto candidates = search_layer(vectors, query, entries, ef_construction_, l, node);
    if (candidates.empty()) continue;
    entries.clear();
    for (const auto& c : candidates) entries.push_back(c.second);
    connect(vectors, node, l, select_neighbors(vectors, std::move(candidates), m_));
  }
}

std::vector<HnswGraph::Neighbor> HnswGraph::search(VectorView vectors, const float* query,
                                                   std::size_t ef) const {
  if (entry_point_ == kNoNode) return {};
  const std::uint32_t start =
      max_level_ > 0 ? greedy_descend(vectors, query, max_level_, 1) : entry_point_;
  return search_layer(vectors, query, {start}, std::max<std::size_t>(ef, 1), 0, kNoNode);
}

HnswGraph HnswGraph::from_links(std::size_t m, std::size_t ef_construction, std::uint64_t seed,
                                std::vector<Links> links, std::uint32_t entry_point) {
  HnswGraph g(m, ef_construction, seed);
  const std::size_t n = links.size();
  if (n == 0) {
    if (entry_point != kNoNode) throw std::invalid_argument("hnsw: entry point in empty graph");
    return g;
  }
  if (entry_point >= n) throw std::invalid_argument("hnsw: entry point out of range");
  for (std::size_t node = 0; node < n; ++node) {
    if (links[node].empty()) throw std::invalid_argument("hnsw: node without level 0");
    for (std::size_t l = 0; l < links[node].size(); ++l) {
      for (auto nb : links[node][l]) {
        if (nb >= n || links[nb].size() <= l) throw std::invalid_argument("hnsw: dangling link");
      }
    }
  }
  g.links_ = std::move(links);
  g.entry_point_ = entry_point;
  g.max_level_ = g.level(entry_point);
  return g;
}

}  // namespace facematch::vecstore

#include "facematch/hnsw_graph.hpp"
#include "facematch/vecstore.hpp"

namespace facematch::vecstore {

float dot(const float* a, const float* b, std::size_t dim) {
  // Eight independent partial sums let the compiler keep them in one vector
  // register without reassociating a single accumulator.
  float acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  float tail = 0.0f;
  for (; i < dim; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

float cosine_score(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  return dot(a.data(), b.data(), a.size());
}

}  // namespace facematch::vecstore

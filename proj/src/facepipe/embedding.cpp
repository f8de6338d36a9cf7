#include <cmath>

#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

FaceEmbedding FaceEmbedding::normalized(std::span<const float> raw) {
  if (raw.size() != kDimension) {
    throw ShapeMismatch("embedding must have " + std::to_string(kDimension) + " values, got " +
                        std::to_string(raw.size()));
  }
  double sq = 0.0;
  for (float v : raw) sq += static_cast<double>(v) * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw ShapeMismatch("embedding has zero or non-finite norm");
  const double inv = 1.0 / std::sqrt(sq);
  FaceEmbedding out;
  for (std::size_t i = 0; i < kDimension; ++i) out.values_[i] = static_cast<float>(raw[i] * inv);
  return out;
}

float FaceEmbedding::dot(const FaceEmbedding& other) const {
  double s = 0.0;
  for (std::size_t i = 0; i < kDimension; ++i) s += static_cast<double>(values_[i]) * other.values_[i];
  return static_cast<float>(s);
}

}  // namespace facematch::facepipe

#include <bit>
#include <cstring>

#include "facematch/facepipe.hpp"
#include "facematch/sha256.hpp"

namespace facematch::facepipe {

std::vector<BoundingBox> StubFaceDetector::detect(const cv::Mat& bgr) const {
  const int mx = bgr.cols / 10;
  const int my = bgr.rows / 10;
  if (bgr.cols - 2 * mx <= 0 || bgr.rows - 2 * my <= 0) return {};
  return {BoundingBox{mx, my, bgr.cols - mx, bgr.rows - my, 1.0f}};
}

namespace {

void put_le32(std::uint32_t v, std::uint8_t* out) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_le32(const std::uint8_t* in) {
  return static_cast<std::uint32_t>(in[0]) | static_cast<std::uint32_t>(in[1]) << 8 |
         static_cast<std::uint32_t>(in[2]) << 16 | static_cast<std::uint32_t>(in[3]) << 24;
}

}  // namespace

FaceEmbedding StubFaceEmbedder::embed(const FaceTensor& tensor) const {
  Sha256 hasher;
  std::uint8_t word[4];
  for (float v : tensor.values()) {
    put_le32(std::bit_cast<std::uint32_t>(v), word);
    hasher.update(std::span<const std::uint8_t>(word, 4));
  }
  const Digest seed = hasher.finish();

  std::vector<float> raw;
  raw.reserve(FaceEmbedding::kDimension);
  for (std::uint32_t block = 0; raw.size() < FaceEmbedding::kDimension; ++block) {
    std::uint8_t counter[4];
    put_le32(block, counter);
    const Digest d = Sha256().update(seed).update(std::span<const std::uint8_t>(counter, 4)).finish();
    for (std::size_t i = 0; i < d.size(); i += 4) {
      raw.push_back(static_cast<float>(get_le32(&d[i]) / 4294967296.0 * 2.0 - 1.0));
    }
  }
  return FaceEmbedding::normalized(raw);
}

}  // namespace facematch::facepipe

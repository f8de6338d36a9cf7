#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "facematch/errors.hpp"

namespace facematch::facepipe {

class ImageDecodeError : public Error {
 public:
  explicit ImageDecodeError(const std::string& message) : Error("ImageDecodeError", message) {}
};

class ModelLoadError : public Error {
 public:
  explicit ModelLoadError(const std::string& message) : Error("ModelLoadError", message) {}
};

class NoFaceDetected : public Error {
 public:
  NoFaceDetected() : Error("NoFaceDetected", "no face detected in image") {}
};

class BoxOutOfBounds : public Error {
 public:
  explicit BoxOutOfBounds(const std::string& message) : Error("BoxOutOfBounds", message) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& message) : Error("ShapeMismatch", message) {}
};

// Decodes PNG or JPEG bytes into an 8-bit, 3-channel BGR image.
cv::Mat decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const cv::Mat& image);

// Half-open pixel rectangle [x_min, x_max) x [y_min, y_max).
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;
  float confidence = 0.0f;

  long long area() const {
    return static_cast<long long>(x_max - x_min) * static_cast<long long>(y_max - y_min);
  }
  bool operator==(const BoundingBox&) const = default;
};

// Intersects `box` with the image rectangle. Throws BoxOutOfBounds when
// nothing of the box remains.
BoundingBox clamp_to_image(const BoundingBox& box, int width, int height);

// Largest area wins; ties go to higher confidence, then earlier position.
// Throws NoFaceDetected on an empty list.
BoundingBox select_largest(std::span<const BoundingBox> candidates);

// 160x160x3 RGB, row-major HWC, values in [-1, 1].
class FaceTensor {
 public:
  static constexpr int kSide = 160;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kSize = static_cast<std::size_t>(kSide) * kSide * kChannels;

  // Throws ShapeMismatch unless values.size() == kSize.
  explicit FaceTensor(std::vector<float> values);

  float at(int y, int x, int c) const {
    return values_[(static_cast<std::size_t>(y) * kSide + x) * kChannels + c];
  }
  std::span<const float> values() const noexcept { return values_; }

 private:
  std::vector<float> values_;
};

// Crops the (clamped) box without margin, bilinearly resizes to 160x160 and
// maps each channel value v to (v - 127.5) / 128.
FaceTensor crop_and_normalize(const cv::Mat& image, const BoundingBox& box);

// Copy of `image` with a 2-pixel pure-red border drawn just inside `box`.
cv::Mat annotate_detection(const cv::Mat& image, const BoundingBox& box);

class FaceEmbedding {
 public:
  static constexpr std::size_t kDimension = 512;

  // L2-normalizes `raw`. Throws ShapeMismatch on a wrong length or a zero
  // vector.
  static FaceEmbedding normalized(std::span<const float> raw);

  std::span<const float> values() const noexcept { return values_; }
  float dot(const FaceEmbedding& other) const;

  bool operator==(const FaceEmbedding&) const = default;

 private:
  FaceEmbedding() = default;
  std::array<float, kDimension> values_{};
};

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<BoundingBox> detect(const cv::Mat& bgr) const = 0;
};

class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  virtual FaceEmbedding embed(const FaceTensor& tensor) const = 0;
};

// One box over the central 80% of the image, confidence 1.
class StubFaceDetector final : public FaceDetector {
 public:
  std::vector<BoundingBox> detect(const cv::Mat& bgr) const override;
};

// SHA-256 of the tensor's little-endian float32 bytes, expanded with a block
// counter into 512 uniform values in [-1, 1), then L2-normalized.
class StubFaceEmbedder final : public FaceEmbedder {
 public:
  FaceEmbedding embed(const FaceTensor& tensor) const override;
};

struct MtcnnOptions {
  int min_face_size = 20;
  float scale_factor = 0.709f;
  std::array<float, 3> thresholds = {0.6f, 0.7f, 0.7f};
};

// Three-stage cascade (proposal, refine, output networks). `model_dir` holds
// pnet.onnx, rnet.onnx and onet.onnx.
class MtcnnFaceDetector final : public FaceDetector {
 public:
  explicit MtcnnFaceDetector(const std::filesystem::path& model_dir, MtcnnOptions options = {});

  std::vector<BoundingBox> detect(const cv::Mat& bgr) const override;

 private:
  MtcnnOptions options_;
  // cv::dnn::Net::forward mutates internal buffers.
  mutable std::mutex mutex_;
  mutable cv::dnn::Net pnet_;
  mutable cv::dnn::Net rnet_;
  mutable cv::dnn::Net onet_;
};

// Runs an ONNX network taking 1x3x160x160 input and producing 512 values.
class OnnxFaceEmbedder final : public FaceEmbedder {
 public:
  explicit OnnxFaceEmbedder(const std::filesystem::path& model_file);

  FaceEmbedding embed(const FaceTensor& tensor) const override;

 private:
  mutable std::mutex mutex_;
  mutable cv::dnn::Net net_;
};

std::vector<BoundingBox> detect_candidates(std::span<const std::uint8_t> encoded,
                                           const FaceDetector& detector);

enum class Backend { kNeural, kStub };

struct PipelineConfig {
  Backend backend = Backend::kStub;
  std::filesystem::path detector_model;
  std::filesystem::path embedder_model;

  // FACEMATCH_DETECTOR_MODEL / FACEMATCH_EMBEDDER_MODEL.
  static PipelineConfig from_env(Backend backend);
};

struct PipelineResult {
  BoundingBox box;
  FaceEmbedding embedding;
};

// detect -> select_largest -> crop_and_normalize -> embed.
class FacePipeline {
 public:
  FacePipeline(std::shared_ptr<const FaceDetector> detector,
               std::shared_ptr<const FaceEmbedder> embedder);

  static FacePipeline from_config(const PipelineConfig& cfg);

  PipelineResult process(const cv::Mat& bgr) const;
  PipelineResult process(std::span<const std::uint8_t> encoded) const;

  std::size_t embedding_dimension() const noexcept { return FaceEmbedding::kDimension; }
  const FaceDetector& detector() const noexcept { return *detector_; }

 private:
  std::shared_ptr<const FaceDetector> detector_;
  std::shared_ptr<const FaceEmbedder> embedder_;
};

}  // namespace facematch::facepipe

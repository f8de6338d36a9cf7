#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

OnnxFaceEmbedder::OnnxFaceEmbedder(const std::filesystem::path& model_file) {
  if (!std::filesystem::is_regular_file(model_file)) {
    throw ModelLoadError("embedder model file not found: " + model_file.string());
  }
  try {
    net_ = cv::dnn::readNetFromONNX(model_file.string());
  } catch (const cv::Exception& e) {
    throw ModelLoadError("embedder model file is corrupt: " + model_file.string() + " (" + e.what() +
                         ")");
  }
  if (net_.empty()) throw ModelLoadError("embedder model file could not be loaded: " + model_file.string());
  net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
}

FaceEmbedding OnnxFaceEmbedder::embed(const FaceTensor& tensor) const {
  constexpr int kSide = FaceTensor::kSide;
  const int dims[] = {1, FaceTensor::kChannels, kSide, kSide};
  cv::Mat blob(4, dims, CV_32F);
  float* dst = blob.ptr<float>();
  for (int c = 0; c < FaceTensor::kChannels; ++c) {
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) *dst++ = tensor.at(y, x, c);
    }
  }

  cv::Mat out;
  {
    std::lock_guard lock(mutex_);
    net_.setInput(blob);
    try {
      out = net_.forward();
    } catch (const cv::Exception& e) {
      throw ShapeMismatch(std::string("embedder inference failed: ") + e.what());
    }
  }
  if (out.total() != FaceEmbedding::kDimension || out.type() != CV_32F) {
    throw ShapeMismatch("embedder produced " + std::to_string(out.total()) + " values, expected " +
                        std::to_string(FaceEmbedding::kDimension));
  }
  const cv::Mat flat = out.reshape(1, 1);
  return FaceEmbedding::normalized(std::span<const float>(flat.ptr<float>(), out.total()));
}

}  // namespace facematch::facepipe

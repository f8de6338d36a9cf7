#include <cstdlib>

#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

PipelineConfig PipelineConfig::from_env(Backend backend) {
  PipelineConfig cfg;
  cfg.backend = backend;
  if (const char* p = std::getenv("FACEMATCH_DETECTOR_MODEL"); p != nullptr) cfg.detector_model = p;
  if (const char* p = std::getenv("FACEMATCH_EMBEDDER_MODEL"); p != nullptr) cfg.embedder_model = p;
  return cfg;
}

FacePipeline::FacePipeline(std::shared_ptr<const FaceDetector> detector,
                           std::shared_ptr<const FaceEmbedder> embedder)
    : detector_(std::move(detector)), embedder_(std::move(embedder)) {}

FacePipeline FacePipeline::from_config(const PipelineConfig& cfg) {
  if (cfg.backend == Backend::kStub) {
    return FacePipeline(std::make_shared<StubFaceDetector>(), std::make_shared<StubFaceEmbedder>());
  }
  if (cfg.detector_model.empty()) {
    throw ModelLoadError("neural backend needs a detector model (FACEMATCH_DETECTOR_MODEL)");
  }
  if (cfg.embedder_model.empty()) {
    throw ModelLoadError("neural backend needs an embedder model (FACEMATCH_EMBEDDER_MODEL)");
  }
  return FacePipeline(std::make_shared<MtcnnFaceDetector>(cfg.detector_model),
                      std::make_shared<OnnxFaceEmbedder>(cfg.embedder_model));
}

PipelineResult FacePipeline::process(const cv::Mat& bgr) const {
  const auto candidates = detector_->detect(bgr);
  const BoundingBox box = select_largest(candidates);
  return PipelineResult{box, embedder_->embed(crop_and_normalize(bgr, box))};
}

PipelineResult FacePipeline::process(std::span<const std::uint8_t> encoded) const {
  return process(decode_image(encoded));
}

}  // namespace facematch::facepipe

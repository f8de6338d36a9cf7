#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "facematch/facepipe.hpp"
#include "test_support.hpp"

namespace fp = facematch::facepipe;

namespace {

const std::filesystem::path kFixtures = FACEMATCH_FIXTURES;
const std::filesystem::path kModels = kFixtures / "models";

nlohmann::json reference() {
  std::ifstream in(kModels / "reference.json");
  return nlohmann::json::parse(in);
}

// Mirrors probe_tensor() in tools/export_models.py.
fp::FaceTensor probe_tensor() {
  std::vector<float> v(fp::FaceTensor::kSize);
  std::size_t i = 0;
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 160; ++x)
      for (int c = 0; c < 3; ++c) v[i++] = static_cast<float>(std::sin(0.05 * x + 0.09 * y + 1.3 * c));
  return fp::FaceTensor(std::move(v));
}

}  // namespace

TEST(MtcnnDetector, FindsTheAstronaut) {
  const fp::MtcnnFaceDetector det(kModels);
  const auto bytes = facematch::testing::read_bytes(kFixtures / "astronaut.jpg");
  const auto boxes = fp::detect_candidates(bytes, det);
  const auto ref = reference();
  ASSERT_EQ(boxes.size(), ref["astronaut_boxes"].size());
  const auto& want = ref["astronaut_boxes"][0];
  // Integer box covers the reference float box; decoders may differ by a pixel.
  constexpr double kTol = 1.0;
  EXPECT_NEAR(boxes[0].x_min, std::floor(want[0].get<double>()), kTol);
  EXPECT_NEAR(boxes[0].y_min, std::floor(want[1].get<double>()), kTol);
  EXPECT_NEAR(boxes[0].x_max, std::ceil(want[2].get<double>()), kTol);
  EXPECT_NEAR(boxes[0].y_max, std::ceil(want[3].get<double>()), kTol);
  EXPECT_NEAR(boxes[0].confidence, ref["astronaut_probs"][0].get<double>(), 1e-3);
}

TEST(MtcnnDetector, BlankImagesHaveNoFaces) {
  const fp::MtcnnFaceDetector det(kModels);
  EXPECT_TRUE(det.detect(cv::Mat(8, 8, CV_8UC3, cv::Scalar::all(128))).empty());
  EXPECT_TRUE(det.detect(cv::Mat(240, 320, CV_8UC3, cv::Scalar::all(30))).empty());
}

TEST(MtcnnDetector, BoxesStayInsideImage) {
  const fp::MtcnnFaceDetector det(kModels);
  const cv::Mat img = fp::decode_image(facematch::testing::read_bytes(kFixtures / "astronaut.jpg"));
  for (const auto& b : det.detect(img)) {
    EXPECT_GE(b.x_min, 0);
    EXPECT_GE(b.y_min, 0);
    EXPECT_LE(b.x_max, img.cols);
    EXPECT_LE(b.y_max, img.rows);
    EXPECT_GT(b.area(), 0);
  }
}

TEST(OnnxEmbedder, MatchesReferenceHead) {
  const fp::OnnxFaceEmbedder emb(kModels / "tiny_embedder.onnx");
  const auto e = emb.embed(probe_tensor());
  const auto head = reference()["tiny_embedder_probe_head"];
  for (std::size_t i = 0; i < head.size(); ++i) EXPECT_NEAR(e.values()[i], head[i].get<double>(), 1e-4) << i;
  double sq = 0;
  for (float x : e.values()) sq += static_cast<double>(x) * x;
  EXPECT_NEAR(sq, 1.0, 1e-4);
}

TEST(NeuralPipeline, AstronautEndToEnd) {
  fp::PipelineConfig cfg;
  cfg.backend = fp::Backend::kNeural;
  cfg.detector_model = kModels;
  cfg.embedder_model = kModels / "tiny_embedder.onnx";
  const auto pipe = fp::FacePipeline::from_config(cfg);
  const auto bytes = facematch::testing::read_bytes(kFixtures / "astronaut.jpg");
  const auto a = pipe.process(bytes);
  const auto b = pipe.process(bytes);
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_GT(a.box.area(), 80 * 100);
}

TEST(ModelLoading, MissingOrCorruptFilesFail) {
  facematch::testing::TempDir dir;
  EXPECT_THROW(fp::MtcnnFaceDetector(dir.path()), fp::ModelLoadError);
  EXPECT_THROW(fp::OnnxFaceEmbedder(dir / "missing.onnx"), fp::ModelLoadError);
  facematch::testing::write_text(dir / "bad.onnx", "not a model");
  EXPECT_THROW(fp::OnnxFaceEmbedder(dir / "bad.onnx"), fp::ModelLoadError);
  for (const char* n : {"pnet.onnx", "rnet.onnx", "onet.onnx"}) facematch::testing::write_text(dir / n, "junk");
  EXPECT_THROW(fp::MtcnnFaceDetector(dir.path()), fp::ModelLoadError);
}

#include <algorithm>
#include <cmath>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

namespace {

struct Candidate {
  float x1, y1, x2, y2;
  float score;
  std::array<float, 4> reg{};
};

cv::dnn::Net load_net(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ModelLoadError("model file not found: " + path.string());
  }
  try {
    cv::dnn::Net net = cv::dnn::readNetFromONNX(path.string());
    if (net.empty()) throw ModelLoadError("model file could not be loaded: " + path.string());
    net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    return net;
  } catch (const cv::Exception& e) {
    throw ModelLoadError("model file is corrupt: " + path.string() + " (" + e.what() + ")");
  }
}

// Box averaging over adaptive windows [floor(i*in/out), ceil((i+1)*in/out)),
// the resampling the cascade weights were trained with.
cv::Mat area_resample(const cv::Mat& src, int out_h, int out_w) {
  cv::Mat integral;
  cv::integral(src, integral, CV_64F);
  cv::Mat dst(out_h, out_w, CV_32FC3);
  const int in_h = src.rows;
  const int in_w = src.cols;
  for (int i = 0; i < out_h; ++i) {
    const int y0 = static_cast<int>(std::floor(static_cast<double>(i) * in_h / out_h));
    const int y1 = static_cast<int>(std::ceil(static_cast<double>(i + 1) * in_h / out_h));
    for (int j = 0; j < out_w; ++j) {
      const int x0 = static_cast<int>(std::floor(static_cast<double>(j) * in_w / out_w));
      const int x1 = static_cast<int>(std::ceil(static_cast<double>(j + 1) * in_w / out_w));
      const double n = static_cast<double>(y1 - y0) * (x1 - x0);
      const auto s = integral.at<cv::Vec3d>(y1, x1) - integral.at<cv::Vec3d>(y0, x1) -
                     integral.at<cv::Vec3d>(y1, x0) + integral.at<cv::Vec3d>(y0, x0);
      dst.at<cv::Vec3f>(i, j) = cv::Vec3f(static_cast<float>(s[0] / n), static_cast<float>(s[1] / n),
                                          static_cast<float>(s[2] / n));
    }
  }
  return dst;
}

cv::Mat to_blob(const cv::Mat& rgb_float) {
  return cv::dnn::blobFromImage(rgb_float, 0.0078125, cv::Size(), cv::Scalar(127.5, 127.5, 127.5),
                                false, false, CV_32F);
}

enum class Overlap { kUnion, kMin };

std::vector<Candidate> nms(std::vector<Candidate> boxes, float threshold, Overlap mode) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  // Union mode follows the IoU convention without the +1 pixel; Min mode uses
  // inclusive pixel areas.
  const float inc = mode == Overlap::kMin ? 1.0f : 0.0f;
  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<Candidate> kept;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (suppressed[i]) continue;
    const Candidate& a = boxes[i];
    kept.push_back(a);
    const float area_a = (a.x2 - a.x1 + inc) * (a.y2 - a.y1 + inc);
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (suppressed[j]) continue;
      const Candidate& b = boxes[j];
      const float w = std::max(0.0f, std::min(a.x2, b.x2) - std::max(a.x1, b.x1) + inc);
      const float h = std::max(0.0f, std::min(a.y2, b.y2) - std::max(a.y1, b.y1) + inc);
      const float inter = w * h;
      const float area_b = (b.x2 - b.x1 + inc) * (b.y2 - b.y1 + inc);
      const float overlap =
          mode == Overlap::kMin ? inter / std::min(area_a, area_b) : inter / (area_a + area_b - inter);
      if (overlap > threshold) suppressed[j] = true;
    }
  }
  return kept;
}

void square_up(Candidate& c) {
  const float h = c.y2 - c.y1;
  const float w = c.x2 - c.x1;
  const float l = std::max(w, h);
  c.x1 = c.x1 + w * 0.5f - l * 0.5f;
  c.y1 = c.y1 + h * 0.5f - l * 0.5f;
  c.x2 = c.x1 + l;
  c.y2 = c.y1 + l;
}

void apply_regression(Candidate& c) {
  const float w = c.x2 - c.x1 + 1.0f;
  const float h = c.y2 - c.y1 + 1.0f;
  c.x1 += c.reg[0] * w;
  c.y1 += c.reg[1] * h;
  c.x2 += c.reg[2] * w;
  c.y2 += c.reg[3] * h;
}

// Integer crop window clipped to the image with 1-based lower bounds. Returns
// false when the window is empty.
bool crop_window(const Candidate& c, int width, int height, cv::Rect& out) {
  const int x = std::max(1, static_cast<int>(std::trunc(c.x1)));
  const int y = std::max(1, static_cast<int>(std::trunc(c.y1)));
  const int ex = std::min(width, static_cast<int>(std::trunc(c.x2)));
  const int ey = std::min(height, static_cast<int>(std::trunc(c.y2)));
  if (ey <= y - 1 || ex <= x - 1) return false;
  out = cv::Rect(x - 1, y - 1, ex - (x - 1), ey - (y - 1));
  return true;
}

}  // namespace

MtcnnFaceDetector::MtcnnFaceDetector(const std::filesystem::path& model_dir, MtcnnOptions options)
    : options_(options) {
  if (!std::filesystem::is_directory(model_dir)) {
    throw ModelLoadError("detector model directory not found: " + model_dir.string());
  }
  pnet_ = load_net(model_dir / "pnet.onnx");
  rnet_ = load_net(model_dir / "rnet.onnx");
  onet_ = load_net(model_dir / "onet.onnx");
}

std::vector<BoundingBox> MtcnnFaceDetector::detect(const cv::Mat& bgr) const {
  if (bgr.empty()) return {};
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat img;
  rgb.convertTo(img, CV_32FC3);
  const int h = img.rows;
  const int w = img.cols;

  std::vector<double> scales;
  const double m = 12.0 / options_.min_face_size;
  for (double minl = std::min(h, w) * m, s = m; minl >= 12.0; minl *= options_.scale_factor) {
    scales.push_back(s);
    s *= options_.scale_factor;
  }
  if (scales.empty()) return {};

  std::lock_guard lock(mutex_);

  // Stage 1: proposals from the fully convolutional network over a pyramid.
  std::vector<Candidate> boxes;
  for (double scale : scales) {
    const int sh = static_cast<int>(h * scale + 1);
    const int sw = static_cast<int>(w * scale + 1);
    pnet_.setInput(to_blob(area_resample(img, sh, sw)));
    std::vector<cv::Mat> outs;
    pnet_.forward(outs, std::vector<cv::String>{"reg", "prob"});
    const cv::Mat& reg = outs[0];
    const cv::Mat& prob = outs[1];
    const int oh = prob.size[2];
    const int ow = prob.size[3];
    const float* p = prob.ptr<float>(0, 1);
    std::vector<Candidate> scale_boxes;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const float score = p[y * ow + x];
        if (score < options_.thresholds[0]) continue;
        Candidate c;
        c.x1 = static_cast<float>(std::floor((2.0 * x + 1) / scale));
        c.y1 = static_cast<float>(std::floor((2.0 * y + 1) / scale));
        c.x2 = static_cast<float>(std::floor((2.0 * x + 12) / scale));
        c.y2 = static_cast<float>(std::floor((2.0 * y + 12) / scale));
        c.score = score;
        for (int k = 0; k < 4; ++k) c.reg[k] = reg.ptr<float>(0, k)[y * ow + x];
        scale_boxes.push_back(c);
      }
    }
    auto picked = nms(std::move(scale_boxes), 0.5f, Overlap::kUnion);
    boxes.insert(boxes.end(), picked.begin(), picked.end());
  }
  boxes = nms(std::move(boxes), 0.7f, Overlap::kUnion);
  for (auto& c : boxes) {
    const float rw = c.x2 - c.x1;
    const float rh = c.y2 - c.y1;
    c = Candidate{c.x1 + c.reg[0] * rw, c.y1 + c.reg[1] * rh, c.x2 + c.reg[2] * rw,
                  c.y2 + c.reg[3] * rh, c.score, {}};
    square_up(c);
  }

  // Stages 2 and 3 re-score each surviving window on a fixed-size crop.
  auto refine = [&](cv::dnn::Net& net, int side, float threshold,
                    const std::vector<cv::String>& names) {
    std::vector<Candidate> passed;
    for (const auto& c : boxes) {
      cv::Rect win;
      if (!crop_window(c, w, h, win)) continue;
      net.setInput(to_blob(area_resample(img(win), side, side)));
      std::vector<cv::Mat> outs;
      net.forward(outs, names);
      const cv::Mat& reg = outs.front();
      const cv::Mat& prob = outs.back();
      const float score = prob.ptr<float>(0)[1];
      if (score <= threshold) continue;
      Candidate next = c;
      next.score = score;
      for (int k = 0; k < 4; ++k) next.reg[k] = reg.ptr<float>(0)[k];
      passed.push_back(next);
    }
    return passed;
  };

  boxes = refine(rnet_, 24, options_.thresholds[1], {"reg", "prob"});
  boxes = nms(std::move(boxes), 0.7f, Overlap::kUnion);
  for (auto& c : boxes) {
    apply_regression(c);
    square_up(c);
  }

  boxes = refine(onet_, 48, options_.thresholds[2], {"reg", "landmarks", "prob"});
  for (auto& c : boxes) apply_regression(c);
  boxes = nms(std::move(boxes), 0.7f, Overlap::kMin);

  std::vector<BoundingBox> out;
  out.reserve(boxes.size());
  for (const auto& c : boxes) {
    BoundingBox b{static_cast<int>(std::floor(c.x1)), static_cast<int>(std::floor(c.y1)),
                  static_cast<int>(std::ceil(c.x2)), static_cast<int>(std::ceil(c.y2)),
                  std::clamp(c.score, 0.0f, 1.0f)};
    try {
      out.push_back(clamp_to_image(b, w, h));
    } catch (const BoxOutOfBounds&) {
    }
  }
  return out;
}

}  // namespace facematch::facepipe

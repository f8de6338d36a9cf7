#include <algorithm>

#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

BoundingBox clamp_to_image(const BoundingBox& box, int width, int height) {
  BoundingBox out = box;
  out.x_min = std::clamp(box.x_min, 0, width);
  out.y_min = std::clamp(box.y_min, 0, height);
  out.x_max = std::clamp(box.x_max, 0, width);
  out.y_max = std::clamp(box.y_max, 0, height);
  if (out.x_min >= out.x_max || out.y_min >= out.y_max) {
    throw BoxOutOfBounds("box (" + std::to_string(box.x_min) + "," + std::to_string(box.y_min) +
                         "," + std::to_string(box.x_max) + "," + std::to_string(box.y_max) +
                         ") does not overlap the " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
  }
  return out;
}

BoundingBox select_largest(std::span<const BoundingBox> candidates) {
  if (candidates.empty()) throw NoFaceDetected();
  const BoundingBox* best = &candidates.front();
  for (const auto& c : candidates.subspan(1)) {
    if (c.area() > best->area() || (c.area() == best->area() && c.confidence > best->confidence)) {
      best = &c;
    }
  }
  return *best;
}

cv::Mat annotate_detection(const cv::Mat& image, const BoundingBox& box) {
  const BoundingBox b = clamp_to_image(box, image.cols, image.rows);
  cv::Mat out = image.clone();
  const cv::Vec3b red(0, 0, 255);  // BGR
  constexpr int kThickness = 2;

  auto paint = [&](int x, int y) {
    if (x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max) out.at<cv::Vec3b>(y, x) = red;
  };
  for (int t = 0; t < kThickness; ++t) {
    for (int x = b.x_min; x < b.x_max; ++x) {
      paint(x, b.y_min + t);
      paint(x, b.y_max - 1 - t);
    }
    for (int y = b.y_min; y < b.y_max; ++y) {
      paint(b.x_min + t, y);
      paint(b.x_max - 1 - t, y);
    }
  }
  return out;
}

}  // namespace facematch::facepipe

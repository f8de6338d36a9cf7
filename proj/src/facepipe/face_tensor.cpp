#include <opencv2/imgproc.hpp>

#include "facematch/facepipe.hpp"

namespace facematch::facepipe {

FaceTensor::FaceTensor(std::vector<float> values) : values_(std::move(values)) {
  if (values_.size() != kSize) {
    throw ShapeMismatch("face tensor needs " + std::to_string(kSize) + " values, got " +
                        std::to_string(values_.size()));
  }
}

FaceTensor crop_and_normalize(const cv::Mat& image, const BoundingBox& box) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw ShapeMismatch("crop_and_normalize expects an 8-bit 3-channel image");
  }
  const BoundingBox b = clamp_to_image(box, image.cols, image.rows);
  cv::Mat roi = image(cv::Rect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min));

  cv::Mat rgb;
  cv::cvtColor(roi, rgb, cv::COLOR_BGR2RGB);
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3);
  cv::Mat resized;
  if (as_float.cols == FaceTensor::kSide && as_float.rows == FaceTensor::kSide) {
    resized = as_float;
  } else {
    cv::resize(as_float, resized, cv::Size(FaceTensor::kSide, FaceTensor::kSide), 0, 0,
               cv::INTER_LINEAR);
  }

  std::vector<float> values;
  values.reserve(FaceTensor::kSize);
  for (int y = 0; y < FaceTensor::kSide; ++y) {
    const float* row = resized.ptr<float>(y);
    for (int i = 0; i < FaceTensor::kSide * FaceTensor::kChannels; ++i) {
      values.push_back((row[i] - 127.5f) / 128.0f);
    }
  }
  return FaceTensor(std::move(values));
}

}  // namespace facematch::facepipe

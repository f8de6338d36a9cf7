#include <opencv2/imgcodecs.hpp>

#include "facematch/genclient.hpp"

namespace facematch::genclient {

ImageFormat validate_image_payload(std::span<const std::uint8_t> bytes) {
  auto format = sniff_format(bytes);
  if (!format) throw InvalidImagePayload("response is neither PNG nor JPEG");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) throw InvalidImagePayload("response image could not be decoded");
  if (img.cols < 64 || img.rows < 64) {
    throw InvalidImagePayload("response image is " + std::to_string(img.cols) + "x" +
                              std::to_string(img.rows) + ", need at least 64x64");
  }
  return *format;
}

}  // namespace facematch::genclient

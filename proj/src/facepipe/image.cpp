#include <opencv2/imgcodecs.hpp>

#include "facematch/facepipe.hpp"
#include "facematch/image_format.hpp"

namespace facematch::facepipe {

cv::Mat decode_image(std::span<const std::uint8_t> bytes) {
  if (!sniff_format(bytes)) throw ImageDecodeError("image is neither PNG nor JPEG");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) throw ImageDecodeError("image bytes could not be decoded");
  return img;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& image) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", image, out)) throw ImageDecodeError("png encoding failed");
  return out;
}

std::vector<BoundingBox> detect_candidates(std::span<const std::uint8_t> encoded,
                                           const FaceDetector& detector) {
  return detector.detect(decode_image(encoded));
}

}  // namespace facematch::facepipe

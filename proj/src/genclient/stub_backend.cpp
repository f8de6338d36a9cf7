#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "facematch/genclient.hpp"
#include "facematch/sha256.hpp"

namespace facematch::genclient {

namespace {

// BGR colours picked from words in the prompt so the placeholder loosely
// follows the selection; the hash adds per-prompt variation on top.
cv::Scalar skin_colour(std::string_view prompt) {
  if (prompt.find("fair skin") != std::string_view::npos) return {180, 200, 235};
  if (prompt.find("olive skin") != std::string_view::npos) return {110, 160, 190};
  if (prompt.find("brown skin") != std::string_view::npos) return {70, 110, 150};
  if (prompt.find("dark skin") != std::string_view::npos) return {40, 60, 90};
  return {130, 160, 200};
}

cv::Scalar iris_colour(std::string_view prompt) {
  if (prompt.find("blue eyes") != std::string_view::npos) return {200, 120, 40};
  if (prompt.find("green eyes") != std::string_view::npos) return {60, 150, 50};
  if (prompt.find("hazel eyes") != std::string_view::npos) return {50, 100, 140};
  if (prompt.find("grey eyes") != std::string_view::npos) return {140, 140, 140};
  if (prompt.find("brown eyes") != std::string_view::npos) return {30, 60, 100};
  return {20, 20, 20};
}

// Signed jitter in [-range, range] from one digest byte.
int jitter(std::uint8_t b, int range) { return static_cast<int>(b % (2 * range + 1)) - range; }

}  // namespace

GeneratedImage StubImageGenerator::generate(const params::PromptText& prompt) const {
  const std::string& text = prompt.text();
  const Digest d = sha256(text);

  cv::Mat img(kSize, kSize, CV_8UC3,
              cv::Scalar(160 + d[0] % 80, 160 + d[1] % 80, 160 + d[2] % 80));

  const cv::Point centre(kSize / 2 + jitter(d[3], 6), kSize / 2 + jitter(d[4], 6));
  const cv::Size axes(72 + jitter(d[5], 8), 94 + jitter(d[6], 8));
  cv::Scalar skin = skin_colour(text);
  for (int c = 0; c < 3; ++c) skin[c] = std::clamp(skin[c] + jitter(d[7 + c], 12), 0.0, 255.0);
  cv::ellipse(img, centre, axes, 0, 0, 360, skin, cv::FILLED, cv::LINE_8);

  const bool bearded = text.find(" beard") != std::string::npos;
  if (bearded) {
    cv::ellipse(img, {centre.x, centre.y + axes.height / 3}, {axes.width - 6, axes.height / 2}, 0,
                0, 180, cv::Scalar(35, 40, 45), cv::FILLED, cv::LINE_8);
  }

  const int eye_dx = 26 + jitter(d[10], 4);
  const int eye_y = centre.y - 22 + jitter(d[11], 4);
  const int eye_r = 10 + jitter(d[12], 2);
  const cv::Scalar iris = iris_colour(text);
  for (int side : {-1, 1}) {
    const cv::Point eye(centre.x + side * eye_dx, eye_y);
    cv::ellipse(img, eye, {eye_r + 4, eye_r - 2}, 0, 0, 360, cv::Scalar(245, 245, 245), cv::FILLED,
                cv::LINE_8);
    cv::circle(img, eye, eye_r / 2 + 1, iris, cv::FILLED, cv::LINE_8);
    const int brow_y = eye_y - eye_r - 8 + jitter(d[13], 3);
    cv::line(img, {eye.x - eye_r - 4, brow_y + 2 * side * (d[14] % 2)},
             {eye.x + eye_r + 4, brow_y - 2 * side * (d[14] % 2)}, cv::Scalar(30, 30, 40),
             3 + d[15] % 3, cv::LINE_8);
  }

  const int nose_len = 24 + jitter(d[16], 6);
  const int nose_w = 8 + jitter(d[17], 3);
  std::vector<cv::Point> nose = {{centre.x, eye_y + 8},
                                 {centre.x - nose_w, eye_y + 8 + nose_len},
                                 {centre.x + nose_w, eye_y + 8 + nose_len}};
  cv::polylines(img, nose, true, skin * 0.7, 2, cv::LINE_8);

  const int mouth_y = eye_y + nose_len + 34 + jitter(d[18], 4);
  const int mouth_w = 22 + jitter(d[19], 6);
  cv::ellipse(img, {centre.x, mouth_y}, {mouth_w, 6 + d[20] % 5}, 0, 0, 360,
              cv::Scalar(70, 60, 170), cv::FILLED, cv::LINE_8);
  if (text.find(" moustache") != std::string::npos) {
    cv::ellipse(img, {centre.x, mouth_y - 10}, {mouth_w + 4, 5}, 0, 180, 360,
                cv::Scalar(30, 30, 35), cv::FILLED, cv::LINE_8);
  }

  std::vector<std::uint8_t> bytes;
  cv::imencode(".png", img, bytes, {cv::IMWRITE_PNG_COMPRESSION, 6});
  return GeneratedImage{std::move(bytes), ImageFormat::kPng, prompt, backend_id()};
}

}  // namespace facematch::genclient

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facematch/errors.hpp"
#include "facematch/image_format.hpp"
#include "facematch/params.hpp"

namespace facematch::genclient {

// Holds a credential without ever printing it. No stream operator; call
// reveal() at the single point of use.
class Secret {
 public:
  Secret() = default;
  explicit Secret(std::string value) : value_(std::move(value)) {}

  const std::string& reveal() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }
  std::string redacted() const { return value_.empty() ? "<unset>" : "<redacted>"; }

 private:
  std::string value_;
};

enum class Backend { kRemote, kStub };

struct GeneratorConfig {
  Backend backend = Backend::kStub;
  std::string endpoint_url;
  Secret auth_token;
  std::chrono::seconds timeout{60};
  int retries = 2;
  std::chrono::milliseconds retry_interval{2000};

  // Throws ConfigError.
  void validate() const;

  // Reads FACEMATCH_IMAGEGEN_URL / FACEMATCH_IMAGEGEN_TOKEN; a non-empty URL
  // selects the remote backend.
  static GeneratorConfig from_env();
};

struct GeneratedImage {
  std::vector<std::uint8_t> bytes;
  ImageFormat format = ImageFormat::kPng;
  params::PromptText prompt;
  std::string backend_id;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

class BackendUnavailable : public Error {
 public:
  BackendUnavailable(int attempts, const std::string& reason);
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class BackendRejected : public Error {
 public:
  BackendRejected(int status, std::string body_excerpt);
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class InvalidImagePayload : public Error {
 public:
  explicit InvalidImagePayload(const std::string& message) : Error("InvalidImagePayload", message) {}
};

// Throws InvalidImagePayload unless `bytes` is a PNG/JPEG that decodes to at
// least 64x64 pixels.
ImageFormat validate_image_payload(std::span<const std::uint8_t> bytes);

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual GeneratedImage generate(const params::PromptText& prompt) const = 0;
  virtual std::string backend_id() const = 0;
};

// Renders a face-like placeholder whose pixels are a pure function of the
// prompt text: flat background, oval face, eye/brow/nose/mouth glyphs.
class StubImageGenerator final : public ImageGenerator {
 public:
  static constexpr int kSize = 256;

  GeneratedImage generate(const params::PromptText& prompt) const override;
  std::string backend_id() const override { return "stub"; }
};

// Diagnostic sink for the remote client; receives one line per attempt.
using LogSink = std::function<void(const std::string&)>;

class RemoteImageGenerator final : public ImageGenerator {
 public:
  explicit RemoteImageGenerator(GeneratorConfig cfg, LogSink log = {});

  GeneratedImage generate(const params::PromptText& prompt) const override;
  std::string backend_id() const override;

 private:
  GeneratorConfig cfg_;
  LogSink log_;
};

std::unique_ptr<ImageGenerator> make_generator(const GeneratorConfig& cfg, LogSink log = {});

GeneratedImage generate_image(const params::PromptText& prompt, const GeneratorConfig& cfg);

}  // namespace facematch::genclient

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "facematch/errors.hpp"
#include "facematch/facepipe.hpp"
#include "facematch/genclient.hpp"
#include "facematch/params.hpp"
#include "facematch/vecstore.hpp"

namespace facematch::service {

inline constexpr std::size_t kDefaultK = 5;
inline constexpr std::size_t kMaxK = 100;

// Request-level failures that carry their own HTTP status.
class RequestError : public Error {
 public:
  RequestError(int http_status, std::string code, const std::string& message)
      : Error(std::move(code), message), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

struct MatchRequest {
  params::FaceParameters parameters;
  std::size_t k = kDefaultK;
  bool generate = true;
};

struct MatchEntry {
  std::string profile_id;
  std::string name;
  float score = 0.0f;
  int rank = 0;
  std::string image_url;
};

struct MatchResponse {
  std::optional<std::string> prompt;
  std::optional<std::string> generated_image_id;
  std::vector<MatchEntry> matches;

  nlohmann::json to_json() const;
};

struct CachedImage {
  std::vector<std::uint8_t> bytes;
  ImageFormat format = ImageFormat::kPng;
};

// Accepts either a flat object of field -> value or {"parameters": {...}}.
// Throws RequestError (MalformedRequest) or params::ParameterError.
params::FaceParameters parse_parameters(const nlohmann::json& body);
// {"parameters": {...}, "k": 5, "generate": true}. Throws RequestError.
MatchRequest parse_match_request(const nlohmann::json& body);
std::size_t validate_k(long long k);

nlohmann::json vocabulary_document();

// The parameter -> prompt -> image -> embedding -> top-k flow, independent of
// HTTP. The store is a read-only snapshot; handlers may run concurrently.
class MatchService {
 public:
  MatchService(std::shared_ptr<const vecstore::VectorStore> store,
               std::shared_ptr<const genclient::ImageGenerator> generator,
               facepipe::FacePipeline pipeline);

  params::PromptText prompt(const params::FaceParameters& p) const;
  MatchResponse match(const MatchRequest& request);
  MatchResponse match_by_image(std::span<const std::uint8_t> image, std::size_t k) const;

  std::optional<CachedImage> image(const std::string& id) const;
  std::optional<vecstore::Metadata> profile(const std::string& id) const;
  std::size_t profile_count() const { return store_->size(); }

 private:
  std::vector<MatchEntry> search(const facepipe::FaceEmbedding& embedding, std::size_t k) const;
  std::string cache_image(const genclient::GeneratedImage& image);

  static constexpr std::size_t kCacheCapacity = 1024;

  std::shared_ptr<const vecstore::VectorStore> store_;
  std::shared_ptr<const genclient::ImageGenerator> generator_;
  facepipe::FacePipeline pipeline_;

  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, CachedImage> cache_;
  std::deque<std::string> cache_order_;
};

// {"error": {"code": ..., "message": ..., "details": [...]}} and its status.
struct ErrorReply {
  int status = 500;
  nlohmann::json body;
};

enum class ImageSource { kGenerated, kUpload };
ErrorReply error_reply(const std::exception& e, ImageSource source = ImageSource::kGenerated);

struct HttpOptions {
  std::optional<std::filesystem::path> web_root;
};

// Binds the JSON API (and optional static assets under "/") to a host/port.
class HttpServer {
 public:
  HttpServer(MatchService& service, HttpOptions options = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns false if the address cannot be bound. Port 0 picks a free port.
  bool bind(const std::string& host, int port);
  int port() const noexcept { return port_; }
  // Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace facematch::service

#include <cstdlib>

#include "facematch/genclient.hpp"

namespace facematch::genclient {

void GeneratorConfig::validate() const {
  if (backend == Backend::kRemote && endpoint_url.empty()) {
    throw ConfigError("remote image backend requires an endpoint url (FACEMATCH_IMAGEGEN_URL)");
  }
  if (timeout.count() <= 0) throw ConfigError("generator timeout must be positive");
  if (retries < 0) throw ConfigError("generator retries must be non-negative");
  if (retry_interval.count() < 0) throw ConfigError("generator retry interval must be non-negative");
}

GeneratorConfig GeneratorConfig::from_env() {
  GeneratorConfig cfg;
  if (const char* url = std::getenv("FACEMATCH_IMAGEGEN_URL"); url != nullptr && *url != '\0') {
    cfg.backend = Backend::kRemote;
    cfg.endpoint_url = url;
  }
  if (const char* token = std::getenv("FACEMATCH_IMAGEGEN_TOKEN"); token != nullptr) {
    cfg.auth_token = Secret(token);
  }
  return cfg;
}

BackendUnavailable::BackendUnavailable(int attempts, const std::string& reason)
    : Error("BackendUnavailable",
            "image backend unavailable after " + std::to_string(attempts) + " attempt(s): " + reason),
      attempts_(attempts) {}

BackendRejected::BackendRejected(int status, std::string body_excerpt)
    : Error("BackendRejected",
            "image backend rejected the request with status " + std::to_string(status) +
                (body_excerpt.empty() ? std::string() : ": " + body_excerpt)),
      status_(status),
      body_excerpt_(std::move(body_excerpt)) {}

std::unique_ptr<ImageGenerator> make_generator(const GeneratorConfig& cfg, LogSink log) {
  cfg.validate();
  if (cfg.backend == Backend::kStub) return std::make_unique<StubImageGenerator>();
  return std::make_unique<RemoteImageGenerator>(cfg, std::move(log));
}

GeneratedImage generate_image(const params::PromptText& prompt, const GeneratorConfig& cfg) {
  return make_generator(cfg)->generate(prompt);
}

}  // namespace facematch::genclient

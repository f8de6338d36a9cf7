#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "facematch/genclient.hpp"

namespace facematch::genclient {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint url has no scheme: " + url);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("endpoint url must be http or https: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_transient(int status) { return status == 429 || status == 503; }

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  std::string out = body.substr(0, kMax);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e) c = '.';
  }
  return out;
}

}  // namespace

RemoteImageGenerator::RemoteImageGenerator(GeneratorConfig cfg, LogSink log)
    : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.backend = Backend::kRemote;
  cfg_.validate();
  split_url(cfg_.endpoint_url);
}

std::string RemoteImageGenerator::backend_id() const { return "remote:" + cfg_.endpoint_url; }

GeneratedImage RemoteImageGenerator::generate(const params::PromptText& prompt) const {
  const auto [origin, path] = split_url(cfg_.endpoint_url);
  const std::string body = nlohmann::json{{"inputs", prompt.text()}}.dump();

  httplib::Headers headers = {{"Accept", "image/png, image/jpeg"}};
  if (!cfg_.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg_.auth_token.reveal());
  }

  const int attempts = cfg_.retries + 1;
  std::string last_error;
  int last_status = 0;
  std::string last_body;

  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(origin);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      last_status = 0;
      if (log_) {
        log_("imagegen attempt " + std::to_string(attempt) + "/" + std::to_string(attempts) +
             " to " + cfg_.endpoint_url + " failed: " + last_error);
      }
    } else if (res->status >= 200 && res->status < 300) {
      std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
      const ImageFormat format = validate_image_payload(bytes);
      return GeneratedImage{std::move(bytes), format, prompt, backend_id()};
    } else if (is_transient(res->status)) {
      last_status = res->status;
      last_body = res->body;
      if (log_) {
        log_("imagegen attempt " + std::to_string(attempt) + "/" + std::to_string(attempts) +
             " got transient status " + std::to_string(res->status));
      }
    } else {
      throw BackendRejected(res->status, excerpt(res->body));
    }

    if (attempt < attempts) std::this_thread::sleep_for(cfg_.retry_interval);
  }

  if (last_status != 0) throw BackendRejected(last_status, excerpt(last_body));
  throw BackendUnavailable(attempts, last_error);
}

}  // namespace facematch::genclient

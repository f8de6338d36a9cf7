#include <httplib.h>

#include <fstream>
#include <thread>

#include "facematch/ingest.hpp"

namespace facematch::ingest {

std::vector<std::uint8_t> LocalFetcher::fetch(const std::string& url) const {
  constexpr std::string_view kScheme = "file://";
  std::filesystem::path path =
      url.starts_with(kScheme) ? std::filesystem::path(url.substr(kScheme.size())) : std::filesystem::path(url);
  if (path.is_relative() && !base_dir_.empty()) path = base_dir_ / path;

  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw FetchError("cannot read " + path.string() + ": " + ec.message());
  if (size > kMaxImageBytes) {
    // Surfaced as a decode failure by ingest_all.
    return std::vector<std::uint8_t>(kMaxImageBytes + 1);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FetchError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw FetchError("short read on " + path.string());
  return bytes;
}

std::vector<std::uint8_t> HttpFetcher::fetch(const std::string& url) const {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    httplib::Client client(origin);
    if (!client.is_valid()) throw FetchError("invalid url: " + url);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_follow_location(true);

    std::size_t received = 0;
    std::string body;
    auto res = client.Get(path, [&](const char* data, std::size_t len) {
      received += len;
      if (received > kMaxImageBytes) return false;
      body.append(data, len);
      return true;
    });
    if (received > kMaxImageBytes) return std::vector<std::uint8_t>(kMaxImageBytes + 1);
    if (res && res->status >= 200 && res->status < 300) {
      return std::vector<std::uint8_t>(body.begin(), body.end());
    }
    last_error = res ? "status " + std::to_string(res->status) : httplib::to_string(res.error());
    if (res && res->status >= 400 && res->status < 500) break;
  }
  throw FetchError("fetching " + url + " failed: " + last_error);
}

std::vector<std::uint8_t> DefaultFetcher::fetch(const std::string& url) const {
  if (url.starts_with("http://") || url.starts_with("https://")) return http_.fetch(url);
  if (url.starts_with("file://")) return local_.fetch(url);
  throw FetchError("unsupported url scheme: " + url);
}

}  // namespace facematch::ingest

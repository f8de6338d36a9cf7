#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "facematch/errors.hpp"
#include "facematch/facepipe.hpp"
#include "facematch/vecstore.hpp"

namespace facematch::ingest {

enum class Status {
  kPending,
  kIngested,
  kSkippedNullUrl,
  kSkippedFetchFailed,
  kSkippedNoFace,
  kSkippedDecodeError,
};

std::string_view to_string(Status status);

struct ProfileRecord {
  std::string id;
  std::string name;
  std::string image_url;
  Status status = Status::kPending;
  // Why a record was skipped; empty otherwise.
  std::string detail;
};

class ManifestParseError : public Error {
 public:
  ManifestParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class StoreUnavailable : public Error {
 public:
  explicit StoreUnavailable(const std::string& message) : Error("StoreUnavailable", message) {}
};

class FetchError : public Error {
 public:
  explicit FetchError(const std::string& message) : Error("FetchError", message) {}
};

// Default id for the n-th record (1-based) when the manifest has no id.
std::string default_id(std::size_t ordinal);

// JSON Lines: one object per non-blank line with `name`, `image_url` and an
// optional `id`. Missing, null, empty or literal "null" urls are marked
// kSkippedNullUrl.
std::vector<ProfileRecord> parse_manifest(std::string_view text);
std::vector<ProfileRecord> parse_manifest_file(const std::filesystem::path& path);

class Fetcher {
 public:
  virtual ~Fetcher() = default;
  // Throws FetchError.
  virtual std::vector<std::uint8_t> fetch(const std::string& url) const = 0;
};

// file:// urls, resolved against `base_dir` when relative.
class LocalFetcher final : public Fetcher {
 public:
  explicit LocalFetcher(std::filesystem::path base_dir = {}) : base_dir_(std::move(base_dir)) {}
  std::vector<std::uint8_t> fetch(const std::string& url) const override;

 private:
  std::filesystem::path base_dir_;
};

class HttpFetcher final : public Fetcher {
 public:
  explicit HttpFetcher(std::chrono::seconds timeout = std::chrono::seconds(30), int retries = 1)
      : timeout_(timeout), retries_(retries) {}
  std::vector<std::uint8_t> fetch(const std::string& url) const override;

 private:
  std::chrono::seconds timeout_;
  int retries_;
};

// Dispatches on the url scheme.
class DefaultFetcher final : public Fetcher {
 public:
  explicit DefaultFetcher(std::filesystem::path base_dir = {}) : local_(std::move(base_dir)) {}
  std::vector<std::uint8_t> fetch(const std::string& url) const override;

 private:
  LocalFetcher local_;
  HttpFetcher http_;
};

inline constexpr std::size_t kMaxImageBytes = 20u * 1024 * 1024;

struct IngestOptions {
  std::size_t parallelism = 4;
};

struct IngestReport {
  std::size_t total = 0;
  std::map<Status, std::size_t> counts;

  std::size_t count(Status s) const {
    auto it = counts.find(s);
    return it == counts.end() ? 0 : it->second;
  }
  std::string to_json() const;
};

// Runs every pending record through fetch -> decode -> detect -> embed and
// upserts the successes in record order. Per-record failures only change that
// record's status; store-level failures throw StoreUnavailable.
IngestReport ingest_all(std::vector<ProfileRecord>& records, vecstore::VectorStore& store,
                        const facepipe::FacePipeline& pipeline, const Fetcher& fetcher,
                        const IngestOptions& options = {});

}  // namespace facematch::ingest

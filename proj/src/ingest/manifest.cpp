#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "facematch/ingest.hpp"
#include "facematch/text.hpp"

namespace facematch::ingest {

std::string_view to_string(Status status) {
  switch (status) {
    case Status::kPending:
      return "pending";
    case Status::kIngested:
      return "ingested";
    case Status::kSkippedNullUrl:
      return "skipped_null_url";
    case Status::kSkippedFetchFailed:
      return "skipped_fetch_failed";
    case Status::kSkippedNoFace:
      return "skipped_no_face";
    case Status::kSkippedDecodeError:
      return "skipped_decode_error";
  }
  return "pending";
}

ManifestParseError::ManifestParseError(std::size_t line, const std::string& message)
    : Error("ManifestParseError", "manifest line " + std::to_string(line) + ": " + message),
      line_(line) {}

std::string default_id(std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%05zu", ordinal);
  return buf;
}

namespace {

bool is_null_url(const nlohmann::json& row) {
  auto it = row.find("image_url");
  if (it == row.end() || it->is_null()) return true;
  if (!it->is_string()) return false;
  const auto url = trim(it->get_ref<const std::string&>());
  return url.empty() || to_lower(url) == "null";
}

}  // namespace

std::vector<ProfileRecord> parse_manifest(std::string_view text) {
  std::vector<ProfileRecord> records;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;

    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ManifestParseError(line_no, "not a JSON object");
    }
    if (!row.is_object()) throw ManifestParseError(line_no, "not a JSON object");

    auto name = row.find("name");
    if (name == row.end() || !name->is_string()) {
      throw ManifestParseError(line_no, "missing string field 'name'");
    }

    ProfileRecord rec;
    rec.name = name->get<std::string>();
    if (auto id = row.find("id"); id != row.end() && !id->is_null()) {
      if (id->is_string()) {
        rec.id = std::string(trim(id->get_ref<const std::string&>()));
      } else if (id->is_number_integer()) {
        rec.id = std::to_string(id->get<long long>());
      } else {
        throw ManifestParseError(line_no, "field 'id' must be a string or integer");
      }
    }
    if (rec.id.empty()) rec.id = default_id(records.size() + 1);

    if (is_null_url(row)) {
      rec.status = Status::kSkippedNullUrl;
      rec.detail = "image url is null";
    } else {
      const auto& url = row.at("image_url");
      if (!url.is_string()) throw ManifestParseError(line_no, "field 'image_url' must be a string");
      rec.image_url = std::string(trim(url.get_ref<const std::string&>()));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ProfileRecord> parse_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string IngestReport::to_json() const {
  nlohmann::json j = {{"total", total}};
  for (auto s : {Status::kIngested, Status::kSkippedNullUrl, Status::kSkippedFetchFailed,
                 Status::kSkippedNoFace, Status::kSkippedDecodeError}) {
    j[std::string(to_string(s))] = count(s);
  }
  return j.dump();
}

}  // namespace facematch::ingest

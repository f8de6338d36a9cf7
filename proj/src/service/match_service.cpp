#include "facematch/service.hpp"
#include "facematch/sha256.hpp"

namespace facematch::service {

nlohmann::json MatchResponse::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (prompt) j["prompt"] = *prompt;
  if (generated_image_id) j["generated_image_id"] = *generated_image_id;
  j["matches"] = nlohmann::json::array();
  for (const auto& m : matches) {
    j["matches"].push_back({{"profile_id", m.profile_id},
                            {"name", m.name},
                            {"score", m.score},
                            {"rank", m.rank},
                            {"image_url", m.image_url}});
  }
  return j;
}

std::size_t validate_k(long long k) {
  if (k < 1 || k > static_cast<long long>(kMaxK)) {
    throw RequestError(400, "InvalidK",
                       "k must be between 1 and " + std::to_string(kMaxK) + ", got " + std::to_string(k));
  }
  return static_cast<std::size_t>(k);
}

params::FaceParameters parse_parameters(const nlohmann::json& body) {
  if (!body.is_object()) throw RequestError(400, "MalformedRequest", "request body must be a JSON object");
  const nlohmann::json& fields = body.contains("parameters") ? body.at("parameters") : body;
  if (!fields.is_object()) throw RequestError(400, "MalformedRequest", "'parameters' must be an object");

  std::map<std::string, std::string> raw;
  for (const auto& [key, value] : fields.items()) {
    if (value.is_null()) continue;
    if (!value.is_string()) {
      throw RequestError(400, "MalformedRequest", "parameter '" + key + "' must be a string");
    }
    raw.emplace(key, value.get<std::string>());
  }
  return params::validate_parameters(raw);
}

MatchRequest parse_match_request(const nlohmann::json& body) {
  if (!body.is_object()) throw RequestError(400, "MalformedRequest", "request body must be a JSON object");
  if (!body.contains("parameters")) {
    throw RequestError(400, "MalformedRequest", "match request needs a 'parameters' object");
  }
  MatchRequest req{parse_parameters(nlohmann::json{{"parameters", body.at("parameters")}})};
  if (auto it = body.find("k"); it != body.end()) {
    if (!it->is_number_integer()) throw RequestError(400, "InvalidK", "k must be an integer");
    req.k = validate_k(it->get<long long>());
  }
  if (auto it = body.find("generate"); it != body.end()) {
    if (!it->is_boolean()) throw RequestError(400, "MalformedRequest", "'generate' must be a boolean");
    req.generate = it->get<bool>();
  }
  return req;
}

nlohmann::json vocabulary_document() {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& spec : params::schema()) {
    fields.push_back({{"name", spec.key},
                      {"required", spec.required},
                      {"male_only", spec.male_only},
                      {"values", spec.allowed}});
  }
  return {{"fields", fields}, {"default_k", kDefaultK}, {"max_k", kMaxK}};
}

MatchService::MatchService(std::shared_ptr<const vecstore::VectorStore> store,
                           std::shared_ptr<const genclient::ImageGenerator> generator,
                           facepipe::FacePipeline pipeline)
    : store_(std::move(store)), generator_(std::move(generator)), pipeline_(std::move(pipeline)) {}

params::PromptText MatchService::prompt(const params::FaceParameters& p) const {
  return params::build_prompt(p);
}

std::vector<MatchEntry> MatchService::search(const facepipe::FaceEmbedding& embedding,
                                             std::size_t k) const {
  std::vector<MatchEntry> out;
  for (const auto& hit : store_->search(embedding.values(), k)) {
    const auto md = store_->metadata(hit.id).value_or(vecstore::Metadata{});
    auto get = [&](const char* key) {
      auto it = md.find(key);
      return it == md.end() ? std::string() : it->second;
    };
    out.push_back({hit.id, get("name"), hit.score, hit.rank, get("image_url")});
  }
  return out;
}

std::string MatchService::cache_image(const genclient::GeneratedImage& image) {
  std::string id = to_hex(sha256(image.bytes));
  std::lock_guard lock(cache_mutex_);
  if (cache_.emplace(id, CachedImage{image.bytes, image.format}).second) {
    cache_order_.push_back(id);
    if (cache_order_.size() > kCacheCapacity) {
      cache_.erase(cache_order_.front());
      cache_order_.pop_front();
    }
  }
  return id;
}

MatchResponse MatchService::match(const MatchRequest& request) {
  validate_k(static_cast<long long>(request.k));
  MatchResponse resp;
  const params::PromptText prompt = params::build_prompt(request.parameters);
  resp.prompt = prompt.text();
  if (!request.generate) return resp;

  // Fail before paying for generation when there is nothing to search.
  if (store_->size() == 0) throw vecstore::EmptyStore();

  const genclient::GeneratedImage image = generator_->generate(prompt);
  resp.generated_image_id = cache_image(image);
  const auto result = pipeline_.process(image.bytes);
  resp.matches = search(result.embedding, request.k);
  return resp;
}

MatchResponse MatchService::match_by_image(std::span<const std::uint8_t> image, std::size_t k) const {
  validate_k(static_cast<long long>(k));
  const cv::Mat decoded = facepipe::decode_image(image);
  if (store_->size() == 0) throw vecstore::EmptyStore();
  const auto result = pipeline_.process(decoded);
  MatchResponse resp;
  resp.matches = search(result.embedding, k);
  return resp;
}

std::optional<CachedImage> MatchService::image(const std::string& id) const {
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(id);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

std::optional<vecstore::Metadata> MatchService::profile(const std::string& id) const {
  return store_->metadata(id);
}

}  // namespace facematch::service

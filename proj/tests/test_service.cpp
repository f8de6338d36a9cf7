#include <httplib.h>

#include <thread>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "facematch/ingest.hpp"
#include "facematch/service.hpp"

namespace sv = facematch::service;
namespace fp = facematch::facepipe;
namespace gc = facematch::genclient;
namespace vs = facematch::vecstore;
using nlohmann::json;
using facematch::testing::TempDir;

namespace {

json female_parameters() {
  return {{"gender", "Female"},     {"age_group", "adult"},         {"skin_tone", "fair"},
          {"eye_shape", "almond-shaped"}, {"eye_color", "black"},   {"eyebrow_shape", "straight"},
          {"nose_shape", "button"}, {"lip_shape", "full"},          {"face_shape", "oval"},
          {"jawline_shape", "square"}, {"chin_shape", "pointed"}};
}

const char* kFemalePrompt =
    "a face of an adult Female with fair skin tone, almond-shaped eye shape with black eyes, button nose, "
    "and full lips, straight eyebrows, oval face shape, square jawline, pointed chin";

// Store populated from a small stub corpus, shared by the tests in this file.
class Corpus : public ::testing::Environment {
 public:
  void SetUp() override {
    dir = std::make_unique<TempDir>();
    entries = facematch::testing::write_stub_corpus(dir->path(), 12);
    auto recs = facematch::ingest::parse_manifest_file(dir->path() / "manifest.jsonl");
    auto s = std::make_shared<vs::VectorStore>();
    facematch::ingest::ingest_all(recs, *s, fp::FacePipeline::from_config({}),
                                  facematch::ingest::LocalFetcher(dir->path()));
    store = s;
  }
  void TearDown() override { dir.reset(); }

  static inline std::unique_ptr<TempDir> dir;
  static inline std::vector<facematch::testing::CorpusEntry> entries;
  static inline std::shared_ptr<const vs::VectorStore> store;
};

const auto* const kCorpus = ::testing::AddGlobalTestEnvironment(new Corpus);

sv::MatchService make_service(std::shared_ptr<const vs::VectorStore> store = Corpus::store,
                              std::shared_ptr<const gc::ImageGenerator> gen = std::make_shared<gc::StubImageGenerator>()) {
  return sv::MatchService(std::move(store), std::move(gen), fp::FacePipeline::from_config({}));
}

// Generator that always fails as an unreachable backend would.
struct DownGenerator : gc::ImageGenerator {
  gc::GeneratedImage generate(const facematch::params::PromptText&) const override {
    throw gc::BackendUnavailable(3, "connection refused");
  }
  std::string backend_id() const override { return "down"; }
};

// Generator that returns a blank image; with a blind detector it yields NoFace.
struct Blind : fp::FaceDetector {
  std::vector<fp::BoundingBox> detect(const cv::Mat&) const override { return {}; }
};

class Server {
 public:
  explicit Server(sv::MatchService& service, sv::HttpOptions options = {}) : http_(service, std::move(options)) {
    if (!http_.bind("127.0.0.1", 0)) throw std::runtime_error("bind failed");
    thread_ = std::thread([this] { http_.listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", http_.port());
    for (int i = 0; i < 200 && !client_->Get("/healthz"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~Server() {
    http_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }

 private:
  sv::HttpServer http_;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

json post_json(httplib::Client& c, const std::string& path, const json& body, int& status) {
  auto res = c.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("request failed");
  status = res->status;
  return json::parse(res->body);
}

}  // namespace

TEST(ParseMatchRequest, DefaultsAndValidation) {
  const auto req = sv::parse_match_request({{"parameters", female_parameters()}});
  EXPECT_EQ(req.k, 5u);
  EXPECT_TRUE(req.generate);
  EXPECT_EQ(sv::parse_match_request({{"parameters", female_parameters()}, {"k", 100}}).k, 100u);
  for (const json& k : {json(0), json(101), json(-1), json("5"), json(2.5)}) {
    try {
      sv::parse_match_request({{"parameters", female_parameters()}, {"k", k}});
      FAIL() << k;
    } catch (const sv::RequestError& e) {
      EXPECT_EQ(e.code(), "InvalidK");
      EXPECT_EQ(e.http_status(), 400);
    }
  }
  EXPECT_THROW(sv::parse_match_request(json::array()), sv::RequestError);
  EXPECT_THROW(sv::parse_match_request({{"k", 5}}), sv::RequestError);
  EXPECT_THROW(sv::parse_match_request({{"parameters", female_parameters()}, {"generate", "yes"}}), sv::RequestError);
}

TEST(ParseParameters, FlatOrNested) {
  EXPECT_EQ(sv::parse_parameters(female_parameters()), sv::parse_parameters({{"parameters", female_parameters()}}));
  json bad = female_parameters();
  bad["gender"] = 1;
  EXPECT_THROW(sv::parse_parameters(bad), sv::RequestError);
  json nulled = female_parameters();
  nulled["beard"] = nullptr;
  EXPECT_NO_THROW(sv::parse_parameters(nulled));
}

TEST(Vocabulary, ListsEveryField) {
  const json v = sv::vocabulary_document();
  ASSERT_EQ(v["fields"].size(), 13u);
  EXPECT_EQ(v["fields"][0]["name"], "gender");
  EXPECT_EQ(v["fields"][0]["values"], json::array({"Male", "Female"}));
  EXPECT_EQ(v["fields"][11]["name"], "beard");
  EXPECT_EQ(v["fields"][11]["male_only"], true);
  EXPECT_EQ(v["fields"][11]["required"], false);
  EXPECT_EQ(v["default_k"], 5);
  EXPECT_EQ(v["max_k"], 100);
}

TEST(MatchService, GeneratesAndRanks) {
  auto svc = make_service();
  const auto resp = svc.match(sv::parse_match_request({{"parameters", female_parameters()}, {"k", 3}}));
  EXPECT_EQ(resp.prompt, kFemalePrompt);
  ASSERT_TRUE(resp.generated_image_id.has_value());
  ASSERT_EQ(resp.matches.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(resp.matches[i].rank, i + 1);
  EXPECT_GE(resp.matches[0].score, resp.matches[1].score);
  EXPECT_FALSE(resp.matches[0].name.empty());
  EXPECT_TRUE(resp.matches[0].image_url.starts_with("file://images/"));

  const auto img = svc.image(*resp.generated_image_id);
  ASSERT_TRUE(img.has_value());
  const auto direct = gc::StubImageGenerator().generate(facematch::params::PromptText(kFemalePrompt));
  EXPECT_EQ(img->bytes, direct.bytes);
}

TEST(MatchService, DeterministicAcrossCalls) {
  auto svc = make_service();
  const auto req = sv::parse_match_request({{"parameters", female_parameters()}});
  EXPECT_EQ(svc.match(req).to_json(), svc.match(req).to_json());
}

TEST(MatchService, PromptOnlyWhenNotGenerating) {
  auto svc = make_service(std::make_shared<vs::VectorStore>(), std::make_shared<DownGenerator>());
  const auto resp = svc.match(sv::parse_match_request({{"parameters", female_parameters()}, {"generate", false}}));
  EXPECT_EQ(resp.prompt, kFemalePrompt);
  EXPECT_FALSE(resp.generated_image_id.has_value());
  EXPECT_TRUE(resp.matches.empty());
}

TEST(MatchService, EmptyStoreFailsBeforeGenerating) {
  auto svc = make_service(std::make_shared<vs::VectorStore>(), std::make_shared<DownGenerator>());
  EXPECT_THROW(svc.match(sv::parse_match_request({{"parameters", female_parameters()}})), vs::EmptyStore);
}

TEST(MatchService, SelfMatchByUpload) {
  auto svc = make_service();
  const auto bytes = facematch::testing::read_bytes(Corpus::entries[4].image);
  const auto resp = svc.match_by_image(bytes, 5);
  ASSERT_FALSE(resp.matches.empty());
  EXPECT_EQ(resp.matches[0].profile_id, Corpus::entries[4].id);
  EXPECT_GE(resp.matches[0].score, 0.999f);
  EXPECT_FALSE(resp.prompt.has_value());
}

TEST(ErrorReply, StatusMapping) {
  EXPECT_EQ(sv::error_reply(gc::BackendUnavailable(3, "x")).status, 502);
  EXPECT_EQ(sv::error_reply(gc::BackendRejected(500, "x")).status, 502);
  EXPECT_EQ(sv::error_reply(gc::InvalidImagePayload("x")).status, 502);
  EXPECT_EQ(sv::error_reply(fp::NoFaceDetected()).status, 422);
  EXPECT_EQ(sv::error_reply(vs::EmptyStore()).status, 409);
  EXPECT_EQ(sv::error_reply(fp::ImageDecodeError("x"), sv::ImageSource::kUpload).status, 415);
  EXPECT_EQ(sv::error_reply(fp::ImageDecodeError("x")).status, 502);
  EXPECT_EQ(sv::error_reply(std::runtime_error("boom")).status, 500);
  const auto reply = sv::error_reply(std::runtime_error("secret detail"));
  EXPECT_EQ(reply.body["error"]["code"], "InternalError");
  EXPECT_EQ(reply.body.dump().find("secret detail"), std::string::npos);
}

TEST(Http, HealthAndVocabulary) {
  auto svc = make_service();
  Server server(svc);
  auto res = server.client().Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["profile_count"], 12);
  res = server.client().Get("/api/v1/vocabulary");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body), sv::vocabulary_document());
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
}

TEST(Http, PromptEndpoint) {
  auto svc = make_service();
  Server server(svc);
  int status = 0;
  auto body = post_json(server.client(), "/api/v1/prompt", female_parameters(), status);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["prompt"], kFemalePrompt);

  json bad = female_parameters();
  bad["beard"] = "full";
  body = post_json(server.client(), "/api/v1/prompt", bad, status);
  EXPECT_EQ(status, 400);
  EXPECT_EQ(body["error"]["code"], "InconsistentSelection");
  EXPECT_EQ(body["error"]["details"][0]["field"], "beard");
}

TEST(Http, MatchEndpointAndImageCache) {
  auto svc = make_service();
  Server server(svc);
  int status = 0;
  const json req = {{"parameters", female_parameters()}, {"k", 4}};
  const json a = post_json(server.client(), "/api/v1/match", req, status);
  ASSERT_EQ(status, 200);
  EXPECT_EQ(a["prompt"], kFemalePrompt);
  EXPECT_EQ(a["matches"].size(), 4u);
  EXPECT_EQ(a["matches"][0]["rank"], 1);
  EXPECT_EQ(post_json(server.client(), "/api/v1/match", req, status), a);

  auto img = server.client().Get("/api/v1/images/" + a["generated_image_id"].get<std::string>());
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  const auto direct = gc::StubImageGenerator().generate(facematch::params::PromptText(kFemalePrompt));
  EXPECT_EQ(img->body, std::string(direct.bytes.begin(), direct.bytes.end()));

  auto missing = server.client().Get("/api/v1/images/" + std::string(64, 'a'));
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"]["code"], "NotFound");
}

TEST(Http, MatchErrors) {
  auto svc = make_service();
  Server server(svc);
  int status = 0;
  json body = post_json(server.client(), "/api/v1/match", {{"parameters", female_parameters()}, {"k", 0}}, status);
  EXPECT_EQ(status, 400);
  EXPECT_EQ(body["error"]["code"], "InvalidK");

  json unknown = female_parameters();
  unknown["freckles"] = "many";
  body = post_json(server.client(), "/api/v1/match", {{"parameters", unknown}}, status);
  EXPECT_EQ(status, 400);
  EXPECT_EQ(body["error"]["code"], "UnknownField");

  auto res = server.client().Post("/api/v1/match", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "MalformedRequest");
}

TEST(Http, EmptyStoreIsConflict) {
  auto svc = make_service(std::make_shared<vs::VectorStore>());
  Server server(svc);
  int status = 0;
  const json body = post_json(server.client(), "/api/v1/match", {{"parameters", female_parameters()}}, status);
  EXPECT_EQ(status, 409);
  EXPECT_EQ(body["error"]["code"], "EmptyStore");
}

TEST(Http, BackendDownIsBadGateway) {
  auto svc = make_service(Corpus::store, std::make_shared<DownGenerator>());
  Server server(svc);
  int status = 0;
  const json body = post_json(server.client(), "/api/v1/match", {{"parameters", female_parameters()}}, status);
  EXPECT_EQ(status, 502);
  EXPECT_EQ(body["error"]["code"], "BackendUnavailable");
}

TEST(Http, NoFaceIsUnprocessable) {
  sv::MatchService svc(Corpus::store, std::make_shared<gc::StubImageGenerator>(),
                       fp::FacePipeline(std::make_shared<Blind>(), std::make_shared<fp::StubFaceEmbedder>()));
  Server server(svc);
  int status = 0;
  const json body = post_json(server.client(), "/api/v1/match", {{"parameters", female_parameters()}}, status);
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["error"]["code"], "NoFaceDetected");
}

TEST(Http, MatchByImage) {
  auto svc = make_service();
  Server server(svc);
  const auto bytes = facematch::testing::read_bytes(Corpus::entries[7].image);
  const std::string content(bytes.begin(), bytes.end());

  httplib::MultipartFormDataItems items = {{"image", content, "face.png", "image/png"}, {"k", "2", "", ""}};
  auto res = server.client().Post("/api/v1/match-by-image", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  json body = json::parse(res->body);
  ASSERT_EQ(body["matches"].size(), 2u);
  EXPECT_EQ(body["matches"][0]["profile_id"], Corpus::entries[7].id);
  EXPECT_FALSE(body.contains("prompt"));

  res = server.client().Post("/api/v1/match-by-image?k=1", content, "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["matches"].size(), 1u);

  res = server.client().Post("/api/v1/match-by-image", "GIF89a not really", "image/gif");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 415);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "ImageDecodeError");

  res = server.client().Post("/api/v1/match-by-image?k=abc", content, "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(Http, Profiles) {
  auto svc = make_service();
  Server server(svc);
  auto res = server.client().Get("/api/v1/profiles/p003");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["name"], "Person 3");
  EXPECT_EQ(body["image_url"], "file://images/p003.png");
  res = server.client().Get("/api/v1/profiles/nobody");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
}

TEST(Http, UnknownRouteIsJson404) {
  auto svc = make_service();
  Server server(svc);
  auto res = server.client().Get("/api/v1/nothing-here");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "NotFound");
}

TEST(Http, StaticMountServesWebRoot) {
  TempDir web;
  facematch::testing::write_text(web / "index.html", "<!doctype html><title>facematch</title>");
  auto svc = make_service();
  Server server(svc, {.web_root = web.path()});
  auto res = server.client().Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("facematch"), std::string::npos);
  res = server.client().Get("/api/v1/vocabulary");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
}

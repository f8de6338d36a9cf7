#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <thread>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "facematch/vecstore.hpp"

using facematch::testing::TempDir;
using nlohmann::json;

namespace {

const std::string kCli = FACEMATCH_CLI;
const std::filesystem::path kFixtures = FACEMATCH_FIXTURES;

// Environment prefix that removes every facematch variable.
const std::string kCleanEnv =
    "env -u FACEMATCH_BACKEND -u FACEMATCH_IMAGEGEN_URL -u FACEMATCH_IMAGEGEN_TOKEN "
    "-u FACEMATCH_DETECTOR_MODEL -u FACEMATCH_EMBEDDER_MODEL ";

struct Result {
  int code = -1;
  std::string out;  // stdout only
  std::string all;  // stdout + stderr
};

Result run(const std::string& args, const std::string& env = "") {
  TempDir tmp;
  const std::string cmd = kCleanEnv + env + " " + kCli + " " + args + " >" + (tmp / "out").string() + " 2>" +
                          (tmp / "err").string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto out = facematch::testing::read_bytes(tmp / "out");
  const auto err = facematch::testing::read_bytes(tmp / "err");
  r.out.assign(out.begin(), out.end());
  r.all = r.out + std::string(err.begin(), err.end());
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const char* kMaleParams = R"(# selection used for the match examples
gender=Male
age_group=adult
skin_tone=olive
eye_shape=round
eye_color=black
eyebrow_shape=thick
nose_shape=button
lip_shape=full
face_shape=round
jawline_shape=square
chin_shape=pointed
beard=full
)";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    facematch::testing::write_stub_corpus(dir.path(), 12);
    facematch::testing::write_text(dir / "male.txt", kMaleParams);
    manifest = dir / "manifest.jsonl";
    store = dir / "store";
  }

  void ingest() {
    const auto r = run("ingest --backend stub --manifest " + q(manifest) + " --store " + q(store));
    ASSERT_EQ(r.code, 0) << r.all;
  }

  TempDir dir;
  std::filesystem::path manifest;
  std::filesystem::path store;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("ingest --store " + q(store)).code, 2);
  const auto r = run("ingest --backend stub --manifest " + q(dir / "missing.jsonl") + " --store " + q(store));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.all.find("missing.jsonl"), std::string::npos);
  EXPECT_EQ(run("bench --kind ivf").code, 2);
  EXPECT_EQ(run("match --backend stub --params " + q(dir / "male.txt") + " --store " + q(store) + " -k 0").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, IngestFiltersNullUrls) {
  facematch::testing::write_text(dir / "five.jsonl", R"({"id": "a", "name": "A", "image_url": "file://images/p001.png"}
{"id": "b", "name": "B", "image_url": null}
{"id": "c", "name": "C", "image_url": "file://images/p002.png"}
{"id": "d", "name": "D"}
{"id": "e", "name": "E", "image_url": "file://images/p003.png"}
)");
  const auto r = run("ingest --backend stub --format json --manifest " + q(dir / "five.jsonl") + " --store " + q(store));
  ASSERT_EQ(r.code, 0) << r.all;
  const json report = json::parse(r.out);
  EXPECT_EQ(report["ingested"], 3);
  EXPECT_EQ(report["skipped_null_url"], 2);
  EXPECT_EQ(report["store_count"], 3);
  EXPECT_EQ(facematch::vecstore::VectorStore::load(store).size(), 3u);
}

TEST_F(Cli, IngestHumanReportAndReingest) {
  auto r = run("ingest --backend stub --manifest " + q(manifest) + " --store " + q(store) + " --kind hnsw");
  ASSERT_EQ(r.code, 0) << r.all;
  EXPECT_NE(r.out.find("ingested              12"), std::string::npos) << r.out;
  r = run("ingest --backend stub --manifest " + q(manifest) + " --store " + q(store));
  ASSERT_EQ(r.code, 0) << r.all;
  const auto loaded = facematch::vecstore::VectorStore::load(store);
  EXPECT_EQ(loaded.size(), 12u);
  EXPECT_EQ(loaded.config().kind, facematch::vecstore::IndexKind::kHnsw);
}

TEST_F(Cli, UnwritableStoreIsRuntimeError) {
  facematch::testing::write_text(dir / "plain-file", "x");
  const auto r = run("ingest --backend stub --manifest " + q(manifest) + " --store " + q(dir / "plain-file" / "store"));
  EXPECT_EQ(r.code, 1) << r.all;
  EXPECT_NE(r.all.find("IoError"), std::string::npos) << r.all;
}

TEST_F(Cli, MatchPrintsRankedTable) {
  ingest();
  auto r = run("match --backend stub --params " + q(dir / "male.txt") + " --store " + q(store) + " --format json");
  ASSERT_EQ(r.code, 0) << r.all;
  const json resp = json::parse(r.out);
  EXPECT_TRUE(resp["prompt"].get<std::string>().ends_with("pointed chin, and a full beard"));
  ASSERT_EQ(resp["matches"].size(), 5u);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GE(resp["matches"][i - 1]["score"], resp["matches"][i]["score"]);

  r = run("match --backend stub -k 1 --params " + q(dir / "male.txt") + " --store " + q(store) + " --out-image " +
          q(dir / "gen.png"));
  ASSERT_EQ(r.code, 0) << r.all;
  EXPECT_NE(r.out.find("prompt: a face of an adult Male"), std::string::npos);
  std::size_t rows = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) rows += line.starts_with("1 ") || line.starts_with("2 ");
  EXPECT_EQ(rows, 1u) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "gen.png"));
}

TEST_F(Cli, MatchAgainstEmptyStoreFails) {
  facematch::testing::write_text(dir / "nulls.jsonl", "{\"name\": \"A\", \"image_url\": null}\n");
  ASSERT_EQ(run("ingest --backend stub --manifest " + q(dir / "nulls.jsonl") + " --store " + q(store)).code, 0);
  const auto r = run("match --backend stub --params " + q(dir / "male.txt") + " --store " + q(store));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.all.find("EmptyStore"), std::string::npos) << r.all;
}

TEST_F(Cli, InvalidParameterFileIsRuntimeError) {
  std::string text = kMaleParams;
  text.replace(text.find("gender=Male"), 11, "gender=Female");
  facematch::testing::write_text(dir / "bad.txt", text);
  const auto r = run("generate --backend stub --params " + q(dir / "bad.txt") + " --out " + q(dir / "x.png"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.all.find("InconsistentSelection"), std::string::npos) << r.all;
}

TEST_F(Cli, GenerateIsDeterministic) {
  const auto a = run("generate --backend stub --params " + q(dir / "male.txt") + " --out " + q(dir / "a.png"));
  const auto b = run("generate --backend stub --params " + q(dir / "male.txt") + " --out " + q(dir / "b.png"));
  ASSERT_EQ(a.code, 0) << a.all;
  ASSERT_EQ(b.code, 0) << b.all;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(facematch::testing::read_bytes(dir / "a.png"), facematch::testing::read_bytes(dir / "b.png"));
}

TEST_F(Cli, BackendPrecedenceFlagOverEnv) {
  // env selects stub when no flag is given
  EXPECT_EQ(run("generate --params " + q(dir / "male.txt") + " --out " + q(dir / "a.png"), "FACEMATCH_BACKEND=stub").code, 0);
  // the flag wins over env; neural without an endpoint is a config error
  const auto r = run("generate --backend neural --params " + q(dir / "male.txt") + " --out " + q(dir / "a.png"),
                     "FACEMATCH_BACKEND=stub");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.all.find("ConfigError"), std::string::npos) << r.all;
  // the imagegen flag wins over env
  const auto u = run("generate --backend neural --imagegen-url http://127.0.0.1:1/x --params " + q(dir / "male.txt") +
                         " --out " + q(dir / "a.png"),
                     "FACEMATCH_IMAGEGEN_URL=http://127.0.0.1:2/y");
  EXPECT_EQ(u.code, 1);
  EXPECT_NE(u.all.find("127.0.0.1:1/x"), std::string::npos) << u.all;
}

TEST_F(Cli, NeuralIngestWithModelFlags) {
  std::filesystem::copy_file(kFixtures / "astronaut.jpg", dir / "astronaut.jpg");
  facematch::testing::write_text(dir / "one.jsonl", "{\"name\": \"Eileen\", \"image_url\": \"file://astronaut.jpg\"}\n");
  const std::string models = "--detector-model " + q(kFixtures / "models") + " --embedder-model " +
                             q(kFixtures / "models" / "tiny_embedder.onnx");
  const auto r = run("ingest --backend neural " + models + " --format json --manifest " + q(dir / "one.jsonl") +
                     " --store " + q(store));
  ASSERT_EQ(r.code, 0) << r.all;
  EXPECT_EQ(json::parse(r.out)["ingested"], 1);
  EXPECT_EQ(run("ingest --backend neural --manifest " + q(dir / "one.jsonl") + " --store " + q(store)).code, 1);
}

TEST(CliBench, DegenerateAndHnsw) {
  auto r = run("bench --n 1 --kind hnsw --format json");
  ASSERT_EQ(r.code, 0) << r.all;
  EXPECT_EQ(json::parse(r.out)["recall_at_k"], 1.0);
  r = run("bench --n 3000 --kind hnsw --queries 50 --format json");
  ASSERT_EQ(r.code, 0) << r.all;
  const json j = json::parse(r.out);
  EXPECT_GE(j["recall_at_k"].get<double>(), 0.95);
  EXPECT_GT(j["mean_query_ms"].get<double>(), 0.0);
  r = run("bench --n 500 --kind flat");
  ASSERT_EQ(r.code, 0) << r.all;
  EXPECT_NE(r.out.find("mean query"), std::string::npos);
  EXPECT_EQ(r.out.find("recall"), std::string::npos);
}

TEST_F(Cli, ServeAnswersAndStopsOnSigterm) {
  ingest();
  const int port = facematch::testing::free_port();
  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    const std::string addr = "127.0.0.1:" + std::to_string(port);
    ::unsetenv("FACEMATCH_IMAGEGEN_URL");
    execl(kCli.c_str(), kCli.c_str(), "serve", "--backend", "stub", "--store", store.c_str(), "--addr", addr.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }
  httplib::Client client("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 400 && !(res = client.Get("/healthz")); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["profile_count"], 12);
  res = client.Get("/api/v1/vocabulary");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

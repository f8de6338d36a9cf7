// facematch: ingest a corpus, match by parameters, generate images, serve
// the HTTP API and benchmark the index.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "facematch/ingest.hpp"
#include "facematch/service.hpp"

namespace fm = facematch;
using nlohmann::json;

namespace {

enum class Format { kHuman, kJson };

struct Common {
  std::string backend;
  std::string format = "human";
  std::string detector_model;
  std::string embedder_model;
  std::string imagegen_url;
};

void add_common(CLI::App* sub, Common& c, bool needs_generator, bool needs_pipeline) {
  sub->add_option("--backend", c.backend, "neural or stub (default: $FACEMATCH_BACKEND, else neural)")
      ->check(CLI::IsMember({"neural", "stub"}));
  sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"human", "json"}));
  if (needs_pipeline) {
    sub->add_option("--detector-model", c.detector_model,
                    "directory with pnet/rnet/onet.onnx (default: $FACEMATCH_DETECTOR_MODEL)");
    sub->add_option("--embedder-model", c.embedder_model, "embedder .onnx (default: $FACEMATCH_EMBEDDER_MODEL)");
  }
  if (needs_generator) {
    sub->add_option("--imagegen-url", c.imagegen_url,
                    "text-to-image endpoint (default: $FACEMATCH_IMAGEGEN_URL); token from $FACEMATCH_IMAGEGEN_TOKEN");
  }
}

bool stub_backend(const Common& c) {
  if (!c.backend.empty()) return c.backend == "stub";
  const char* env = std::getenv("FACEMATCH_BACKEND");
  if (env == nullptr || *env == '\0') return false;
  const std::string v = env;
  if (v != "stub" && v != "neural") throw fm::Error("ConfigError", "FACEMATCH_BACKEND must be neural or stub");
  return v == "stub";
}

Format format_of(const Common& c) { return c.format == "json" ? Format::kJson : Format::kHuman; }

fm::facepipe::FacePipeline make_pipeline(const Common& c) {
  if (stub_backend(c)) return fm::facepipe::FacePipeline::from_config({});
  auto cfg = fm::facepipe::PipelineConfig::from_env(fm::facepipe::Backend::kNeural);
  if (!c.detector_model.empty()) cfg.detector_model = c.detector_model;
  if (!c.embedder_model.empty()) cfg.embedder_model = c.embedder_model;
  return fm::facepipe::FacePipeline::from_config(cfg);
}

std::shared_ptr<fm::genclient::ImageGenerator> make_generator(const Common& c) {
  if (stub_backend(c)) return std::make_shared<fm::genclient::StubImageGenerator>();
  auto cfg = fm::genclient::GeneratorConfig::from_env();
  if (!c.imagegen_url.empty()) cfg.endpoint_url = c.imagegen_url;
  // The neural backend never falls back to the stub silently.
  cfg.backend = fm::genclient::Backend::kRemote;
  cfg.validate();
  return fm::genclient::make_generator(cfg, [](const std::string& line) { std::cerr << "facematch: " << line << "\n"; });
}

fm::params::FaceParameters read_parameters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fm::Error("IoError", "cannot read parameter file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fm::params::validate_parameters(fm::params::parse_document(ss.str()));
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw fm::Error("IoError", "cannot write " + path);
}

bool store_exists(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "index.meta"); }

// ---- ingest ----

struct IngestArgs {
  Common common;
  std::string manifest;
  std::string store;
  std::string kind = "flat";
  std::size_t parallelism = 4;
};

int run_ingest(const IngestArgs& a) {
  auto records = fm::ingest::parse_manifest_file(a.manifest);
  const auto pipeline = make_pipeline(a.common);

  fm::vecstore::VectorStore store = [&] {
    if (store_exists(a.store)) return fm::vecstore::VectorStore::load(a.store);
    fm::vecstore::IndexConfig cfg;
    cfg.kind = fm::vecstore::parse_index_kind(a.kind);
    return fm::vecstore::VectorStore(cfg);
  }();

  const fm::ingest::DefaultFetcher fetcher(std::filesystem::path(a.manifest).parent_path());
  const auto report = fm::ingest::ingest_all(records, store, pipeline, fetcher, {.parallelism = a.parallelism});
  store.save(a.store);

  if (format_of(a.common) == Format::kJson) {
    json j = json::parse(report.to_json());
    j["store_count"] = store.size();
    j["skipped"] = json::array();
    for (const auto& r : records) {
      if (r.status != fm::ingest::Status::kIngested) {
        j["skipped"].push_back({{"id", r.id}, {"status", fm::ingest::to_string(r.status)}, {"detail", r.detail}});
      }
    }
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& r : records) {
      if (r.status == fm::ingest::Status::kIngested) continue;
      std::cerr << "skipped " << r.id << ": " << fm::ingest::to_string(r.status)
                << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
    }
    std::printf("total                 %zu\n", report.total);
    for (auto s : {fm::ingest::Status::kIngested, fm::ingest::Status::kSkippedNullUrl,
                   fm::ingest::Status::kSkippedFetchFailed, fm::ingest::Status::kSkippedNoFace,
                   fm::ingest::Status::kSkippedDecodeError}) {
      std::printf("%-21s %zu\n", std::string(fm::ingest::to_string(s)).c_str(), report.count(s));
    }
    std::printf("store count           %zu\n", store.size());
  }
  return 0;
}

// ---- match ----

struct MatchArgs {
  Common common;
  std::string params;
  std::string store;
  long long k = static_cast<long long>(fm::service::kDefaultK);
  std::string out_image;
};

int run_match(const MatchArgs& a) {
  const auto parameters = read_parameters(a.params);
  const std::size_t k = fm::service::validate_k(a.k);
  auto store = std::make_shared<fm::vecstore::VectorStore>(fm::vecstore::VectorStore::load(a.store));
  fm::service::MatchService service(store, make_generator(a.common), make_pipeline(a.common));

  const auto resp = service.match({parameters, k, true});
  if (!a.out_image.empty()) write_file(a.out_image, service.image(*resp.generated_image_id)->bytes);

  if (format_of(a.common) == Format::kJson) {
    std::cout << resp.to_json().dump(2) << "\n";
    return 0;
  }
  std::printf("prompt: %s\n\n", resp.prompt->c_str());
  std::printf("%-4s  %-8s  %-24s  %s\n", "rank", "score", "name", "id");
  for (const auto& m : resp.matches) {
    std::printf("%-4d  %-8.4f  %-24s  %s\n", m.rank, static_cast<double>(m.score), m.name.c_str(), m.profile_id.c_str());
  }
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  Common common;
  std::string params;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  const auto prompt = fm::params::build_prompt(read_parameters(a.params));
  const auto image = make_generator(a.common)->generate(prompt);
  write_file(a.out, image.bytes);
  if (format_of(a.common) == Format::kJson) {
    std::cout << json{{"prompt", prompt.text()}, {"out", a.out}, {"backend", image.backend_id},
                      {"format", fm::mime_type(image.format)}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("%s\n", prompt.text().c_str());
  }
  return 0;
}

// ---- serve ----

struct ServeArgs {
  Common common;
  std::string store;
  std::string addr = "127.0.0.1:8080";
  std::string web_root;
};

int run_serve(const ServeArgs& a) {
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--addr", "expected host:port, got " + a.addr);
  const std::string host = a.addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(a.addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw CLI::ValidationError("--addr", "bad port in " + a.addr);
  }

  auto store = std::make_shared<fm::vecstore::VectorStore>(fm::vecstore::VectorStore::load(a.store));
  fm::service::MatchService service(store, make_generator(a.common), make_pipeline(a.common));
  fm::service::HttpOptions options;
  if (!a.web_root.empty()) options.web_root = a.web_root;
  fm::service::HttpServer server(service, options);

  // Block the stop signals here so the watcher thread receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  if (!server.bind(host, port)) throw fm::Error("IoError", "cannot bind " + a.addr);
  std::fprintf(stderr, "facematch: serving %zu profiles on http://%s:%d\n", store->size(), host.c_str(),
               server.port());

  std::atomic<bool> signalled{false};
  std::jthread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    server.stop();
  });
  const bool ok = server.listen();
  // listen() can also return on its own; wake the watcher so it can be joined.
  if (!signalled) pthread_kill(watcher.native_handle(), SIGTERM);
  return ok || signalled ? 0 : 1;
}

// ---- bench ----

struct BenchArgs {
  Common common;
  std::size_t n = 10000;
  std::size_t dim = 512;
  std::string kind = "hnsw";
  std::size_t queries = 100;
  std::size_t k = 5;
  std::size_t ef_search = 0;
  std::uint64_t seed = 1;
};

std::vector<float> unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> normal;
  std::vector<float> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;  // the store normalizes
}

int run_bench(const BenchArgs& a) {
  fm::vecstore::IndexConfig cfg;
  cfg.dimension = a.dim;
  cfg.kind = fm::vecstore::parse_index_kind(a.kind);
  if (a.ef_search > 0) cfg.hnsw_ef_search = a.ef_search;
  cfg.validate();

  std::mt19937_64 rng(a.seed);
  std::vector<std::vector<float>> rows(a.n);
  for (auto& r : rows) r = unit_vector(rng, a.dim);
  std::vector<std::vector<float>> qs(a.queries);
  for (auto& q : qs) q = unit_vector(rng, a.dim);

  using clock = std::chrono::steady_clock;
  fm::vecstore::VectorStore store(cfg);
  const auto t0 = clock::now();
  for (std::size_t i = 0; i < a.n; ++i) store.upsert(std::to_string(i), rows[i]);
  const double build_s = std::chrono::duration<double>(clock::now() - t0).count();

  std::vector<std::vector<fm::vecstore::MatchResult>> got(qs.size());
  const auto t1 = clock::now();
  for (std::size_t i = 0; i < qs.size(); ++i) got[i] = store.search(qs[i], a.k);
  const double query_ms =
      qs.empty() ? 0.0 : std::chrono::duration<double, std::milli>(clock::now() - t1).count() / qs.size();

  // Flat search over the same rows is the oracle.
  std::optional<double> recall;
  if (cfg.kind == fm::vecstore::IndexKind::kHnsw) {
    fm::vecstore::IndexConfig flat_cfg = cfg;
    flat_cfg.kind = fm::vecstore::IndexKind::kFlat;
    fm::vecstore::VectorStore flat(flat_cfg);
    for (std::size_t i = 0; i < a.n; ++i) flat.upsert(std::to_string(i), rows[i]);
    std::size_t hit = 0;
    std::size_t want = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      std::set<std::string> truth;
      for (const auto& m : flat.search(qs[i], a.k)) truth.insert(m.id);
      want += truth.size();
      for (const auto& m : got[i]) hit += truth.count(m.id);
    }
    recall = want == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(want);
  }

  if (format_of(a.common) == Format::kJson) {
    json j = {{"kind", a.kind},         {"n", a.n},         {"dim", a.dim},
              {"queries", a.queries},   {"k", a.k},         {"build_seconds", build_s},
              {"mean_query_ms", query_ms}};
    if (cfg.kind == fm::vecstore::IndexKind::kHnsw) {
      j["ef_search"] = cfg.hnsw_ef_search;
      j["recall_at_k"] = *recall;
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("kind            %s\n", a.kind.c_str());
    std::printf("vectors         %zu x %zu\n", a.n, a.dim);
    std::printf("build time      %.3f s\n", build_s);
    std::printf("mean query      %.3f ms over %zu queries\n", query_ms, a.queries);
    if (recall) std::printf("recall@%zu        %.4f (ef_search %zu)\n", a.k, *recall, cfg.hnsw_ef_search);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face matching from descriptive parameters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "facematch 0.1.0");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "ingest a JSON Lines manifest into a store");
  ingest_cmd->add_option("--manifest", ingest.manifest, "manifest file")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--store", ingest.store, "store directory (created if absent)")->required();
  ingest_cmd->add_option("--kind", ingest.kind, "index kind for a new store")->check(CLI::IsMember({"flat", "hnsw"}));
  ingest_cmd->add_option("--parallelism", ingest.parallelism, "concurrent fetch/embed workers")
      ->check(CLI::Range(1, 64));
  add_common(ingest_cmd, ingest.common, false, true);

  MatchArgs match;
  auto* match_cmd = app.add_subcommand("match", "generate a face for a parameter file and rank the store");
  match_cmd->add_option("--params", match.params, "key=value parameter file")->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--store", match.store, "store directory")->required();
  match_cmd->add_option("-k", match.k, "number of matches")->check(CLI::Range(1LL, static_cast<long long>(fm::service::kMaxK)));
  match_cmd->add_option("--out-image", match.out_image, "write the generated image here");
  add_common(match_cmd, match.common, true, true);

  GenerateArgs generate;
  auto* gen_cmd = app.add_subcommand("generate", "render the image for a parameter file");
  gen_cmd->add_option("--params", generate.params, "key=value parameter file")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", generate.out, "output image path")->required();
  add_common(gen_cmd, generate.common, true, false);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP API over a store snapshot");
  serve_cmd->add_option("--store", serve.store, "store directory")->required();
  serve_cmd->add_option("--addr", serve.addr, "host:port to bind");
  serve_cmd->add_option("--web-root", serve.web_root, "static files mounted at /")->check(CLI::ExistingDirectory);
  add_common(serve_cmd, serve.common, true, true);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "benchmark the index on random unit vectors");
  bench_cmd->add_option("--n", bench.n, "vectors")->check(CLI::Range(1, 10'000'000));
  bench_cmd->add_option("--dim", bench.dim, "dimension")->check(CLI::Range(1, 65536));
  bench_cmd->add_option("--kind", bench.kind, "index kind")->check(CLI::IsMember({"flat", "hnsw"}));
  bench_cmd->add_option("--queries", bench.queries, "queries");
  bench_cmd->add_option("-k", bench.k, "neighbours per query")->check(CLI::Range(1, 1000));
  bench_cmd->add_option("--ef-search", bench.ef_search, "override the HNSW ef_search default");
  bench_cmd->add_option("--seed", bench.seed, "RNG seed");
  bench_cmd->add_option("--format", bench.common.format, "output format")->check(CLI::IsMember({"human", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest);
    if (*match_cmd) return run_match(match);
    if (*gen_cmd) return run_generate(generate);
    if (*serve_cmd) return run_serve(serve);
    if (*bench_cmd) return run_bench(bench);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fm::params::ParameterError& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue.describe() << "\n";
    return 1;
  } catch (const fm::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

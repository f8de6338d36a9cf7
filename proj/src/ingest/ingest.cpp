#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include "facematch/ingest.hpp"

namespace facematch::ingest {

namespace {

struct Outcome {
  Status status = Status::kPending;
  std::string detail;
  std::optional<facepipe::FaceEmbedding> embedding;
};

Outcome process(const ProfileRecord& rec, const facepipe::FacePipeline& pipeline,
                const Fetcher& fetcher) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = fetcher.fetch(rec.image_url);
  } catch (const Error& e) {
    return {Status::kSkippedFetchFailed, e.what(), std::nullopt};
  }
  if (bytes.size() > kMaxImageBytes) {
    return {Status::kSkippedDecodeError, "image larger than 20 MB", std::nullopt};
  }
  try {
    auto result = pipeline.process(bytes);
    return {Status::kIngested, {}, std::move(result.embedding)};
  } catch (const facepipe::NoFaceDetected& e) {
    return {Status::kSkippedNoFace, e.what(), std::nullopt};
  } catch (const facepipe::ImageDecodeError& e) {
    return {Status::kSkippedDecodeError, e.what(), std::nullopt};
  } catch (const Error& e) {
    // Model inference failures on one image do not stop the corpus.
    return {Status::kSkippedDecodeError, e.what(), std::nullopt};
  }
}

}  // namespace

IngestReport ingest_all(std::vector<ProfileRecord>& records, vecstore::VectorStore& store,
                        const facepipe::FacePipeline& pipeline, const Fetcher& fetcher,
                        const IngestOptions& options) {
  if (store.config().dimension != pipeline.embedding_dimension()) {
    throw StoreUnavailable("store dimension " + std::to_string(store.config().dimension) +
                           " does not match embedding dimension " +
                           std::to_string(pipeline.embedding_dimension()));
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].status == Status::kPending) pending.push_back(i);
  }

  std::vector<Outcome> outcomes(pending.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < pending.size();) {
      outcomes[j] = process(records[pending[j]], pipeline, fetcher);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(pending.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  // Upserts run on this thread in record order so the resulting index does
  // not depend on completion order.
  for (std::size_t j = 0; j < pending.size(); ++j) {
    ProfileRecord& rec = records[pending[j]];
    Outcome& out = outcomes[j];
    if (out.status == Status::kIngested) {
      try {
        store.upsert(rec.id, out.embedding->values(),
                     {{"name", rec.name}, {"image_url", rec.image_url}});
      } catch (const Error& e) {
        throw StoreUnavailable(std::string("store rejected an upsert: ") + e.what());
      }
    }
    rec.status = out.status;
    rec.detail = std::move(out.detail);
  }

  IngestReport report;
  report.total = records.size();
  for (const auto& rec : records) ++report.counts[rec.status];
  return report;
}

}  // namespace facematch::ingest

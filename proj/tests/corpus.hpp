#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "facematch/genclient.hpp"
#include "facematch/params.hpp"
#include "test_support.hpp"

namespace facematch::testing {

// A deterministic, valid parameter set for the i-th synthetic profile.
inline params::FaceParameters sample_parameters(std::size_t i) {
  std::mt19937 rng(static_cast<unsigned>(1000 + i));
  const bool male = i % 2 == 0;
  std::map<std::string, std::string> raw;
  for (const auto& spec : params::schema()) {
    if (spec.field == params::Field::kGender) {
      raw["gender"] = male ? "Male" : "Female";
    } else if (spec.required || (male && rng() % 2 == 0)) {
      raw[std::string(spec.key)] = std::string(spec.allowed[rng() % spec.allowed.size()]);
    }
  }
  return params::validate_parameters(raw);
}

struct CorpusEntry {
  std::string id;
  std::string name;
  std::filesystem::path image;
};

// Renders n stub images into dir/images and writes dir/manifest.jsonl with
// relative file:// urls. Returns entries in manifest order.
inline std::vector<CorpusEntry> write_stub_corpus(const std::filesystem::path& dir, std::size_t n) {
  std::filesystem::create_directories(dir / "images");
  const genclient::StubImageGenerator gen;
  std::vector<CorpusEntry> out;
  std::string manifest;
  for (std::size_t i = 1; i <= n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03zu", i);
    const auto image = gen.generate(params::build_prompt(sample_parameters(i)));
    const std::string rel = std::string("images/") + id + ".png";
    write_bytes(dir / rel, image.bytes);
    CorpusEntry e{id, "Person " + std::to_string(i), dir / rel};
    manifest += nlohmann::json{{"id", e.id}, {"name", e.name}, {"image_url", "file://" + rel}}.dump() + "\n";
    out.push_back(std::move(e));
  }
  write_text(dir / "manifest.jsonl", manifest);
  return out;
}

}  // namespace facematch::testing

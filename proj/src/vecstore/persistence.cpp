#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "facematch/sha256.hpp"
#include "facematch/vecstore.hpp"

namespace facematch::vecstore {

namespace {

constexpr std::string_view kFormat = "FMVS1";
constexpr const char* kMetaFile = "index.meta";
constexpr const char* kVectorsFile = "vectors.f32";
constexpr const char* kProfilesFile = "profiles.tsv";
constexpr const char* kGraphFile = "graph.bin";

namespace fs = std::filesystem;

void append_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_le32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

std::string hex_digest(std::string_view bytes) { return to_hex(sha256(bytes)); }

// Tabs, newlines and backslashes inside a field are escaped so every row
// stays one line with exactly three columns.
std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case 't':
        out.push_back('\t');
        break;
      case 'n':
        out.push_back('\n');
        break;
      case 'r':
        out.push_back('\r');
        break;
      default:
        out.push_back(s[i]);
    }
  }
  return out;
}

void write_file(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing or unreadable file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_vectors(const std::vector<float>& rows) {
  std::string out;
  out.reserve(rows.size() * 4);
  for (float v : rows) append_le32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::string encode_graph(const HnswGraph& g) {
  // node_count, entry_point, then per node: level, and for each level
  // 0..level a degree followed by that many neighbour ids.
  std::string out;
  append_le32(out, static_cast<std::uint32_t>(g.size()));
  append_le32(out, g.entry_point());
  for (std::uint32_t node = 0; node < g.size(); ++node) {
    const int level = g.level(node);
    append_le32(out, static_cast<std::uint32_t>(level));
    for (int l = 0; l <= level; ++l) {
      const auto& nbrs = g.neighbors(node, l);
      append_le32(out, static_cast<std::uint32_t>(nbrs.size()));
      for (auto n : nbrs) append_le32(out, n);
    }
  }
  return out;
}

std::vector<HnswGraph::Links> decode_graph(std::string_view bytes, std::size_t expected_nodes,
                                           std::uint32_t& entry_point) {
  std::size_t pos = 0;
  auto next = [&]() {
    if (pos + 4 > bytes.size()) throw ChecksumMismatch("graph.bin is truncated");
    auto v = read_le32(bytes, pos);
    pos += 4;
    return v;
  };
  const std::uint32_t count = next();
  if (count != expected_nodes) throw ChecksumMismatch("graph.bin node count does not match index.meta");
  entry_point = next();
  std::vector<HnswGraph::Links> links(count);
  for (auto& node : links) {
    const std::uint32_t level = next();
    if (level > 64) throw ChecksumMismatch("graph.bin has an implausible node level");
    node.resize(level + 1);
    for (auto& lst : node) {
      const std::uint32_t degree = next();
      if (degree > count) throw ChecksumMismatch("graph.bin has an implausible degree");
      lst.resize(degree);
      for (auto& n : lst) n = next();
    }
  }
  if (pos != bytes.size()) throw ChecksumMismatch("graph.bin has trailing bytes");
  return links;
}

}  // namespace

void VectorStore::save(const fs::path& dir) const {
  std::shared_lock lock(*mutex_);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create store directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }

  const std::string vectors = encode_vectors(rows_);
  std::string profiles;
  for (std::size_t row = 0; row < ids_.size(); ++row) {
    const auto& md = metadata_[row];
    auto field = [&](const char* key) {
      auto it = md.find(key);
      return it == md.end() ? std::string() : escape_field(it->second);
    };
    profiles += escape_field(ids_[row]) + '\t' + field("name") + '\t' + field("image_url") + '\n';
  }

  nlohmann::json meta = {
      {"format", kFormat},
      {"kind", to_string(config_.kind)},
      {"dimension", config_.dimension},
      {"count", ids_.size()},
      {"hnsw",
       {{"m", config_.hnsw_m},
        {"ef_construction", config_.hnsw_ef_construction},
        {"ef_search", config_.hnsw_ef_search},
        {"seed", config_.hnsw_seed}}},
      {"vectors_sha256", hex_digest(vectors)},
      {"profiles_sha256", hex_digest(profiles)},
  };

  write_file(dir / kVectorsFile, vectors);
  write_file(dir / kProfilesFile, profiles);
  if (graph_) {
    const std::string graph = encode_graph(*graph_);
    meta["graph_sha256"] = hex_digest(graph);
    write_file(dir / kGraphFile, graph);
  }
  // Written last: a store directory is only loadable once the meta file that
  // vouches for the other files is in place.
  write_file(dir / kMetaFile, meta.dump(2) + "\n");
}

VectorStore VectorStore::load(const fs::path& dir) {
  const std::string meta_text = read_file(dir / kMetaFile);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatVersionMismatch("index.meta is not valid: " + std::string(e.what()));
  }
  if (!meta.is_object() || meta.value("format", "") != kFormat) {
    throw FormatVersionMismatch("unsupported store format '" +
                                (meta.is_object() ? meta.value("format", "") : std::string()) +
                                "' (expected " + std::string(kFormat) + ")");
  }

  IndexConfig cfg;
  std::size_t count = 0;
  std::string vectors_sha, profiles_sha, graph_sha;
  try {
    cfg.kind = parse_index_kind(meta.at("kind").get<std::string>());
    cfg.dimension = meta.at("dimension").get<std::size_t>();
    const auto& h = meta.at("hnsw");
    cfg.hnsw_m = h.at("m").get<std::size_t>();
    cfg.hnsw_ef_construction = h.at("ef_construction").get<std::size_t>();
    cfg.hnsw_ef_search = h.at("ef_search").get<std::size_t>();
    cfg.hnsw_seed = h.at("seed").get<std::uint64_t>();
    count = meta.at("count").get<std::size_t>();
    vectors_sha = meta.at("vectors_sha256").get<std::string>();
    profiles_sha = meta.at("profiles_sha256").get<std::string>();
    if (cfg.kind == IndexKind::kHnsw) graph_sha = meta.at("graph_sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatVersionMismatch("index.meta is missing fields: " + std::string(e.what()));
  } catch (const InvalidArgument& e) {
    throw FormatVersionMismatch(std::string("index.meta: ") + e.what());
  }

  const std::string vectors = read_file(dir / kVectorsFile);
  if (hex_digest(vectors) != vectors_sha) throw ChecksumMismatch("vectors.f32 checksum mismatch");
  if (vectors.size() != count * cfg.dimension * 4) {
    throw ChecksumMismatch("vectors.f32 size does not match count and dimension in index.meta");
  }
  const std::string profiles = read_file(dir / kProfilesFile);
  if (hex_digest(profiles) != profiles_sha) throw ChecksumMismatch("profiles.tsv checksum mismatch");

  VectorStore store(cfg);
  store.rows_.resize(count * cfg.dimension);
  for (std::size_t i = 0; i < store.rows_.size(); ++i) {
    store.rows_[i] = std::bit_cast<float>(read_le32(vectors, i * 4));
  }

  std::istringstream lines(profiles);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cols.push_back(unescape_field(std::string_view(line).substr(start, tab - start)));
    }
    cols.push_back(unescape_field(std::string_view(line).substr(start)));
    if (cols.size() != 3) throw ChecksumMismatch("profiles.tsv row does not have three columns");
    const auto row = static_cast<std::uint32_t>(store.ids_.size());
    if (!store.row_of_.emplace(cols[0], row).second) {
      throw ChecksumMismatch("profiles.tsv repeats id '" + cols[0] + "'");
    }
    store.ids_.push_back(cols[0]);
    Metadata md;
    if (!cols[1].empty()) md["name"] = cols[1];
    if (!cols[2].empty()) md["image_url"] = cols[2];
    store.metadata_.push_back(std::move(md));
  }
  if (store.ids_.size() != count) {
    throw ChecksumMismatch("profiles.tsv row count does not match index.meta");
  }

  if (cfg.kind == IndexKind::kHnsw) {
    const std::string graph = read_file(dir / kGraphFile);
    if (hex_digest(graph) != graph_sha) throw ChecksumMismatch("graph.bin checksum mismatch");
    std::uint32_t entry = HnswGraph::kNoNode;
    auto links = decode_graph(graph, count, entry);
    try {
      store.graph_ = HnswGraph::from_links(cfg.hnsw_m, cfg.hnsw_ef_construction, cfg.hnsw_seed,
                                           std::move(links), entry);
    } catch (const std::invalid_argument& e) {
      throw ChecksumMismatch(std::string("graph.bin is inconsistent: ") + e.what());
    }
  }
  return store;
}

}  // namespace facematch::vecstore

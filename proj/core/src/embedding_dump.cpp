#include "fewshot/embedding_dump.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::vector<unsigned char>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  Reader(std::span<const unsigned char> bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw DataError("embedding dump: record runs past end of vectors.bin");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() {
    float f = std::bit_cast<float>(u32());
    if (!std::isfinite(f)) throw DataError("embedding dump: non-finite vector value");
    return f;
  }
  void matrix(Matrix& m) {
    for (auto& x : m.values()) x = f32();
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_;
};

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string key_text(std::string_view support_id, std::size_t query_id) {
  return std::string(support_id) + "/" + std::to_string(query_id);
}

}  // namespace

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string format_checksum(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return std::string("crc32:") + buf;
}

EmbeddingDump EmbeddingDump::load(const std::filesystem::path& dir) {
  EmbeddingDump dump;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("embedding dump has no manifest.json: " + dir.string());
    try {
      auto j = nlohmann::json::parse(in);
      dump.manifest_.encoder = j.value("encoder", std::string());
      dump.manifest_.revision = j.value("revision", std::string());
      dump.manifest_.dim = j.at("dim").get<std::size_t>();
      dump.manifest_.episode_count = j.at("episode_count").get<std::size_t>();
      dump.manifest_.checksum = j.at("checksum").get<std::string>();
      dump.manifest_.pair_convention = j.value("pair_convention", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("embedding dump manifest: " + std::string(e.what()));
    }
  }

  dump.bytes_ = read_all(dir / "vectors.bin");
  const std::string actual = format_checksum(crc32_of(dump.bytes_));
  if (actual != dump.manifest_.checksum) {
    throw DataError("embedding dump checksum mismatch: manifest says " + dump.manifest_.checksum +
                    ", vectors.bin is " + actual);
  }

  std::ifstream index(dir / "index.jsonl");
  if (!index) throw ConfigError("embedding dump has no index.jsonl: " + dir.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto support_id = j.at("support_id").get<std::string>();
      const auto query_id = j.at("query_id").get<std::size_t>();
      const auto offset = j.at("offset").get<std::size_t>();
      const auto lens = j.at("support_lens").get<std::vector<std::size_t>>();
      Reader r(dump.bytes_, offset);
      const std::size_t n_support = r.u32();
      const std::size_t query_len = r.u32();
      const std::size_t dim = r.u32();
      bool consistent = n_support == j.at("n_support").get<std::size_t>() &&
                        query_len == j.at("query_len").get<std::size_t>() &&
                        dim == j.at("dim").get<std::size_t>() && dim == dump.manifest_.dim &&
                        lens.size() == n_support;
      for (std::size_t i = 0; consistent && i < n_support; ++i) consistent = r.u32() == lens[i];
      if (!consistent) {
        throw DataError("shape header disagrees with index/manifest for " +
                        key_text(support_id, query_id));
      }
      if (!dump.offsets_.emplace(std::make_pair(support_id, query_id), offset).second) {
        throw DataError("duplicate record " + key_text(support_id, query_id));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("index.jsonl:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (dump.offsets_.size() != dump.manifest_.episode_count) {
    throw DataError("embedding dump index has " + std::to_string(dump.offsets_.size()) +
                    " records, manifest says " + std::to_string(dump.manifest_.episode_count));
  }
  return dump;
}

bool EmbeddingDump::contains(std::string_view support_id, std::size_t query_id) const {
  return offsets_.count({std::string(support_id), query_id}) > 0;
}

PairEmbedding EmbeddingDump::record(std::string_view support_id, std::size_t query_id) const {
  auto it = offsets_.find({std::string(support_id), query_id});
  if (it == offsets_.end()) {
    throw DataError("episode " + key_text(support_id, query_id) + " is missing from the embedding dump");
  }
  Reader r(bytes_, it->second);
  const std::size_t n_support = r.u32();
  const std::size_t query_len = r.u32();
  const std::size_t dim = r.u32();
  std::vector<std::size_t> lens(n_support);
  for (auto& len : lens) len = r.u32();

  PairEmbedding out;
  for (std::size_t i = 0; i < n_support; ++i) {
    Matrix q(query_len, dim);
    r.matrix(q);
    out.query_vectors.push_back(std::move(q));
  }
  for (std::size_t i = 0; i < n_support; ++i) {
    Matrix s(lens[i], dim);
    r.matrix(s);
    out.support_vectors.push_back(std::move(s));
  }
  return out;
}

void write_embedding_dump(const std::filesystem::path& dir, std::span<const Episode> episodes,
                          std::span<const PairEmbedding> embeddings, std::string_view encoder,
                          std::string_view revision) {
  if (episodes.size() != embeddings.size()) {
    throw ConfigError("write_embedding_dump: episode and embedding counts differ");
  }
  std::filesystem::create_directories(dir);
  std::vector<unsigned char> bytes;
  std::ofstream index(dir / "index.jsonl", std::ios::binary | std::ios::trunc);
  std::size_t dim = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& emb = embeddings[e];
    const std::size_t n_support = emb.query_vectors.size();
    const std::size_t query_len = n_support ? emb.query_vectors[0].rows() : 0;
    dim = emb.dim();
    std::vector<std::size_t> lens;
    for (const auto& s : emb.support_vectors) lens.push_back(s.rows());

    nlohmann::ordered_json j;
    j["support_id"] = episodes[e].support_id;
    j["query_id"] = episodes[e].query_id;
    j["offset"] = bytes.size();
    j["n_support"] = n_support;
    j["query_len"] = query_len;
    j["dim"] = dim;
    j["support_lens"] = lens;
    index << j.dump() << '\n';

    put_u32(bytes, static_cast<std::uint32_t>(n_support));
    put_u32(bytes, static_cast<std::uint32_t>(query_len));
    put_u32(bytes, static_cast<std::uint32_t>(dim));
    for (auto len : lens) put_u32(bytes, static_cast<std::uint32_t>(len));
    for (const auto& q : emb.query_vectors) {
      for (double x : q.values()) put_f32(bytes, x);
    }
    for (const auto& s : emb.support_vectors) {
      for (double x : s.values()) put_f32(bytes, x);
    }
  }
  {
    std::ofstream out(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::ordered_json manifest;
  manifest["encoder"] = encoder;
  manifest["revision"] = revision;
  manifest["dim"] = dim;
  manifest["episode_count"] = episodes.size();
  manifest["checksum"] = format_checksum(crc32_of(bytes));
  manifest["pair_convention"] = "query [SEP] support";
  std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';
}

}  // namespace fewshot

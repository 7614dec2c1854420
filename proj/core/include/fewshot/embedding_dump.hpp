#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fewshot/embedding.hpp"

namespace fewshot {

// On-disk layout of a pair-wise embedding dump directory:
//
//   manifest.json  {"encoder", "revision", "dim", "episode_count",
//                   "checksum": "crc32:<8 hex digits of vectors.bin>", "pair_convention"}
//   index.jsonl    one line per episode: {"support_id", "query_id", "offset",
//                   "n_support", "query_len", "dim", "support_lens"}
//   vectors.bin    records at the indexed byte offsets, little-endian:
//                   u32 n_support, u32 query_len, u32 dim, u32 support_len[n_support],
//                   f32 query[n_support][query_len][dim],
//                   f32 support_i[support_len[i]][dim] for each i
struct DumpManifest {
  std::string encoder;
  std::string revision;
  std::size_t dim = 0;
  std::size_t episode_count = 0;
  std::string checksum;
  std::string pair_convention;
};

class EmbeddingDump {
 public:
  // Verifies the checksum, manifest dim, and every record header against the index.
  static EmbeddingDump load(const std::filesystem::path& dir);

  const DumpManifest& manifest() const { return manifest_; }
  std::size_t size() const { return offsets_.size(); }
  bool contains(std::string_view support_id, std::size_t query_id) const;

  // Throws DataError naming the key when the episode is not in the dump.
  PairEmbedding record(std::string_view support_id, std::size_t query_id) const;

 private:
  DumpManifest manifest_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> offsets_;
  std::vector<unsigned char> bytes_;
};

// Writes a dump for `episodes` with the matching `embeddings` (same order).
void write_embedding_dump(const std::filesystem::path& dir, std::span<const Episode> episodes,
                          std::span<const PairEmbedding> embeddings, std::string_view encoder,
                          std::string_view revision = "");

std::uint32_t crc32_of(std::span<const unsigned char> bytes);
std::string format_checksum(std::uint32_t crc);

}  // namespace fewshot

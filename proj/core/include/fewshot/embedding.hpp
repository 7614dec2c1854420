#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fewshot/matrix.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

class EmbeddingDump;

enum class EmbeddingMode { Pairwise, Independent };
enum class EmbeddingSource { StaticLookup, ToyAttention, ExternalDump };

struct EmbeddingConfig {
  std::size_t dim = 32;
  EmbeddingMode mode = EmbeddingMode::Pairwise;
  EmbeddingSource source = EmbeddingSource::ToyAttention;
  // Trainable h x h linear map applied after the encoder.
  bool projection = false;
};

// Token vectors for one episode. query_vectors holds one n x h matrix per
// support sentence (the query as contextualized by that pairing);
// support_vectors holds one |s| x h matrix per support sentence,
// contextualized by the query in pairwise mode.
struct PairEmbedding {
  std::vector<Matrix> query_vectors;
  std::vector<Matrix> support_vectors;

  std::size_t dim() const { return query_vectors.empty() ? 0 : query_vectors.front().cols(); }
};

// Deterministic pseudo-random unit vector seeded by the lowercased token bytes.
std::vector<double> hash_embedding(std::string_view token, std::size_t dim);

// Token -> vector table with hash fallback for unknown tokens.
class StaticLookup {
 public:
  explicit StaticLookup(std::size_t dim = 0) : dim_(dim) {}

  // Whitespace-separated text: `token v1 ... vh` per line. dim is taken from
  // the first line and enforced on the rest.
  static StaticLookup load(const std::filesystem::path& path);

  void insert(std::string token, std::vector<double> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(std::string_view token) const;

  // Exact match, then lowercase match, then hash_embedding.
  std::vector<double> lookup(std::string_view token) const;
  Matrix embed(std::span<const std::string> tokens) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// One single-head scaled dot-product self-attention layer with a residual
// connection. Sinusoidal positions (restarting at 0 in each segment) are added
// to the attention queries and keys only, scaled by position_scale.
struct AttentionParams {
  Matrix query;
  Matrix key;
  Matrix value;
  std::vector<double> separator;
  double position_scale = 0.0;

  std::size_t dim() const { return separator.size(); }

  static AttentionParams zeros(std::size_t dim);
  // Wq = Wk = key_scale * I, Wv = value_scale * I.
  static AttentionParams identity(std::size_t dim, double key_scale = 1.0, double value_scale = 1.0,
                                  double position_scale = 0.0);
  // Gaussian-free random init: entries uniform in [-scale, scale] / sqrt(dim).
  static AttentionParams random(std::size_t dim, std::uint64_t seed, double scale = 1.0,
                                double position_scale = 0.0);
};

Matrix sinusoidal_positions(std::size_t length, std::size_t dim);

struct PairEncoding {
  Matrix query;
  Matrix support;
};

// Encodes [query ; separator ; support] jointly and splits the result back.
// If `weights` is non-null it receives the (n+1+m) x (n+1+m) attention matrix.
PairEncoding toy_pair_encode(const Matrix& query_base, const Matrix& support_base,
                             const AttentionParams& params, Matrix* weights = nullptr);
// Encodes one sentence on its own.
Matrix toy_self_encode(const Matrix& base, const AttentionParams& params, Matrix* weights = nullptr);

struct AttentionSpec {
  enum class Init { Identity, Random };
  Init init = Init::Identity;
  double key_scale = 1.0;
  double value_scale = 0.5;
  double position_scale = 0.0;
  std::uint64_t seed = 0;
};

AttentionParams make_attention(const AttentionSpec& spec, std::size_t dim);

// Frozen encoder state plus the optional trainable projection.
struct EncoderParams {
  StaticLookup lookup;
  AttentionParams attention;
  std::shared_ptr<const EmbeddingDump> dump;
  std::optional<Matrix> projection;
};

// Encoder output before the projection.
PairEmbedding encode_pairs(const Episode& episode, const EmbeddingConfig& config,
                           const EncoderParams& params);
// Applies v -> P v to every vector.
PairEmbedding project(const PairEmbedding& embedding, const Matrix& projection);
// encode_pairs followed by the projection when one is configured.
PairEmbedding embed_episode(const Episode& episode, const EmbeddingConfig& config,
                            const EncoderParams& params);

}  // namespace fewshot

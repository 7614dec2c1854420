#include "fewshot/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fewshot/embedding_dump.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/random.hpp"

namespace fewshot {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Self-attention over `tokens` with positional terms `positions` added to the
// query/key inputs. Returns tokens + softmax(QK^T / sqrt(h)) V.
Matrix attend(const Matrix& tokens, const Matrix& positions, const AttentionParams& params,
              Matrix* weights_out) {
  const std::size_t len = tokens.rows();
  const std::size_t h = tokens.cols();
  if (params.dim() != h) {
    throw ConfigError("attention dim " + std::to_string(params.dim()) +
                      " does not match embedding dim " + std::to_string(h));
  }
  Matrix q(len, h), k(len, h), v(len, h);
  std::vector<double> shifted(h);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t d = 0; d < h; ++d) shifted[d] = tokens(i, d) + positions(i, d);
    apply_linear(params.query, shifted, q.row(i));
    apply_linear(params.key, shifted, k.row(i));
    apply_linear(params.value, tokens.row(i), v.row(i));
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  Matrix weights(len, len);
  Matrix out = tokens;
  for (std::size_t i = 0; i < len; ++i) {
    double peak = -INFINITY;
    for (std::size_t l = 0; l < len; ++l) {
      weights(i, l) = dot(q.row(i), k.row(l)) * scale;
      peak = std::max(peak, weights(i, l));
    }
    double total = 0.0;
    for (std::size_t l = 0; l < len; ++l) {
      weights(i, l) = std::exp(weights(i, l) - peak);
      total += weights(i, l);
    }
    for (std::size_t l = 0; l < len; ++l) {
      weights(i, l) /= total;
      for (std::size_t d = 0; d < h; ++d) out(i, d) += weights(i, l) * v(l, d);
    }
  }
  if (weights_out) *weights_out = std::move(weights);
  return out;
}

Matrix copy_rows(const Matrix& src, std::size_t first, std::size_t count) {
  Matrix out(count, src.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(src.row(first + i).begin(), src.row(first + i).end(), out.row(i).begin());
  }
  return out;
}

Matrix project_rows(const Matrix& m, const Matrix& projection) {
  Matrix out(m.rows(), projection.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) apply_linear(projection, m.row(i), out.row(i));
  return out;
}

}  // namespace

std::vector<double> hash_embedding(std::string_view token, std::size_t dim) {
  const std::uint64_t seed = fnv1a64(lowercase(token));
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const std::uint64_t bits = splitmix64(seed + 0x9e3779b97f4a7c15ULL * (i + 1));
    v[i] = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    norm2 += v[i] * v[i];
  }
  if (norm2 == 0.0) {
    if (dim > 0) v[0] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

StaticLookup StaticLookup::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vector file " + path.string());
  StaticLookup lookup(0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double x;
    while (fields >> x) values.push_back(x);
    if (values.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": no vector values");
    }
    if (lookup.dim_ == 0) lookup.dim_ = values.size();
    if (values.size() != lookup.dim_) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(lookup.dim_) + " values, got " + std::to_string(values.size()));
    }
    lookup.table_[token] = std::move(values);
  }
  return lookup;
}

void StaticLookup::insert(std::string token, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw ConfigError("vector for '" + token + "' has dim " + std::to_string(vector.size()) +
                      ", lookup dim is " + std::to_string(dim_));
  }
  table_[std::move(token)] = std::move(vector);
}

bool StaticLookup::contains(std::string_view token) const {
  return table_.count(std::string(token)) > 0 || table_.count(lowercase(token)) > 0;
}

std::vector<double> StaticLookup::lookup(std::string_view token) const {
  if (auto it = table_.find(std::string(token)); it != table_.end()) return it->second;
  if (auto it = table_.find(lowercase(token)); it != table_.end()) return it->second;
  return hash_embedding(token, dim_);
}

Matrix StaticLookup::embed(std::span<const std::string> tokens) const {
  Matrix out(tokens.size(), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto v = lookup(tokens[i]);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

AttentionParams AttentionParams::zeros(std::size_t dim) {
  return AttentionParams{Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim),
                         hash_embedding("[SEP]", dim), 0.0};
}

AttentionParams AttentionParams::identity(std::size_t dim, double key_scale, double value_scale,
                                          double position_scale) {
  AttentionParams p = zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    p.query(i, i) = key_scale;
    p.key(i, i) = key_scale;
    p.value(i, i) = value_scale;
  }
  p.position_scale = position_scale;
  return p;
}

AttentionParams AttentionParams::random(std::size_t dim, std::uint64_t seed, double scale,
                                        double position_scale) {
  AttentionParams p = zeros(dim);
  Rng rng(seed);
  const double bound = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(dim, 1)));
  for (Matrix* m : {&p.query, &p.key, &p.value}) {
    for (auto& x : m->values()) x = bound * (2.0 * uniform_unit(rng) - 1.0);
  }
  p.position_scale = position_scale;
  return p;
}

AttentionParams make_attention(const AttentionSpec& spec, std::size_t dim) {
  switch (spec.init) {
    case AttentionSpec::Init::Identity:
      return AttentionParams::identity(dim, spec.key_scale, spec.value_scale, spec.position_scale);
    case AttentionSpec::Init::Random:
      return AttentionParams::random(dim, spec.seed, spec.key_scale, spec.position_scale);
  }
  return AttentionParams::zeros(dim);
}

Matrix sinusoidal_positions(std::size_t length, std::size_t dim) {
  Matrix pe(length, dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) / rate;
      pe(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

PairEncoding toy_pair_encode(const Matrix& query_base, const Matrix& support_base,
                             const AttentionParams& params, Matrix* weights) {
  const std::size_t n = query_base.rows();
  const std::size_t m = support_base.rows();
  const std::size_t h = params.dim();
  if (query_base.cols() != h || support_base.cols() != h) {
    throw ConfigError("toy_pair_encode: base vectors do not match attention dim");
  }
  Matrix tokens(n + 1 + m, h);
  Matrix positions(n + 1 + m, h);
  const Matrix qpos = sinusoidal_positions(n, h);
  const Matrix spos = sinusoidal_positions(m, h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < h; ++d) {
      tokens(i, d) = query_base(i, d);
      positions(i, d) = params.position_scale * qpos(i, d);
    }
  }
  for (std::size_t d = 0; d < h; ++d) tokens(n, d) = params.separator[d];
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t d = 0; d < h; ++d) {
      tokens(n + 1 + i, d) = support_base(i, d);
      positions(n + 1 + i, d) = params.position_scale * spos(i, d);
    }
  }
  Matrix out = attend(tokens, positions, params, weights);
  return {copy_rows(out, 0, n), copy_rows(out, n + 1, m)};
}

Matrix toy_self_encode(const Matrix& base, const AttentionParams& params, Matrix* weights) {
  Matrix positions = sinusoidal_positions(base.rows(), base.cols());
  for (auto& x : positions.values()) x *= params.position_scale;
  return attend(base, positions, params, weights);
}

PairEmbedding encode_pairs(const Episode& episode, const EmbeddingConfig& config,
                           const EncoderParams& params) {
  const auto& support = episode.support.pairs;
  PairEmbedding out;
  out.query_vectors.reserve(support.size());
  out.support_vectors.reserve(support.size());

  switch (config.source) {
    case EmbeddingSource::StaticLookup: {
      const Matrix query = params.lookup.embed(episode.query.tokens());
      for (const auto& s : support) {
        out.query_vectors.push_back(query);
        out.support_vectors.push_back(params.lookup.embed(s.tokens()));
      }
      break;
    }
    case EmbeddingSource::ToyAttention: {
      const Matrix query = params.lookup.embed(episode.query.tokens());
      if (config.mode == EmbeddingMode::Pairwise) {
        for (const auto& s : support) {
          auto enc = toy_pair_encode(query, params.lookup.embed(s.tokens()), params.attention);
          out.query_vectors.push_back(std::move(enc.query));
          out.support_vectors.push_back(std::move(enc.support));
        }
      } else {
        const Matrix encoded = toy_self_encode(query, params.attention);
        for (const auto& s : support) {
          out.query_vectors.push_back(encoded);
          out.support_vectors.push_back(toy_self_encode(params.lookup.embed(s.tokens()), params.attention));
        }
      }
      break;
    }
    case EmbeddingSource::ExternalDump: {
      if (!params.dump) throw ConfigError("external_dump source configured without a loaded dump");
      if (config.mode != EmbeddingMode::Pairwise) {
        throw ConfigError("external dumps hold pair-wise vectors; independent mode is unavailable");
      }
      out = params.dump->record(episode.support_id, episode.query_id);
      if (out.query_vectors.size() != support.size()) {
        throw DataError("dump record " + episode.support_id + "/" + std::to_string(episode.query_id) +
                        " has " + std::to_string(out.query_vectors.size()) + " pairings, episode has " +
                        std::to_string(support.size()) + " support sentences");
      }
      for (std::size_t i = 0; i < support.size(); ++i) {
        if (out.query_vectors[i].rows() != episode.query.size() ||
            out.support_vectors[i].rows() != support[i].size()) {
          throw DataError("dump record " + episode.support_id + "/" +
                          std::to_string(episode.query_id) + " token counts do not match the episode");
        }
      }
      break;
    }
  }
  if (out.dim() != 0 && out.dim() != config.dim) {
    throw ConfigError("encoder produced dim " + std::to_string(out.dim()) + " but config dim is " +
                      std::to_string(config.dim));
  }
  return out;
}

PairEmbedding project(const PairEmbedding& embedding, const Matrix& projection) {
  if (projection.cols() != embedding.dim()) {
    throw ConfigError("projection expects dim " + std::to_string(projection.cols()) +
                      ", embedding dim is " + std::to_string(embedding.dim()));
  }
  PairEmbedding out;
  out.query_vectors.reserve(embedding.query_vectors.size());
  out.support_vectors.reserve(embedding.support_vectors.size());
  for (const auto& m : embedding.query_vectors) out.query_vectors.push_back(project_rows(m, projection));
  for (const auto& m : embedding.support_vectors) out.support_vectors.push_back(project_rows(m, projection));
  return out;
}

PairEmbedding embed_episode(const Episode& episode, const EmbeddingConfig& config,
                            const EncoderParams& params) {
  PairEmbedding raw = encode_pairs(episode, config, params);
  if (config.projection && params.projection) return project(raw, *params.projection);
  return raw;
}

}  // namespace fewshot

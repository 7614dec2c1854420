#include "fewshot/emission.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

void check_shapes(const PairEmbedding& emb, const SupportTagIndices& tags, std::size_t tag_count) {
  if (emb.query_vectors.size() != tags.size() || emb.support_vectors.size() != tags.size()) {
    throw DataError("emission: embedding pairings do not match the support set size");
  }
  for (std::size_t s = 0; s < tags.size(); ++s) {
    if (emb.support_vectors[s].rows() != tags[s].size()) {
      throw DataError("emission: support sentence " + std::to_string(s) +
                      " has mismatched token and tag counts");
    }
    for (auto t : tags[s]) {
      if (t >= tag_count) throw DataError("emission: support tag index out of range");
    }
  }
}

std::size_t query_length(const PairEmbedding& emb) {
  return emb.query_vectors.empty() ? 0 : emb.query_vectors.front().rows();
}

std::vector<std::size_t> tag_counts(const SupportTagIndices& tags, std::size_t tag_count) {
  std::vector<std::size_t> counts(tag_count, 0);
  for (const auto& sentence : tags) {
    for (auto t : sentence) ++counts[t];
  }
  return counts;
}

// Per-tag sums of dot products, the building block of MN and NMN.
Matrix similarity_sums(const PairEmbedding& emb, const SupportTagIndices& tags, std::size_t tag_count) {
  check_shapes(emb, tags, tag_count);
  const std::size_t n = query_length(emb);
  Matrix sums(n, tag_count, 0.0);
  for (std::size_t s = 0; s < tags.size(); ++s) {
    const Matrix& q = emb.query_vectors[s];
    const Matrix& sup = emb.support_vectors[s];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < sup.rows(); ++k) sums(j, tags[s][k]) += dot(q.row(j), sup.row(k));
    }
  }
  return sums;
}

void mask_absent(Matrix& scores, const std::vector<std::size_t>& counts) {
  for (std::size_t j = 0; j < scores.rows(); ++j) {
    for (std::size_t t = 0; t < scores.cols(); ++t) {
      if (counts[t] == 0) scores(j, t) = kNegInfScore;
    }
  }
}

Matrix mean_query(const PairEmbedding& emb) {
  const std::size_t n = query_length(emb);
  Matrix mean(n, emb.dim(), 0.0);
  if (emb.query_vectors.empty()) return mean;
  const double inv = 1.0 / static_cast<double>(emb.query_vectors.size());
  for (const auto& q : emb.query_vectors) {
    for (std::size_t i = 0; i < mean.values().size(); ++i) mean.values()[i] += inv * q.values()[i];
  }
  return mean;
}

Matrix prototypes(const PairEmbedding& emb, const SupportTagIndices& tags, std::size_t tag_count,
                  const std::vector<std::size_t>& counts) {
  Matrix protos(tag_count, emb.dim(), 0.0);
  for (std::size_t s = 0; s < tags.size(); ++s) {
    for (std::size_t k = 0; k < tags[s].size(); ++k) {
      const std::size_t t = tags[s][k];
      const double w = 1.0 / static_cast<double>(counts[t]);
      auto row = emb.support_vectors[s].row(k);
      for (std::size_t d = 0; d < row.size(); ++d) protos(t, d) += w * row[d];
    }
  }
  return protos;
}

// C += a b^T
void add_outer(Matrix& c, double w, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double wa = w * a[r];
    if (wa == 0.0) continue;
    auto row = c.row(r);
    for (std::size_t col = 0; col < b.size(); ++col) row[col] += wa * b[col];
  }
}

// P (C + C^T)
Matrix symmetrize_through(const Matrix& projection, const Matrix& c) {
  const std::size_t h = c.rows();
  Matrix sym(h, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < h; ++col) sym(r, col) = c(r, col) + c(col, r);
  }
  Matrix out(projection.rows(), h, 0.0);
  for (std::size_t r = 0; r < projection.rows(); ++r) {
    for (std::size_t i = 0; i < h; ++i) {
      const double p = projection(r, i);
      if (p == 0.0) continue;
      for (std::size_t col = 0; col < h; ++col) out(r, col) += p * sym(i, col);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::Matching:
      return "mn";
    case ScorerKind::NormalizedMatching:
      return "nmn";
    case ScorerKind::Prototypical:
      return "proto";
    case ScorerKind::NearestToken:
      return "nearest";
  }
  return "nmn";
}

ScorerKind parse_scorer(std::string_view text) {
  if (text == "mn" || text == "matching") return ScorerKind::Matching;
  if (text == "nmn" || text == "normalized_matching") return ScorerKind::NormalizedMatching;
  if (text == "proto" || text == "prototypical") return ScorerKind::Prototypical;
  if (text == "nearest" || text == "nearest_token") return ScorerKind::NearestToken;
  throw ConfigError("unknown scorer '" + std::string(text) + "' (expected mn, nmn, proto, nearest)");
}

SupportTagIndices support_tag_indices(const SupportSet& support, const LabelSet& label_set) {
  SupportTagIndices out;
  out.reserve(support.pairs.size());
  for (const auto& s : support.pairs) out.push_back(to_indices(s.tags(), label_set));
  return out;
}

EmissionMatrix matching_score(const PairEmbedding& emb, const SupportTagIndices& tags,
                              std::size_t tag_count) {
  Matrix scores = similarity_sums(emb, tags, tag_count);
  mask_absent(scores, tag_counts(tags, tag_count));
  return scores;
}

EmissionMatrix normalized_matching_score(const PairEmbedding& emb, const SupportTagIndices& tags,
                                         std::size_t tag_count) {
  Matrix scores = similarity_sums(emb, tags, tag_count);
  const auto counts = tag_counts(tags, tag_count);
  for (std::size_t j = 0; j < scores.rows(); ++j) {
    for (std::size_t t = 0; t < tag_count; ++t) {
      scores(j, t) = counts[t] ? scores(j, t) / static_cast<double>(counts[t]) : kNegInfScore;
    }
  }
  return scores;
}

EmissionMatrix prototypical_score(const PairEmbedding& emb, const SupportTagIndices& tags,
                                  std::size_t tag_count) {
  check_shapes(emb, tags, tag_count);
  const auto counts = tag_counts(tags, tag_count);
  const Matrix protos = prototypes(emb, tags, tag_count, counts);
  const Matrix query = mean_query(emb);
  Matrix scores(query.rows(), tag_count);
  for (std::size_t j = 0; j < query.rows(); ++j) {
    for (std::size_t t = 0; t < tag_count; ++t) {
      scores(j, t) = counts[t] ? dot(query.row(j), protos.row(t)) : kNegInfScore;
    }
  }
  return scores;
}

EmissionMatrix nearest_token_score(const PairEmbedding& emb, const SupportTagIndices& tags,
                                   std::size_t tag_count) {
  check_shapes(emb, tags, tag_count);
  const std::size_t n = query_length(emb);
  Matrix scores(n, tag_count, kNegInfScore);
  for (std::size_t s = 0; s < tags.size(); ++s) {
    const Matrix& q = emb.query_vectors[s];
    const Matrix& sup = emb.support_vectors[s];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < sup.rows(); ++k) {
        double& cell = scores(j, tags[s][k]);
        cell = std::max(cell, dot(q.row(j), sup.row(k)));
      }
    }
  }
  return scores;
}

EmissionMatrix emission_scores(ScorerKind kind, const PairEmbedding& emb, const SupportTagIndices& tags,
                               std::size_t tag_count) {
  switch (kind) {
    case ScorerKind::Matching:
      return matching_score(emb, tags, tag_count);
    case ScorerKind::NormalizedMatching:
      return normalized_matching_score(emb, tags, tag_count);
    case ScorerKind::Prototypical:
      return prototypical_score(emb, tags, tag_count);
    case ScorerKind::NearestToken:
      return nearest_token_score(emb, tags, tag_count);
  }
  return normalized_matching_score(emb, tags, tag_count);
}

Matrix emission_projection_gradient(ScorerKind kind, const PairEmbedding& raw,
                                    const SupportTagIndices& tags, std::size_t tag_count,
                                    const Matrix& projection, const Matrix& grad_emissions) {
  check_shapes(raw, tags, tag_count);
  const std::size_t h = raw.dim();
  const std::size_t n = query_length(raw);
  const auto counts = tag_counts(tags, tag_count);
  // Every emission entry is a weighted sum of (P a).(P b); C collects w a b^T.
  Matrix c(h, h, 0.0);

  switch (kind) {
    case ScorerKind::Matching:
    case ScorerKind::NormalizedMatching: {
      std::vector<double> aggregated(h);
      for (std::size_t s = 0; s < tags.size(); ++s) {
        const Matrix& q = raw.query_vectors[s];
        const Matrix& sup = raw.support_vectors[s];
        for (std::size_t k = 0; k < sup.rows(); ++k) {
          const std::size_t t = tags[s][k];
          const double norm = kind == ScorerKind::Matching ? 1.0 : 1.0 / static_cast<double>(counts[t]);
          std::fill(aggregated.begin(), aggregated.end(), 0.0);
          for (std::size_t j = 0; j < n; ++j) {
            const double w = grad_emissions(j, t) * norm;
            if (w == 0.0) continue;
            auto row = q.row(j);
            for (std::size_t d = 0; d < h; ++d) aggregated[d] += w * row[d];
          }
          add_outer(c, 1.0, aggregated, sup.row(k));
        }
      }
      break;
    }
    case ScorerKind::Prototypical: {
      const Matrix protos = prototypes(raw, tags, tag_count, counts);
      const Matrix query = mean_query(raw);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t t = 0; t < tag_count; ++t) {
          if (counts[t] == 0) continue;
          add_outer(c, grad_emissions(j, t), query.row(j), protos.row(t));
        }
      }
      break;
    }
    case ScorerKind::NearestToken: {
      const PairEmbedding projected = project(raw, projection);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t t = 0; t < tag_count; ++t) {
          if (counts[t] == 0) continue;
          double best = -INFINITY;
          std::size_t best_s = 0, best_k = 0;
          for (std::size_t s = 0; s < tags.size(); ++s) {
            for (std::size_t k = 0; k < tags[s].size(); ++k) {
              if (tags[s][k] != t) continue;
              const double sim =
                  dot(projected.query_vectors[s].row(j), projected.support_vectors[s].row(k));
              if (sim > best) {
                best = sim;
                best_s = s;
                best_k = k;
              }
            }
          }
          add_outer(c, grad_emissions(j, t), raw.query_vectors[best_s].row(j),
                    raw.support_vectors[best_s].row(best_k));
        }
      }
      break;
    }
  }
  return symmetrize_through(projection, c);
}

}  // namespace fewshot

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "fewshot/embedding.hpp"
#include "fewshot/matrix.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

// Score given to tags that have no support token in the episode.
inline constexpr double kNegInfScore = -1e9;

enum class ScorerKind { Matching, NormalizedMatching, Prototypical, NearestToken };

std::string_view to_string(ScorerKind kind);
// Accepts "mn", "nmn", "proto", "nearest" (and the long names).
ScorerKind parse_scorer(std::string_view text);

// n x (2m+1) emission scores f_E(y_j = t) indexed by (position, tag index).
using EmissionMatrix = Matrix;

// Tag index of every support token, per support sentence.
using SupportTagIndices = std::vector<std::vector<std::size_t>>;
SupportTagIndices support_tag_indices(const SupportSet& support, const LabelSet& label_set);

// All scorers use dot-product similarity. For query token j compared with a
// token of support sentence s, both vectors come from the (query, s) pairing.

// Sum over support tokens with tag t of e_j . e_k.
EmissionMatrix matching_score(const PairEmbedding& embedding, const SupportTagIndices& tags,
                              std::size_t tag_count);
// matching_score divided by the number of support tokens with tag t.
EmissionMatrix normalized_matching_score(const PairEmbedding& embedding, const SupportTagIndices& tags,
                                         std::size_t tag_count);
// e_j . c_t with c_t the mean support vector of tag t and e_j the mean of the
// query token's pairings.
EmissionMatrix prototypical_score(const PairEmbedding& embedding, const SupportTagIndices& tags,
                                  std::size_t tag_count);
// Max over support tokens with tag t of e_j . e_k.
EmissionMatrix nearest_token_score(const PairEmbedding& embedding, const SupportTagIndices& tags,
                                   std::size_t tag_count);

EmissionMatrix emission_scores(ScorerKind kind, const PairEmbedding& embedding,
                               const SupportTagIndices& tags, std::size_t tag_count);

// dL/dP for emissions computed on project(raw, P), given dL/dE.
Matrix emission_projection_gradient(ScorerKind kind, const PairEmbedding& raw,
                                    const SupportTagIndices& tags, std::size_t tag_count,
                                    const Matrix& projection, const Matrix& grad_emissions);

}  // namespace fewshot

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fewshot/matrix.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

// The 13 cells of the abstract 3x5 transition table. Rows are the abstract
// source tag {O, B, I}; columns are {O, sB, dB, sI, dI} (same/different label
// as the source). O has no label to compare against, so (O, dB) and (O, dI)
// do not exist and O -> any B / any I use the sB / sI columns.
enum class TableCell : std::uint8_t {
  OutsideToOutside,
  OutsideToBegin,
  OutsideToInside,
  BeginToOutside,
  BeginToSameBegin,
  BeginToOtherBegin,
  BeginToSameInside,
  BeginToOtherInside,
  InsideToOutside,
  InsideToSameBegin,
  InsideToOtherBegin,
  InsideToSameInside,
  InsideToOtherInside,
};
inline constexpr std::size_t kTableCells = 13;

// Transitions out of the virtual start state, by abstract target.
enum class StartCell : std::uint8_t { Outside, Begin, Inside };
inline constexpr std::size_t kStartCells = 3;

std::string_view to_string(TableCell cell);

// Unconstrained log-potentials. start is present only when start transitions
// are modelled; end transitions never are.
struct TransitionTable {
  std::array<double, kTableCells> entries{};
  std::optional<std::array<double, kStartCells>> start;

  double& operator[](TableCell cell) { return entries[static_cast<std::size_t>(cell)]; }
  double operator[](TableCell cell) const { return entries[static_cast<std::size_t>(cell)]; }

  bool operator==(const TransitionTable&) const = default;
};

// Abstract cell supplying the concrete transition between two canonical tag indices.
TableCell transition_cell(std::size_t from, std::size_t to);
StartCell start_cell(std::size_t tag);

struct TransitionMatrix {
  Matrix scores;              // (2m+1) x (2m+1)
  std::vector<double> start;  // empty when start transitions are disabled
};

TransitionMatrix expand(const TransitionTable& table, const LabelSet& label_set);
TransitionMatrix expand(const TransitionTable& table, std::size_t label_count);

// TRANS(y) + lambda * EMIT(y).
double sequence_score(std::span<const std::size_t> tags, const Matrix& emissions,
                      const TransitionMatrix& transitions, double lambda);

// log of the sum of exp(sequence_score) over all tag sequences (forward algorithm).
double log_partition(const Matrix& emissions, const TransitionMatrix& transitions, double lambda);

struct Marginals {
  Matrix node;               // n x T, row j = p(y_j = t)
  std::vector<Matrix> edge;  // n-1 matrices T x T, edge[j](a, b) = p(y_j = a, y_{j+1} = b)
  double log_partition = 0.0;
};

Marginals marginals(const Matrix& emissions, const TransitionMatrix& transitions, double lambda);

struct NllGradients {
  double loss = 0.0;
  TransitionTable grad_table;
  double grad_lambda = 0.0;
  Matrix grad_emissions;
};

// -log p(gold | x, S) and its gradients with respect to the table entries,
// lambda and the emission matrix. Throws DataError for out-of-range gold tags.
NllGradients nll_and_gradients(std::span<const std::size_t> gold, const Matrix& emissions,
                               const TransitionTable& table, const LabelSet& label_set,
                               double lambda);

// Highest-scoring tag sequence; ties go to the lower tag index.
std::vector<std::size_t> viterbi(const Matrix& emissions, const TransitionMatrix& transitions,
                                 double lambda);

// Greedy left-to-right decoding that never emits I-l unless the previous tag
// is B-l or I-l. Tags with sentinel scores are never chosen; O is the fallback.
std::vector<std::size_t> rule_decode(const Matrix& emissions, const LabelSet& label_set);

// Per-position argmax of the emission scores.
std::vector<std::size_t> argmax_decode(const Matrix& emissions);

enum class Decoder { Viterbi, Rule, Argmax };
std::string_view to_string(Decoder decoder);
Decoder parse_decoder(std::string_view text);

}  // namespace fewshot

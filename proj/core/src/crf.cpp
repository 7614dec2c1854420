#include "fewshot/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fewshot/emission.hpp"
#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

double log_sum_exp(std::span<const double> xs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : xs) peak = std::max(peak, x);
  if (!std::isfinite(peak)) return peak;
  double total = 0.0;
  for (double x : xs) total += std::exp(x - peak);
  return peak + std::log(total);
}

void check_emissions(const Matrix& emissions, const TransitionMatrix& transitions) {
  if (emissions.rows() == 0) throw DataError("CRF: empty sequence");
  if (emissions.cols() != transitions.scores.rows()) {
    throw DataError("CRF: emission matrix has " + std::to_string(emissions.cols()) +
                    " tags, transition matrix has " + std::to_string(transitions.scores.rows()));
  }
}

double start_score(const TransitionMatrix& transitions, std::size_t tag) {
  return transitions.start.empty() ? 0.0 : transitions.start[tag];
}

// alpha(j, t): log-sum over prefixes ending in t at position j.
Matrix forward(const Matrix& emissions, const TransitionMatrix& transitions, double lambda) {
  const std::size_t n = emissions.rows();
  const std::size_t tags = emissions.cols();
  Matrix alpha(n, tags);
  for (std::size_t t = 0; t < tags; ++t) alpha(0, t) = start_score(transitions, t) + lambda * emissions(0, t);
  std::vector<double> terms(tags);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t t = 0; t < tags; ++t) {
      for (std::size_t p = 0; p < tags; ++p) terms[p] = alpha(j - 1, p) + transitions.scores(p, t);
      alpha(j, t) = log_sum_exp(terms) + lambda * emissions(j, t);
    }
  }
  return alpha;
}

// beta(j, t): log-sum over suffixes after position j given y_j = t.
Matrix backward(const Matrix& emissions, const TransitionMatrix& transitions, double lambda) {
  const std::size_t n = emissions.rows();
  const std::size_t tags = emissions.cols();
  Matrix beta(n, tags, 0.0);
  std::vector<double> terms(tags);
  for (std::size_t j = n - 1; j-- > 0;) {
    for (std::size_t p = 0; p < tags; ++p) {
      for (std::size_t t = 0; t < tags; ++t) {
        terms[t] = transitions.scores(p, t) + lambda * emissions(j + 1, t) + beta(j + 1, t);
      }
      beta(j, p) = log_sum_exp(terms);
    }
  }
  return beta;
}

}  // namespace

std::string_view to_string(TableCell cell) {
  static constexpr std::array<std::string_view, kTableCells> names = {
      "O->O",  "O->sB", "O->sI", "B->O",  "B->sB", "B->dB", "B->sI",
      "B->dI", "I->O",  "I->sB", "I->dB", "I->sI", "I->dI"};
  return names[static_cast<std::size_t>(cell)];
}

TableCell transition_cell(std::size_t from, std::size_t to) {
  if (from == kOutsideIndex) {
    if (to == kOutsideIndex) return TableCell::OutsideToOutside;
    return is_begin_index(to) ? TableCell::OutsideToBegin : TableCell::OutsideToInside;
  }
  const bool from_begin = is_begin_index(from);
  if (to == kOutsideIndex) return from_begin ? TableCell::BeginToOutside : TableCell::InsideToOutside;
  const bool same = label_of_index(from) == label_of_index(to);
  if (is_begin_index(to)) {
    if (from_begin) return same ? TableCell::BeginToSameBegin : TableCell::BeginToOtherBegin;
    return same ? TableCell::InsideToSameBegin : TableCell::InsideToOtherBegin;
  }
  if (from_begin) return same ? TableCell::BeginToSameInside : TableCell::BeginToOtherInside;
  return same ? TableCell::InsideToSameInside : TableCell::InsideToOtherInside;
}

StartCell start_cell(std::size_t tag) {
  if (tag == kOutsideIndex) return StartCell::Outside;
  return is_begin_index(tag) ? StartCell::Begin : StartCell::Inside;
}

TransitionMatrix expand(const TransitionTable& table, std::size_t label_count) {
  const std::size_t tags = 2 * label_count + 1;
  TransitionMatrix out{Matrix(tags, tags), {}};
  for (std::size_t from = 0; from < tags; ++from) {
    for (std::size_t to = 0; to < tags; ++to) out.scores(from, to) = table[transition_cell(from, to)];
  }
  if (table.start) {
    out.start.resize(tags);
    for (std::size_t t = 0; t < tags; ++t) {
      out.start[t] = (*table.start)[static_cast<std::size_t>(start_cell(t))];
    }
  }
  return out;
}

TransitionMatrix expand(const TransitionTable& table, const LabelSet& label_set) {
  return expand(table, label_set.size());
}

double sequence_score(std::span<const std::size_t> tags, const Matrix& emissions,
                      const TransitionMatrix& transitions, double lambda) {
  if (tags.size() != emissions.rows()) throw DataError("sequence_score: length mismatch");
  if (tags.empty()) return 0.0;
  double trans = start_score(transitions, tags[0]);
  double emit = emissions(0, tags[0]);
  for (std::size_t j = 1; j < tags.size(); ++j) {
    trans += transitions.scores(tags[j - 1], tags[j]);
    emit += emissions(j, tags[j]);
  }
  return trans + lambda * emit;
}

double log_partition(const Matrix& emissions, const TransitionMatrix& transitions, double lambda) {
  check_emissions(emissions, transitions);
  const Matrix alpha = forward(emissions, transitions, lambda);
  return log_sum_exp(alpha.row(alpha.rows() - 1));
}

Marginals marginals(const Matrix& emissions, const TransitionMatrix& transitions, double lambda) {
  check_emissions(emissions, transitions);
  const std::size_t n = emissions.rows();
  const std::size_t tags = emissions.cols();
  const Matrix alpha = forward(emissions, transitions, lambda);
  const Matrix beta = backward(emissions, transitions, lambda);

  Marginals out;
  out.log_partition = log_sum_exp(alpha.row(n - 1));
  out.node = Matrix(n, tags);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < tags; ++t) {
      out.node(j, t) = std::exp(alpha(j, t) + beta(j, t) - out.log_partition);
    }
  }
  out.edge.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    Matrix edge(tags, tags);
    for (std::size_t a = 0; a < tags; ++a) {
      for (std::size_t b = 0; b < tags; ++b) {
        edge(a, b) = std::exp(alpha(j, a) + transitions.scores(a, b) + lambda * emissions(j + 1, b) +
                              beta(j + 1, b) - out.log_partition);
      }
    }
    out.edge.push_back(std::move(edge));
  }
  return out;
}

NllGradients nll_and_gradients(std::span<const std::size_t> gold, const Matrix& emissions,
                               const TransitionTable& table, const LabelSet& label_set,
                               double lambda) {
  const std::size_t tags = label_set.tag_count();
  if (gold.size() != emissions.rows()) throw DataError("nll: gold length does not match emissions");
  for (auto t : gold) {
    if (t >= tags) {
      throw DataError("nll: gold tag index " + std::to_string(t) + " is not in the " +
                      std::to_string(tags) + "-tag list");
    }
  }
  const TransitionMatrix transitions = expand(table, label_set);
  const Marginals marg = marginals(emissions, transitions, lambda);
  const std::size_t n = gold.size();

  NllGradients out;
  out.loss = marg.log_partition - sequence_score(gold, emissions, transitions, lambda);
  out.grad_table.entries.fill(0.0);
  if (table.start) out.grad_table.start = std::array<double, kStartCells>{};

  for (std::size_t j = 0; j + 1 < n; ++j) {
    const Matrix& edge = marg.edge[j];
    for (std::size_t a = 0; a < tags; ++a) {
      for (std::size_t b = 0; b < tags; ++b) out.grad_table[transition_cell(a, b)] += edge(a, b);
    }
    out.grad_table[transition_cell(gold[j], gold[j + 1])] -= 1.0;
  }
  if (table.start) {
    auto& grad_start = *out.grad_table.start;
    for (std::size_t t = 0; t < tags; ++t) {
      grad_start[static_cast<std::size_t>(start_cell(t))] += marg.node(0, t);
    }
    grad_start[static_cast<std::size_t>(start_cell(gold[0]))] -= 1.0;
  }

  out.grad_emissions = Matrix(n, tags);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < tags; ++t) {
      const double p = marg.node(j, t);
      if (p != 0.0) out.grad_lambda += emissions(j, t) * p;
      out.grad_emissions(j, t) = lambda * (p - (gold[j] == t ? 1.0 : 0.0));
    }
    out.grad_lambda -= emissions(j, gold[j]);
  }
  return out;
}

std::vector<std::size_t> viterbi(const Matrix& emissions, const TransitionMatrix& transitions,
                                 double lambda) {
  check_emissions(emissions, transitions);
  const std::size_t n = emissions.rows();
  const std::size_t tags = emissions.cols();
  Matrix best(n, tags);
  std::vector<std::size_t> back(n * tags, 0);
  for (std::size_t t = 0; t < tags; ++t) best(0, t) = start_score(transitions, t) + lambda * emissions(0, t);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t t = 0; t < tags; ++t) {
      std::size_t arg = 0;
      double top = best(j - 1, 0) + transitions.scores(0, t);
      for (std::size_t p = 1; p < tags; ++p) {
        const double v = best(j - 1, p) + transitions.scores(p, t);
        if (v > top) {
          top = v;
          arg = p;
        }
      }
      best(j, t) = top + lambda * emissions(j, t);
      back[j * tags + t] = arg;
    }
  }
  std::vector<std::size_t> path(n);
  std::size_t last = 0;
  for (std::size_t t = 1; t < tags; ++t) {
    if (best(n - 1, t) > best(n - 1, last)) last = t;
  }
  path[n - 1] = last;
  for (std::size_t j = n - 1; j > 0; --j) path[j - 1] = back[j * tags + path[j]];
  return path;
}

std::vector<std::size_t> rule_decode(const Matrix& emissions, const LabelSet& label_set) {
  const std::size_t tags = label_set.tag_count();
  if (emissions.cols() != tags) throw DataError("rule_decode: emission width does not match label set");
  std::vector<std::size_t> out;
  out.reserve(emissions.rows());
  for (std::size_t j = 0; j < emissions.rows(); ++j) {
    std::optional<std::size_t> choice;
    for (std::size_t t = 0; t < tags; ++t) {
      if (emissions(j, t) <= kNegInfScore) continue;
      if (is_inside_index(t)) {
        const bool continues = !out.empty() && out.back() != kOutsideIndex &&
                               label_of_index(out.back()) == label_of_index(t);
        if (!continues) continue;
      }
      if (!choice || emissions(j, t) > emissions(j, *choice)) choice = t;
    }
    out.push_back(choice.value_or(kOutsideIndex));
  }
  return out;
}

std::vector<std::size_t> argmax_decode(const Matrix& emissions) {
  std::vector<std::size_t> out(emissions.rows(), 0);
  for (std::size_t j = 0; j < emissions.rows(); ++j) {
    for (std::size_t t = 1; t < emissions.cols(); ++t) {
      if (emissions(j, t) > emissions(j, out[j])) out[j] = t;
    }
  }
  return out;
}

std::string_view to_string(Decoder decoder) {
  switch (decoder) {
    case Decoder::Viterbi:
      return "viterbi";
    case Decoder::Rule:
      return "rule";
    case Decoder::Argmax:
      return "argmax";
  }
  return "viterbi";
}

Decoder parse_decoder(std::string_view text) {
  if (text == "viterbi") return Decoder::Viterbi;
  if (text == "rule") return Decoder::Rule;
  if (text == "argmax") return Decoder::Argmax;
  throw ConfigError("unknown decoder '" + std::string(text) + "' (expected viterbi, rule, argmax)");
}

}  // namespace fewshot

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fewshot {

// A domain-specific slot or entity label. Non-empty, no whitespace.
class Label {
 public:
  explicit Label(std::string name);

  const std::string& name() const { return name_; }

  auto operator<=>(const Label&) const = default;

 private:
  std::string name_;
};

enum class TagKind : std::uint8_t { Outside, Begin, Inside };

// A BIO tag. Outside carries no label; Begin and Inside carry exactly one.
class Tag {
 public:
  static Tag outside() { return Tag(TagKind::Outside, std::nullopt); }
  static Tag begin(Label label) { return Tag(TagKind::Begin, std::move(label)); }
  static Tag inside(Label label) { return Tag(TagKind::Inside, std::move(label)); }

  // Parses "O", "B-<label>" or "I-<label>"; throws DataError otherwise.
  static Tag parse(std::string_view text);

  TagKind kind() const { return kind_; }
  bool is_outside() const { return kind_ == TagKind::Outside; }
  // Precondition: !is_outside().
  const Label& label() const;

  std::string to_string() const;

  bool operator==(const Tag&) const = default;

 private:
  Tag(TagKind kind, std::optional<Label> label) : kind_(kind), label_(std::move(label)) {}

  TagKind kind_;
  std::optional<Label> label_;
};

class LabeledSequence;

// Ordered label set L_D with the derived canonical tag list
// [O, B-l1, I-l1, B-l2, I-l2, ...].
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<Label> labels);

  // Labels in order of first appearance.
  static LabelSet from_sequences(std::span<const LabeledSequence> sequences);

  std::size_t size() const { return labels_.size(); }
  std::size_t tag_count() const { return 2 * labels_.size() + 1; }
  const std::vector<Label>& labels() const { return labels_; }

  std::optional<std::size_t> find(std::string_view name) const;
  bool contains(const Label& label) const { return find(label.name()).has_value(); }

  // Throws DataError naming the label when it is not in the set.
  std::size_t index_of(const Tag& tag) const;
  Tag tag_at(std::size_t index) const;
  std::vector<Tag> tags() const;

  bool operator==(const LabelSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<Label> labels_;
  std::unordered_map<std::string, std::size_t> positions_;
};

std::size_t tag_index(const Tag& tag, const LabelSet& label_set);

// Tag index helpers for the canonical layout.
inline constexpr std::size_t kOutsideIndex = 0;
inline constexpr bool is_begin_index(std::size_t t) { return t > 0 && t % 2 == 1; }
inline constexpr bool is_inside_index(std::size_t t) { return t > 0 && t % 2 == 0; }
// Label position of a non-O tag index.
inline constexpr std::size_t label_of_index(std::size_t t) { return (t - 1) / 2; }

class LabeledSequence {
 public:
  // Throws DataError if sizes differ or the sequence is empty.
  LabeledSequence(std::vector<std::string> tokens, std::vector<Tag> tags);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<Tag>& tags() const { return tags_; }

  bool operator==(const LabeledSequence&) const = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<Tag> tags_;
};

// Positions j where Inside(l) lacks a Begin(l)/Inside(l) predecessor.
std::vector<std::size_t> validate_bio(std::span<const Tag> tags);
std::vector<std::size_t> validate_bio(const LabeledSequence& sequence);

struct SupportSet {
  std::vector<LabeledSequence> pairs;
  std::size_t shot = 1;
};

struct Episode {
  LabeledSequence query;
  SupportSet support;
  std::string domain;
  std::string support_id;
  std::size_t query_id = 0;
};

// Labels of the support sentences, then any extra query labels, in order of
// first appearance.
LabelSet episode_label_set(const Episode& episode);

std::vector<std::size_t> to_indices(std::span<const Tag> tags, const LabelSet& label_set);
std::vector<Tag> to_tags(std::span<const std::size_t> indices, const LabelSet& label_set);

}  // namespace fewshot

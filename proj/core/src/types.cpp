#include "fewshot/types.hpp"

#include <algorithm>
#include <cctype>

#include "fewshot/errors.hpp"

namespace fewshot {

Label::Label(std::string name) : name_(std::move(name)) {
  if (name_.empty()) throw DataError("label name is empty");
  if (std::any_of(name_.begin(), name_.end(),
                  [](unsigned char c) { return std::isspace(c) != 0; })) {
    throw DataError("label name contains whitespace: '" + name_ + "'");
  }
}

Tag Tag::parse(std::string_view text) {
  if (text == "O") return outside();
  if (text.size() > 2 && text[1] == '-') {
    Label label{std::string(text.substr(2))};
    if (text[0] == 'B') return begin(std::move(label));
    if (text[0] == 'I') return inside(std::move(label));
  }
  throw DataError("unrecognized tag '" + std::string(text) + "' (expected O, B-<label> or I-<label>)");
}

const Label& Tag::label() const {
  if (!label_) throw DataError("tag O carries no label");
  return *label_;
}

std::string Tag::to_string() const {
  switch (kind_) {
    case TagKind::Outside:
      return "O";
    case TagKind::Begin:
      return "B-" + label_->name();
    case TagKind::Inside:
      return "I-" + label_->name();
  }
  return "O";
}

LabelSet::LabelSet(std::vector<Label> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto [it, inserted] = positions_.emplace(labels_[i].name(), i);
    if (!inserted) throw DataError("duplicate label '" + labels_[i].name() + "' in label set");
  }
}

LabelSet LabelSet::from_sequences(std::span<const LabeledSequence> sequences) {
  std::vector<Label> labels;
  std::unordered_map<std::string, bool> seen;
  for (const auto& seq : sequences) {
    for (const auto& tag : seq.tags()) {
      if (tag.is_outside()) continue;
      if (seen.emplace(tag.label().name(), true).second) labels.push_back(tag.label());
    }
  }
  return LabelSet(std::move(labels));
}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
  auto it = positions_.find(std::string(name));
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSet::index_of(const Tag& tag) const {
  if (tag.is_outside()) return kOutsideIndex;
  auto pos = find(tag.label().name());
  if (!pos) throw DataError("label '" + tag.label().name() + "' is not in the label set");
  return 1 + 2 * *pos + (tag.kind() == TagKind::Inside ? 1 : 0);
}

Tag LabelSet::tag_at(std::size_t index) const {
  if (index >= tag_count()) {
    throw DataError("tag index " + std::to_string(index) + " out of range for " +
                    std::to_string(tag_count()) + " tags");
  }
  if (index == kOutsideIndex) return Tag::outside();
  const Label& label = labels_[label_of_index(index)];
  return is_begin_index(index) ? Tag::begin(label) : Tag::inside(label);
}

std::vector<Tag> LabelSet::tags() const {
  std::vector<Tag> out;
  out.reserve(tag_count());
  for (std::size_t i = 0; i < tag_count(); ++i) out.push_back(tag_at(i));
  return out;
}

std::size_t tag_index(const Tag& tag, const LabelSet& label_set) { return label_set.index_of(tag); }

LabeledSequence::LabeledSequence(std::vector<std::string> tokens, std::vector<Tag> tags)
    : tokens_(std::move(tokens)), tags_(std::move(tags)) {
  if (tokens_.empty()) throw DataError("labeled sequence is empty");
  if (tokens_.size() != tags_.size()) {
    throw DataError("sequence has " + std::to_string(tokens_.size()) + " tokens but " +
                    std::to_string(tags_.size()) + " tags");
  }
}

std::vector<std::size_t> validate_bio(std::span<const Tag> tags) {
  std::vector<std::size_t> violations;
  for (std::size_t j = 0; j < tags.size(); ++j) {
    if (tags[j].kind() != TagKind::Inside) continue;
    bool ok = j > 0 && !tags[j - 1].is_outside() && tags[j - 1].label() == tags[j].label();
    if (!ok) violations.push_back(j);
  }
  return violations;
}

std::vector<std::size_t> validate_bio(const LabeledSequence& sequence) {
  return validate_bio(std::span<const Tag>(sequence.tags()));
}

LabelSet episode_label_set(const Episode& episode) {
  std::vector<LabeledSequence> all = episode.support.pairs;
  all.push_back(episode.query);
  return LabelSet::from_sequences(all);
}

std::vector<std::size_t> to_indices(std::span<const Tag> tags, const LabelSet& label_set) {
  std::vector<std::size_t> out;
  out.reserve(tags.size());
  for (const auto& tag : tags) out.push_back(label_set.index_of(tag));
  return out;
}

std::vector<Tag> to_tags(std::span<const std::size_t> indices, const LabelSet& label_set) {
  std::vector<Tag> out;
  out.reserve(indices.size());
  for (auto t : indices) out.push_back(label_set.tag_at(t));
  return out;
}

}  // namespace fewshot

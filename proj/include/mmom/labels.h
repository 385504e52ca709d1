#pragma once

// Tagging schemes for aspect extraction and aspect sentiment:
//   AE         O / B / I
//   SC         per-token sentiment or none
//   Collapsed  O / B-<sent> / I-<sent>
// plus chunk extraction with conlleval conventions.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmom {

enum class SentimentClass { kPositive, kNegative, kNeutral };

// "positive" / "negative" / "neutral".
std::string to_string(SentimentClass s);
std::optional<SentimentClass> parse_sentiment(std::string_view text);
// "POS" / "NEG" / "NEU", the suffix used inside collapsed tags.
std::string_view sentiment_code(SentimentClass s);

enum class Position { kO, kB, kI };

// One tag of the AE or Collapsed scheme. AE tags never carry a sentiment;
// collapsed tags carry one iff position != O.
struct Tag {
  Position position = Position::kO;
  std::optional<SentimentClass> sentiment;

  static Tag O() { return {}; }
  static Tag B(std::optional<SentimentClass> s = std::nullopt) { return {Position::kB, s}; }
  static Tag I(std::optional<SentimentClass> s = std::nullopt) { return {Position::kI, s}; }

  bool is_outside() const { return position == Position::kO; }
  friend bool operator==(const Tag&, const Tag&) = default;
};

std::string to_string(const Tag& tag);
// Accepts "O", "B", "I", "B-POS", "I-NEG", "B-NEU", ...
std::optional<Tag> parse_tag(std::string_view text);

enum class Scheme { kAspect, kCollapsed };

// Per-token sentiment labels of the SC scheme; nullopt is the "no sentiment" label.
using SentimentTags = std::vector<std::optional<SentimentClass>>;

struct TagSequence {
  Scheme scheme = Scheme::kAspect;
  std::vector<Tag> tags;

  std::size_t size() const { return tags.size(); }
  friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

TagSequence aspect_sequence(std::vector<Tag> tags);
TagSequence collapsed_sequence(std::vector<Tag> tags);

// Half-open token range [start, end).
struct Chunk {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<SentimentClass> sentiment;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

enum class Validation { kStrict, kLenient };

// Checks scheme consistency (AE tags without sentiment, collapsed B/I with
// one). In strict mode also rejects I (or I-x) after O, after a chunk of a
// different sentiment, or at the start. Throws ValidationError naming the index.
void validate(const TagSequence& seq, Validation mode = Validation::kStrict);

// Lenient repair: a stray I becomes B, so every chunk starts with a B.
TagSequence repair(const TagSequence& seq);

TagSequence collapse(const TagSequence& ae, const SentimentTags& sc);

// Splits a sentiment-bearing sequence back into AE tags plus one chunk per
// aspect. A chunk's sentiment is the majority over its member tags, ties going
// to the sentiment of its first tag.
struct Decoupled {
  TagSequence aspects;
  std::vector<Chunk> chunks;
};
Decoupled decouple(const TagSequence& collapsed);

// Chunks under conlleval conventions: a chunk starts at B, at an I following
// O or sequence start, and at an I whose sentiment differs from the running
// chunk. Output is sorted and non-overlapping.
std::vector<Chunk> extract_chunks(const TagSequence& seq);

// Drops sentiments: Collapsed -> AE.
TagSequence to_aspect(const TagSequence& seq);

// Ordered label vocabulary. Index <-> tag is a bijection.
class TagSet {
 public:
  // AE ignores `sentiments`; Collapsed requires a non-empty set and orders
  // labels as O, then B-x for each sentiment, then I-x for each sentiment.
  TagSet(Scheme scheme, std::vector<SentimentClass> sentiments = {});

  Scheme scheme() const { return scheme_; }
  std::size_t size() const { return labels_.size(); }
  const Tag& label(std::size_t index) const { return labels_.at(index); }
  std::size_t index_of(const Tag& tag) const;
  const std::vector<Tag>& labels() const { return labels_; }
  const std::vector<SentimentClass>& sentiments() const { return sentiments_; }

  std::vector<std::size_t> encode(const TagSequence& seq) const;
  TagSequence decode(const std::vector<std::size_t>& ids) const;

 private:
  Scheme scheme_;
  std::vector<SentimentClass> sentiments_;
  std::vector<Tag> labels_;
};

// Canonical sentiment order positive, negative, neutral restricted to `set`.
std::vector<SentimentClass> ordered_sentiments(const std::vector<SentimentClass>& set);

}  // namespace mmom

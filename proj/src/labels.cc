#include "mmom/labels.h"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "mmom/errors.h"

namespace mmom {

std::string to_string(SentimentClass s) {
  switch (s) {
    case SentimentClass::kPositive: return "positive";
    case SentimentClass::kNegative: return "negative";
    case SentimentClass::kNeutral: return "neutral";
  }
  return "neutral";
}

std::optional<SentimentClass> parse_sentiment(std::string_view text) {
  if (text == "positive" || text == "POS" || text == "+") return SentimentClass::kPositive;
  if (text == "negative" || text == "NEG" || text == "-") return SentimentClass::kNegative;
  if (text == "neutral" || text == "NEU") return SentimentClass::kNeutral;
  return std::nullopt;
}

std::string_view sentiment_code(SentimentClass s) {
  switch (s) {
    case SentimentClass::kPositive: return "POS";
    case SentimentClass::kNegative: return "NEG";
    case SentimentClass::kNeutral: return "NEU";
  }
  return "NEU";
}

std::string to_string(const Tag& tag) {
  std::string out;
  switch (tag.position) {
    case Position::kO: return "O";
    case Position::kB: out = "B"; break;
    case Position::kI: out = "I"; break;
  }
  if (tag.sentiment) {
    out += '-';
    out += sentiment_code(*tag.sentiment);
  }
  return out;
}

std::optional<Tag> parse_tag(std::string_view text) {
  if (text == "O") return Tag::O();
  if (text.empty()) return std::nullopt;
  Position pos;
  if (text[0] == 'B') {
    pos = Position::kB;
  } else if (text[0] == 'I') {
    pos = Position::kI;
  } else {
    return std::nullopt;
  }
  if (text.size() == 1) return Tag{pos, std::nullopt};
  if (text[1] != '-') return std::nullopt;
  auto code = text.substr(2);
  if (code != "POS" && code != "NEG" && code != "NEU") return std::nullopt;
  return Tag{pos, parse_sentiment(code)};
}

TagSequence aspect_sequence(std::vector<Tag> tags) {
  return TagSequence{Scheme::kAspect, std::move(tags)};
}

TagSequence collapsed_sequence(std::vector<Tag> tags) {
  return TagSequence{Scheme::kCollapsed, std::move(tags)};
}

namespace {

std::string where(std::size_t i) { return " at index " + std::to_string(i); }

// True when `tag` opens a new chunk given the previous tag (conlleval rule).
bool starts_chunk(const Tag* prev, const Tag& tag) {
  if (tag.is_outside()) return false;
  if (tag.position == Position::kB) return true;
  if (prev == nullptr || prev->is_outside()) return true;
  return prev->sentiment != tag.sentiment;
}

}  // namespace

void validate(const TagSequence& seq, Validation mode) {
  for (std::size_t i = 0; i < seq.tags.size(); ++i) {
    const Tag& t = seq.tags[i];
    if (seq.scheme == Scheme::kAspect && t.sentiment) {
      throw ValidationError("AE tag carries a sentiment" + where(i));
    }
    if (seq.scheme == Scheme::kCollapsed) {
      if (t.is_outside() && t.sentiment) {
        throw ValidationError("O tag carries a sentiment" + where(i));
      }
      if (!t.is_outside() && !t.sentiment) {
        throw ValidationError("collapsed tag " + to_string(t) + " lacks a sentiment" + where(i));
      }
    }
    if (mode == Validation::kStrict && t.position == Position::kI) {
      const Tag* prev = i == 0 ? nullptr : &seq.tags[i - 1];
      if (starts_chunk(prev, t)) {
        std::string before = prev == nullptr ? "sequence start" : to_string(*prev);
        throw ValidationError(to_string(t) + " follows " + before + where(i));
      }
    }
  }
}

TagSequence repair(const TagSequence& seq) {
  TagSequence out = seq;
  for (std::size_t i = 0; i < out.tags.size(); ++i) {
    const Tag* prev = i == 0 ? nullptr : &seq.tags[i - 1];
    if (out.tags[i].position == Position::kI && starts_chunk(prev, seq.tags[i])) {
      out.tags[i].position = Position::kB;
    }
  }
  return out;
}

TagSequence collapse(const TagSequence& ae, const SentimentTags& sc) {
  if (ae.scheme != Scheme::kAspect) throw ValidationError("collapse expects an AE sequence");
  if (ae.tags.size() != sc.size()) {
    throw ValidationError("length mismatch: AE has " + std::to_string(ae.tags.size()) +
                          " tags, SC has " + std::to_string(sc.size()));
  }
  TagSequence out{Scheme::kCollapsed, {}};
  out.tags.reserve(sc.size());
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const Tag& t = ae.tags[i];
    if (t.is_outside() != !sc[i].has_value()) {
      throw ValidationError("aspect membership and sentiment disagree" + where(i) + " (" +
                            to_string(t) + " with " +
                            (sc[i] ? to_string(*sc[i]) : std::string("no sentiment")) + ")");
    }
    out.tags.push_back(t.is_outside() ? Tag::O() : Tag{t.position, sc[i]});
  }
  return out;
}

TagSequence to_aspect(const TagSequence& seq) {
  TagSequence out{Scheme::kAspect, seq.tags};
  for (auto& t : out.tags) t.sentiment.reset();
  return out;
}

Decoupled decouple(const TagSequence& collapsed) {
  Decoupled out;
  // Chunk boundaries come from the AE projection so that a sentiment switch
  // inside an aspect does not split it.
  out.aspects = repair(to_aspect(collapsed));
  const auto& tags = collapsed.tags;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (out.aspects.tags[i].is_outside()) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < tags.size() && out.aspects.tags[end].position == Position::kI) ++end;

    std::array<int, 3> votes{};
    for (std::size_t k = i; k < end; ++k) {
      if (tags[k].sentiment) ++votes[static_cast<int>(*tags[k].sentiment)];
    }
    // Scanning members in order and only replacing on a strictly larger count
    // resolves ties in favour of the sentiment seen first.
    std::optional<SentimentClass> winner;
    int best = 0;
    for (std::size_t k = i; k < end; ++k) {
      if (!tags[k].sentiment) continue;
      int count = votes[static_cast<int>(*tags[k].sentiment)];
      if (count > best) {
        best = count;
        winner = tags[k].sentiment;
      }
    }
    out.chunks.push_back(Chunk{i, end, winner});
    i = end;
  }
  return out;
}

std::vector<Chunk> extract_chunks(const TagSequence& seq) {
  std::vector<Chunk> chunks;
  const auto& tags = seq.tags;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag* prev = i == 0 ? nullptr : &tags[i - 1];
    if (starts_chunk(prev, tags[i])) {
      chunks.push_back(Chunk{i, i + 1, tags[i].sentiment});
    } else if (!tags[i].is_outside()) {
      chunks.back().end = i + 1;
    }
  }
  return chunks;
}

std::vector<SentimentClass> ordered_sentiments(const std::vector<SentimentClass>& set) {
  std::vector<SentimentClass> out;
  for (auto s : {SentimentClass::kPositive, SentimentClass::kNegative, SentimentClass::kNeutral}) {
    if (std::find(set.begin(), set.end(), s) != set.end()) out.push_back(s);
  }
  return out;
}

TagSet::TagSet(Scheme scheme, std::vector<SentimentClass> sentiments)
    : scheme_(scheme), sentiments_(ordered_sentiments(sentiments)) {
  labels_.push_back(Tag::O());
  if (scheme == Scheme::kAspect) {
    sentiments_.clear();
    labels_.push_back(Tag::B());
    labels_.push_back(Tag::I());
    return;
  }
  if (sentiments_.empty()) {
    throw std::invalid_argument("collapsed tag set needs at least one sentiment class");
  }
  for (auto s : sentiments_) labels_.push_back(Tag::B(s));
  for (auto s : sentiments_) labels_.push_back(Tag::I(s));
}

std::size_t TagSet::index_of(const Tag& tag) const {
  auto it = std::find(labels_.begin(), labels_.end(), tag);
  if (it == labels_.end()) throw ValidationError("tag " + to_string(tag) + " is not in the tag set");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::size_t> TagSet::encode(const TagSequence& seq) const {
  std::vector<std::size_t> ids;
  ids.reserve(seq.tags.size());
  for (const auto& t : seq.tags) ids.push_back(index_of(t));
  return ids;
}

TagSequence TagSet::decode(const std::vector<std::size_t>& ids) const {
  TagSequence out{scheme_, {}};
  out.tags.reserve(ids.size());
  for (auto id : ids) out.tags.push_back(label(id));
  return out;
}

}  // namespace mmom

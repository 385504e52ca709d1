#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmom/labels.h"

namespace mmom {

struct Token {
  std::string surface;
  std::size_t index = 0;   // position in the sentence
  std::size_t offset = 0;  // byte offset into the source text

  friend bool operator==(const Token&, const Token&) = default;
};

struct TimeSpan {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::optional<TagSequence> gold;
  std::optional<SentimentClass> sentiment;
  std::optional<TimeSpan> time_span;
  std::optional<std::string> media_ref;

  std::vector<std::string> surfaces() const;
  std::string text() const;  // tokens joined by single spaces
};

inline constexpr std::size_t kDefaultMaxLength = 300;

// Whitespace split, then leading/trailing ASCII punctuation is detached.
// A run of one repeated punctuation character ("...", "!!") stays one token.
std::vector<Token> tokenize(std::string_view text);

// Tokens from already-tokenized input, taken verbatim.
std::vector<Token> make_tokens(const std::vector<std::string>& surfaces);

// Keeps the first `max_length` tokens and the matching gold tags.
void trim(Sentence& sentence, std::size_t max_length = kDefaultMaxLength);

class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kPad = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kPadToken = "<pad>";

  Vocabulary();

  std::size_t lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t min_frequency() const { return min_frequency_; }

  // Appends a token if absent; returns its index.
  std::size_t add(const std::string& token);

  // Lowercasing applied on both insertion and lookup.
  static std::string normalize(std::string_view token);

 private:
  friend Vocabulary build_vocab(const std::vector<Sentence>&, std::size_t);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_frequency_ = 1;
};

// Tokens with count >= min_frequency, ordered by (count desc, lexicographic).
Vocabulary build_vocab(const std::vector<Sentence>& training, std::size_t min_frequency = 1);

struct EmbeddingCoverage {
  std::size_t vocab_size = 0;
  std::size_t found = 0;                // |vocab ∩ file|, excluding UNK/PAD
  std::vector<std::string> missing;     // vocab tokens initialized randomly
};

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::size_t rows = 0;
  std::vector<double> matrix;  // rows x dimension, row-major
  bool trainable = true;
  EmbeddingCoverage coverage;

  double at(std::size_t row, std::size_t col) const { return matrix[row * dimension + col]; }
};

inline constexpr double kEmbeddingInitRange = 0.05;

// GloVe text layout: token followed by D numbers per line. Rows of
// vocabulary tokens found in the file are copied verbatim; the rest are drawn
// uniformly from [-0.05, 0.05] with `seed`. PAD is the zero row.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::uint64_t seed = 0);

// Randomly initialized table, N(0, 1) entries, PAD row zero.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dimension,
                                 std::uint64_t seed);

enum class SpanKind { kTarget, kPolarity };

struct SpanAnnotation {
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  SpanKind kind = SpanKind::kTarget;
  std::optional<SentimentClass> polarity;
};

// Each target takes the polarity of the span it overlaps most (ties: the
// earliest polarity span in input order); no overlap means neutral.
std::vector<SentimentClass> assign_polarity_by_overlap(const std::vector<SpanAnnotation>& targets,
                                                       const std::vector<SpanAnnotation>& polarities);

// Keeps sentences whose aspects share one sentiment, or that have no aspect.
// Kept sentences without a sentence-level sentiment receive that sentiment
// (neutral when aspect-free).
std::vector<Sentence> filter_single_sentiment(const std::vector<Sentence>& sentences);

enum class DatasetFormat { kConll, kJsonl };

std::optional<DatasetFormat> parse_format(std::string_view name);

// Tags are validated in strict mode unless told otherwise (prediction files
// are read leniently). If any sentence uses sentiment-bearing tags the whole
// dataset is read as Collapsed.
std::vector<Sentence> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                   Validation mode = Validation::kStrict);
std::vector<Sentence> parse_jsonl(std::string_view content, const std::string& source = "<memory>",
                                  Validation mode = Validation::kStrict);
std::vector<Sentence> parse_conll(std::string_view content, const std::string& source = "<memory>",
                                  Validation mode = Validation::kStrict);

void save_dataset(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                  DatasetFormat format);
std::string to_jsonl(const std::vector<Sentence>& sentences);
std::string to_conll(const std::vector<Sentence>& sentences);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mmom

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmom/labels.h"

namespace mmom {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0 when the denominator is empty, so an empty prediction set has P = 0.
Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold);

struct ChunkScore {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  Prf prf() const { return prf_from_counts(correct, predicted, gold); }
};

// conlleval-style chunk scoring: a predicted chunk is correct on exact
// (start, end) match, and matching sentiment when `with_sentiment`.
// Predictions are repaired leniently before chunking; gold is taken as is.
ChunkScore evaluate_chunks(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred,
                           bool with_sentiment);

struct ClassCounts {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

struct SentimentScore {
  std::map<SentimentClass, ClassCounts> counts;  // all three classes present
  std::size_t items = 0;                         // sentence-level only
  std::size_t items_correct = 0;

  Prf class_prf(SentimentClass c) const;
  // Mean over classes with non-zero gold or predicted support; nullopt if none.
  std::optional<Prf> macro() const;
  std::optional<double> accuracy() const;
};

// Sentence-level classification: one gold and one predicted class per item.
SentimentScore evaluate_sentence_sentiment(const std::vector<SentimentClass>& gold,
                                           const std::vector<SentimentClass>& pred);

// Chunk-level classification from collapsed sequences: gold and predicted
// chunks come from decouple(); a predicted chunk counts as correct for its
// class when a gold chunk with the same span has the same sentiment.
SentimentScore evaluate_chunk_sentiment(const std::vector<TagSequence>& gold,
                                        const std::vector<TagSequence>& pred);

// Sentence class read off collapsed tags: majority over decoupled chunk
// sentiments, ties to the earliest chunk; neutral without chunks.
SentimentClass sentence_sentiment_from_tags(const TagSequence& collapsed);

struct MetricsReport {
  Prf ae;
  ChunkScore ae_counts;
  std::optional<Prf> collapsed;  // chunks with sentiment, collapsed settings
  std::optional<SentimentScore> sentiment;

  nlohmann::json to_json() const;
};

// Mean of each reported number over runs; per-class entries average the runs
// that report them.
nlohmann::json mean_report_json(const std::vector<MetricsReport>& runs);

// conlleval's printed form of a ratio: percentage with two decimals.
std::string conlleval_percent(double ratio);

}  // namespace mmom

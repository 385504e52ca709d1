#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmom/ingest.h"

namespace mmom {

struct SubtitleChunk {
  int counter = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string text;  // text lines joined by single spaces

  friend bool operator==(const SubtitleChunk&, const SubtitleChunk&) = default;
};

// SubRip grammar: counter line, "HH:MM:SS,mmm --> HH:MM:SS,mmm", one or more
// text lines, blank line. A UTF-8 BOM and CRLF line endings are accepted.
std::vector<SubtitleChunk> parse_srt(std::string_view content, const std::string& source = "<memory>");
std::vector<SubtitleChunk> parse_srt_file(const std::filesystem::path& path);
std::string emit_srt(const std::vector<SubtitleChunk>& chunks);

std::string format_srt_time(std::int64_t ms);
// Parses "HH:MM:SS,mmm"; nullopt on any deviation.
std::optional<std::int64_t> parse_srt_time(std::string_view text);

// Lowercase, strip ASCII punctuation, collapse whitespace, trim.
std::string normalize_for_matching(std::string_view text);

// Edit distance over Unicode code points (UTF-8 decoded).
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::u32string decode_utf8(std::string_view text);

// 1 - levenshtein(a', b') / max(|a'|, |b'|) over normalized forms; 1 for two
// empty strings.
double similarity(std::string_view a, std::string_view b);

struct AlignOptions {
  double threshold = 0.90;
  std::size_t window = 4;  // longest run of consecutive chunks tried as one text
};

struct AlignmentResult {
  std::string sentence_id;
  std::vector<int> matched_chunk_counters;  // sorted by chunk start time
  std::optional<TimeSpan> span;
  double best_similarity = 0.0;

  bool matched() const { return span.has_value(); }
};

// Every chunk whose similarity to the sentence exceeds the threshold (or
// matches exactly) is associated. When no single chunk dominates, the best
// run of 2..window consecutive chunks is associated if it clears the
// threshold. The span runs from the earliest start to the latest end.
std::vector<AlignmentResult> align(const std::vector<Sentence>& sentences,
                                   const std::vector<SubtitleChunk>& chunks,
                                   const AlignOptions& options = {});

std::string to_jsonl(const std::vector<AlignmentResult>& results);

// Copies matched spans into the sentences (by id). Returns how many were set.
std::size_t apply_alignment(std::vector<Sentence>& sentences,
                            const std::vector<AlignmentResult>& results);

}  // namespace mmom

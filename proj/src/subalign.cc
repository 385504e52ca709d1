#include "mmom/subalign.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <set>

#include "json.hpp"
#include "mmom/errors.h"

namespace mmom {

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s, std::size_t n) {
  if (s.size() != n) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::int64_t to_int(std::string_view s) {
  std::int64_t v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

}  // namespace

std::optional<std::int64_t> parse_srt_time(std::string_view text) {
  // H+:MM:SS,mmm
  auto c1 = text.find(':');
  if (c1 == std::string_view::npos || c1 == 0) return std::nullopt;
  auto hours = text.substr(0, c1);
  if (!std::all_of(hours.begin(), hours.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  auto rest = text.substr(c1 + 1);
  if (rest.size() != 9 || rest[2] != ':' || rest[5] != ',') return std::nullopt;
  auto mm = rest.substr(0, 2), ss = rest.substr(3, 2), ms = rest.substr(6, 3);
  if (!all_digits(mm, 2) || !all_digits(ss, 2) || !all_digits(ms, 3)) return std::nullopt;
  std::int64_t m = to_int(mm), s = to_int(ss);
  if (m > 59 || s > 59) return std::nullopt;
  return to_int(hours) * 3600000 + m * 60000 + s * 1000 + to_int(ms);
}

std::string format_srt_time(std::int64_t ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld,%03lld", static_cast<long long>(ms / 3600000),
                static_cast<long long>(ms / 60000 % 60), static_cast<long long>(ms / 1000 % 60),
                static_cast<long long>(ms % 1000));
  return buf;
}

std::vector<SubtitleChunk> parse_srt(std::string_view content, const std::string& source) {
  if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);

  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }

  std::vector<SubtitleChunk> chunks;
  std::size_t i = 0;
  auto fail = [&](const std::string& what, std::size_t line_index, const std::string& counter) {
    throw ValidationError(source + ":" + std::to_string(line_index + 1) + ": chunk " + counter +
                          ": " + what);
  };

  while (i < lines.size()) {
    if (trim_view(lines[i]).empty()) {
      ++i;
      continue;
    }
    std::string_view counter_text = trim_view(lines[i]);
    std::string counter_label(counter_text);
    if (!std::all_of(counter_text.begin(), counter_text.end(),
                     [](char c) { return c >= '0' && c <= '9'; })) {
      fail("expected a numeric counter, found '" + counter_label + "'", i, "?");
    }
    SubtitleChunk chunk;
    chunk.counter = static_cast<int>(to_int(counter_text));
    if (chunk.counter < 1) fail("counter must be at least 1", i, counter_label);
    ++i;

    if (i >= lines.size()) fail("missing time line", i - 1, counter_label);
    std::string_view times = trim_view(lines[i]);
    auto arrow = times.find("-->");
    if (arrow == std::string_view::npos) fail("missing '-->' separator", i, counter_label);
    auto start = parse_srt_time(trim_view(times.substr(0, arrow)));
    // Anything after the end time (positioning hints) is ignored.
    std::string_view after = trim_view(times.substr(arrow + 3));
    auto end = parse_srt_time(after.substr(0, after.find(' ')));
    if (!start || !end) fail("malformed timestamp '" + std::string(times) + "'", i, counter_label);
    if (*start >= *end) fail("start time is not before end time", i, counter_label);
    chunk.start_ms = *start;
    chunk.end_ms = *end;
    ++i;

    std::string text;
    while (i < lines.size() && !trim_view(lines[i]).empty()) {
      if (!text.empty()) text += ' ';
      text += trim_view(lines[i]);
      ++i;
    }
    chunk.text = std::move(text);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<SubtitleChunk> parse_srt_file(const std::filesystem::path& path) {
  return parse_srt(read_file(path), path.string());
}

std::string emit_srt(const std::vector<SubtitleChunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    out += std::to_string(c.counter) + "\n";
    out += format_srt_time(c.start_ms) + " --> " + format_srt_time(c.end_ms) + "\n";
    out += c.text + "\n\n";
  }
  return out;
}

std::string normalize_for_matching(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      pending_space = !out.empty();
    } else if (std::ispunct(u)) {
      continue;
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(u));
    }
  }
  return out;
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto b = static_cast<unsigned char>(text[i]);
    int extra = b < 0x80 ? 0 : (b >> 5) == 0x6 ? 1 : (b >> 4) == 0xE ? 2 : (b >> 3) == 0x1E ? 3 : -1;
    if (extra < 0 || i + static_cast<std::size_t>(extra) >= text.size()) {
      // Invalid lead byte or truncated sequence: keep the byte as-is.
      out.push_back(b);
      ++i;
      continue;
    }
    char32_t cp = extra == 0 ? b : extra == 1 ? (b & 0x1F) : extra == 2 ? (b & 0x0F) : (b & 0x07);
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    if (!ok) {
      out.push_back(b);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

namespace {

double normalized_similarity(const std::u32string& a, const std::u32string& b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

// Similarity can never exceed 1 - |la - lb| / max(la, lb).
double length_bound(std::size_t la, std::size_t lb) {
  std::size_t longest = std::max(la, lb);
  if (longest == 0) return 1.0;
  std::size_t diff = la > lb ? la - lb : lb - la;
  return 1.0 - static_cast<double>(diff) / static_cast<double>(longest);
}

}  // namespace

double similarity(std::string_view a, std::string_view b) {
  return normalized_similarity(decode_utf8(normalize_for_matching(a)),
                               decode_utf8(normalize_for_matching(b)));
}

std::vector<AlignmentResult> align(const std::vector<Sentence>& sentences,
                                   const std::vector<SubtitleChunk>& chunks,
                                   const AlignOptions& options) {
  std::vector<std::u32string> chunk_text;
  chunk_text.reserve(chunks.size());
  for (const auto& c : chunks) chunk_text.push_back(decode_utf8(normalize_for_matching(c.text)));

  auto accepted = [&](double sim) { return sim > options.threshold || sim == 1.0; };

  std::vector<AlignmentResult> results;
  results.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    AlignmentResult result;
    result.sentence_id = sentence.id;
    std::u32string target = decode_utf8(normalize_for_matching(sentence.text()));

    std::set<std::size_t> matched;
    double best_single = 0.0;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      double sim = normalized_similarity(target, chunk_text[c]);
      best_single = std::max(best_single, sim);
      if (accepted(sim)) matched.insert(c);
    }

    double best_window = 0.0;
    std::size_t window_start = 0, window_len = 0;
    for (std::size_t len = 2; len <= options.window; ++len) {
      for (std::size_t start = 0; start + len <= chunks.size(); ++start) {
        std::u32string joined = chunk_text[start];
        for (std::size_t k = start + 1; k < start + len; ++k) {
          if (!joined.empty() && !chunk_text[k].empty()) joined += U' ';
          joined += chunk_text[k];
        }
        if (length_bound(target.size(), joined.size()) <= best_window) continue;
        double sim = normalized_similarity(target, joined);
        if (sim > best_window) {
          best_window = sim;
          window_start = start;
          window_len = len;
        }
      }
    }
    if (window_len > 0 && accepted(best_window) && best_window > best_single) {
      for (std::size_t k = window_start; k < window_start + window_len; ++k) matched.insert(k);
    }
    result.best_similarity = std::max(best_single, best_window);

    if (!matched.empty()) {
      std::vector<std::size_t> order(matched.begin(), matched.end());
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunks[a].start_ms < chunks[b].start_ms;
      });
      TimeSpan span{chunks[order.front()].start_ms, chunks[order.front()].end_ms};
      for (auto c : order) {
        span.start_ms = std::min(span.start_ms, chunks[c].start_ms);
        span.end_ms = std::max(span.end_ms, chunks[c].end_ms);
        result.matched_chunk_counters.push_back(chunks[c].counter);
      }
      result.span = span;
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::string to_jsonl(const std::vector<AlignmentResult>& results) {
  std::string out;
  for (const auto& r : results) {
    nlohmann::json j;
    j["sentence_id"] = r.sentence_id;
    j["matched_chunk_counters"] = r.matched_chunk_counters;
    j["best_similarity"] = r.best_similarity;
    if (r.span) {
      j["start_ms"] = r.span->start_ms;
      j["end_ms"] = r.span->end_ms;
    } else {
      j["start_ms"] = nullptr;
      j["end_ms"] = nullptr;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::size_t apply_alignment(std::vector<Sentence>& sentences,
                            const std::vector<AlignmentResult>& results) {
  std::size_t applied = 0;
  for (const auto& r : results) {
    if (!r.span) continue;
    for (auto& s : sentences) {
      if (s.id == r.sentence_id) {
        s.time_span = r.span;
        ++applied;
      }
    }
  }
  return applied;
}

}  // namespace mmom

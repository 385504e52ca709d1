#include "mmom/ingest.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mmom/errors.h"

namespace mmom {

using nlohmann::json;

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::string Sentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    out.push_back(Token{std::string(text.substr(begin, end - begin)), out.size(), begin});
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    std::size_t end = i;
    if (begin == end) break;

    // Leading punctuation runs.
    while (begin < end && is_punct(text[begin])) {
      std::size_t run = begin + 1;
      while (run < end && text[run] == text[begin]) ++run;
      emit(begin, run);
      begin = run;
    }
    // Trailing punctuation runs, collected right to left.
    std::vector<std::pair<std::size_t, std::size_t>> tail;
    while (end > begin && is_punct(text[end - 1])) {
      std::size_t run = end - 1;
      while (run > begin && text[run - 1] == text[end - 1]) --run;
      tail.emplace_back(run, end);
      end = run;
    }
    if (begin < end) emit(begin, end);
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) emit(it->first, it->second);
  }
  return out;
}

std::vector<Token> make_tokens(const std::vector<std::string>& surfaces) {
  std::vector<Token> out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (surfaces[i].empty()) throw ValidationError("empty token at index " + std::to_string(i));
    out.push_back(Token{surfaces[i], i, offset});
    offset += surfaces[i].size() + 1;
  }
  return out;
}

void trim(Sentence& sentence, std::size_t max_length) {
  if (sentence.tokens.size() <= max_length) return;
  sentence.tokens.resize(max_length);
  if (sentence.gold) sentence.gold->tags.resize(max_length);
}

Vocabulary::Vocabulary() {
  add(std::string(kUnkToken));
  add(std::string(kPadToken));
}

std::string Vocabulary::normalize(std::string_view token) {
  std::string out(token);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t Vocabulary::add(const std::string& token) {
  auto key = (token == kUnkToken || token == kPadToken) ? token : normalize(token);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  tokens_.push_back(key);
  index_.emplace(key, tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(normalize(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(normalize(token)) > 0;
}

Vocabulary build_vocab(const std::vector<Sentence>& training, std::size_t min_frequency) {
  if (training.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : training) {
    for (const auto& t : s.tokens) ++counts[Vocabulary::normalize(t.surface)];
  }
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort on count keeps it.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  vocab.min_frequency_ = min_frequency;
  for (const auto& [token, count] : entries) {
    if (count >= min_frequency) vocab.add(token);
  }
  return vocab;
}

namespace {

double parse_number(std::string_view field, const std::string& where) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError(where + ": cannot parse number '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t b = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (b < i) out.push_back(line.substr(b, i - b));
  }
  return out;
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file " + path.string());

  EmbeddingTable table;
  table.rows = vocab.size();
  std::vector<bool> filled(vocab.size(), false);
  std::vector<std::vector<double>> found(vocab.size());

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);
    std::size_t dim = fields.size() - 1;
    if (dim == 0) throw ValidationError(where + ": line has no vector");
    if (table.dimension == 0) {
      table.dimension = dim;
    } else if (dim != table.dimension) {
      throw ValidationError(where + ": expected " + std::to_string(table.dimension) +
                            " values, found " + std::to_string(dim));
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) values[k] = parse_number(fields[k + 1], where);

    std::string key = Vocabulary::normalize(fields[0]);
    if (!vocab.contains(key)) continue;
    std::size_t row = vocab.lookup(key);
    if (row == Vocabulary::kUnk || row == Vocabulary::kPad || filled[row]) continue;
    filled[row] = true;
    found[row] = std::move(values);
  }
  if (table.dimension == 0) throw ValidationError(path.string() + ": no vectors");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-kEmbeddingInitRange, kEmbeddingInitRange);
  table.matrix.assign(table.rows * table.dimension, 0.0);
  table.coverage.vocab_size = vocab.size();
  for (std::size_t r = 0; r < table.rows; ++r) {
    double* row = table.matrix.data() + r * table.dimension;
    if (r == Vocabulary::kPad) continue;
    if (filled[r]) {
      std::copy(found[r].begin(), found[r].end(), row);
      ++table.coverage.found;
    } else {
      for (std::size_t k = 0; k < table.dimension; ++k) row[k] = init(rng);
      if (r != Vocabulary::kUnk) table.coverage.missing.push_back(vocab.token(r));
    }
  }
  return table;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dimension,
                                 std::uint64_t seed) {
  EmbeddingTable table;
  table.dimension = dimension;
  table.rows = vocab.size();
  table.matrix.assign(table.rows * dimension, 0.0);
  table.coverage.vocab_size = vocab.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 1.0);
  for (std::size_t r = 0; r < table.rows; ++r) {
    if (r == Vocabulary::kPad) continue;
    for (std::size_t k = 0; k < dimension; ++k) table.matrix[r * dimension + k] = init(rng);
  }
  return table;
}

std::vector<SentimentClass> assign_polarity_by_overlap(
    const std::vector<SpanAnnotation>& targets, const std::vector<SpanAnnotation>& polarities) {
  std::vector<SentimentClass> out;
  out.reserve(targets.size());
  for (const auto& target : targets) {
    std::size_t best = 0;
    SentimentClass label = SentimentClass::kNeutral;
    for (const auto& pol : polarities) {
      std::size_t lo = std::max(target.start_char, pol.start_char);
      std::size_t hi = std::min(target.end_char, pol.end_char);
      std::size_t overlap = hi > lo ? hi - lo : 0;
      if (overlap > best && pol.polarity) {
        best = overlap;
        label = *pol.polarity;
      }
    }
    out.push_back(label);
  }
  return out;
}

std::vector<Sentence> filter_single_sentiment(const std::vector<Sentence>& sentences) {
  std::vector<Sentence> kept;
  for (const auto& s : sentences) {
    if (!s.gold) throw ValidationError("sentence " + s.id + " has no gold tags");
    std::set<SentimentClass> seen;
    for (const auto& t : s.gold->tags) {
      if (t.sentiment) seen.insert(*t.sentiment);
    }
    if (seen.size() > 1) continue;
    Sentence copy = s;
    if (!copy.sentiment) copy.sentiment = seen.empty() ? SentimentClass::kNeutral : *seen.begin();
    kept.push_back(std::move(copy));
  }
  return kept;
}

std::optional<DatasetFormat> parse_format(std::string_view name) {
  if (name == "conll") return DatasetFormat::kConll;
  if (name == "jsonl") return DatasetFormat::kJsonl;
  return std::nullopt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

namespace {

// Parses tag strings and validates them. Sentences whose tags carry
// sentiments make the dataset collapsed; all-O sentences are compatible.
// `where` holds the source:line each sentence starts at.
void finish_dataset(std::vector<Sentence>& sentences, const std::vector<std::vector<std::string>>& raw_tags,
                    const std::vector<std::string>& where, Validation mode) {
  bool collapsed = false;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    if (raw_tags[k].empty()) continue;
    std::vector<Tag> tags;
    for (std::size_t i = 0; i < raw_tags[k].size(); ++i) {
      auto tag = parse_tag(raw_tags[k][i]);
      if (!tag) {
        throw ValidationError(where[k] + ": sentence " + sentences[k].id + ": unknown tag '" + raw_tags[k][i] +
                              "' at index " + std::to_string(i));
      }
      if (tag->sentiment) collapsed = true;
      tags.push_back(*tag);
    }
    sentences[k].gold = TagSequence{Scheme::kAspect, std::move(tags)};
  }
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    auto& s = sentences[k];
    if (!s.gold) continue;
    if (collapsed) s.gold->scheme = Scheme::kCollapsed;
    if (s.gold->tags.size() != s.tokens.size()) {
      throw ValidationError(where[k] + ": sentence " + s.id + ": " + std::to_string(s.tokens.size()) +
                            " tokens but " + std::to_string(s.gold->tags.size()) + " tags");
    }
    try {
      validate(*s.gold, mode);
    } catch (const ValidationError& e) {
      throw ValidationError(where[k] + ": sentence " + s.id + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<Sentence> parse_jsonl(std::string_view content, const std::string& source, Validation mode) {
  std::vector<Sentence> out;
  std::vector<std::vector<std::string>> raw_tags;
  std::vector<std::string> starts;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (split_ws(line).empty()) continue;
    std::string where = source + ":" + std::to_string(line_no);
    try {
      json j = json::parse(line);
      Sentence s;
      s.id = j.contains("id") ? j.at("id").get<std::string>() : std::to_string(out.size());
      if (j.contains("tokens")) {
        s.tokens = make_tokens(j.at("tokens").get<std::vector<std::string>>());
      } else if (j.contains("text")) {
        s.tokens = tokenize(j.at("text").get<std::string>());
      } else {
        throw ValidationError("record has neither tokens nor text");
      }
      std::vector<std::string> tags;
      if (j.contains("tags") && !j.at("tags").is_null()) {
        tags = j.at("tags").get<std::vector<std::string>>();
        if (tags.empty() && !s.tokens.empty()) throw ValidationError("empty tags array");
      }
      if (j.contains("sentiment") && !j.at("sentiment").is_null()) {
        auto text = j.at("sentiment").get<std::string>();
        s.sentiment = parse_sentiment(text);
        if (!s.sentiment) throw ValidationError("unknown sentiment '" + text + "'");
      }
      bool has_start = j.contains("start_ms") && !j.at("start_ms").is_null();
      bool has_end = j.contains("end_ms") && !j.at("end_ms").is_null();
      if (has_start != has_end) throw ValidationError("start_ms and end_ms must come together");
      if (has_start) {
        TimeSpan span{j.at("start_ms").get<std::int64_t>(), j.at("end_ms").get<std::int64_t>()};
        if (span.start_ms >= span.end_ms) throw ValidationError("start_ms must precede end_ms");
        s.time_span = span;
      }
      if (j.contains("media_ref") && !j.at("media_ref").is_null()) {
        s.media_ref = j.at("media_ref").get<std::string>();
      }
      out.push_back(std::move(s));
      raw_tags.push_back(std::move(tags));
      starts.push_back(where);
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  finish_dataset(out, raw_tags, starts, mode);
  return out;
}

std::vector<Sentence> parse_conll(std::string_view content, const std::string& source, Validation mode) {
  std::vector<Sentence> out;
  std::vector<std::vector<std::string>> raw_tags;
  Sentence current;
  std::vector<std::string> surfaces;
  std::vector<std::string> tags;
  std::vector<std::string> starts;
  std::string start_where;
  bool open = false;

  auto flush = [&]() {
    if (!open) return;
    if (current.id.empty()) current.id = std::to_string(out.size());
    current.tokens = make_tokens(surfaces);
    out.push_back(std::move(current));
    raw_tags.push_back(std::move(tags));
    starts.push_back(start_where);
    current = Sentence{};
    surfaces.clear();
    tags.clear();
    open = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string where = source + ":" + std::to_string(line_no);

    if (line.empty()) {
      flush();
      continue;
    }
    if (!open || line.starts_with("# id:")) start_where = where;
    if (line.starts_with("# id:")) {
      flush();
      current.id = std::string(line.substr(5));
      open = true;
      continue;
    }
    if (line.starts_with("# sentiment:")) {
      auto s = parse_sentiment(line.substr(12));
      if (!s) throw ValidationError(where + ": unknown sentiment '" + std::string(line.substr(12)) + "'");
      current.sentiment = s;
      open = true;
      continue;
    }
    if (line.starts_with("#")) continue;
    auto space = line.rfind(' ');
    if (space == std::string_view::npos || space == 0 || space + 1 == line.size()) {
      throw ValidationError(where + ": expected 'TOKEN TAG'");
    }
    surfaces.emplace_back(line.substr(0, space));
    tags.emplace_back(line.substr(space + 1));
    open = true;
  }
  flush();
  finish_dataset(out, raw_tags, starts, mode);
  return out;
}

std::vector<Sentence> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                   Validation mode) {
  std::string content = read_file(path);
  return format == DatasetFormat::kJsonl ? parse_jsonl(content, path.string(), mode)
                                         : parse_conll(content, path.string(), mode);
}

std::string to_jsonl(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    json j;
    j["id"] = s.id;
    j["tokens"] = s.surfaces();
    if (s.gold) {
      std::vector<std::string> tags;
      for (const auto& t : s.gold->tags) tags.push_back(to_string(t));
      j["tags"] = tags;
    }
    if (s.sentiment) j["sentiment"] = to_string(*s.sentiment);
    if (s.time_span) {
      j["start_ms"] = s.time_span->start_ms;
      j["end_ms"] = s.time_span->end_ms;
    }
    if (s.media_ref) j["media_ref"] = *s.media_ref;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string to_conll(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += "# id:" + s.id + "\n";
    if (s.sentiment) out += "# sentiment:" + to_string(*s.sentiment) + "\n";
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].surface;
      out += ' ';
      out += s.gold ? to_string(s.gold->tags[i]) : "O";
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                  DatasetFormat format) {
  write_file(path, format == DatasetFormat::kJsonl ? to_jsonl(sentences) : to_conll(sentences));
}

}  // namespace mmom

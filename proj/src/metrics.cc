#include "mmom/metrics.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <tuple>

#include "mmom/errors.h"

namespace mmom {

namespace {

constexpr std::array<SentimentClass, 3> kClasses = {SentimentClass::kPositive, SentimentClass::kNegative,
                                                     SentimentClass::kNeutral};

std::map<SentimentClass, ClassCounts> empty_counts() {
  std::map<SentimentClass, ClassCounts> m;
  for (auto c : kClasses) m[c] = {};
  return m;
}

void check_aligned(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred) {
  if (gold.size() != pred.size()) {
    throw ValidationError("evaluation: " + std::to_string(gold.size()) + " gold sequences vs " +
                          std::to_string(pred.size()) + " predicted");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw ValidationError("evaluation: sentence " + std::to_string(i) + " has " +
                            std::to_string(gold[i].size()) + " gold tags but " +
                            std::to_string(pred[i].size()) + " predicted");
    }
  }
}

using ChunkKey = std::tuple<std::size_t, std::size_t, int>;

std::set<ChunkKey> chunk_keys(const std::vector<Chunk>& chunks, bool with_sentiment) {
  std::set<ChunkKey> keys;
  for (const auto& c : chunks) {
    int s = (with_sentiment && c.sentiment) ? static_cast<int>(*c.sentiment) : -1;
    keys.emplace(c.start, c.end, s);
  }
  return keys;
}

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf p;
  if (predicted > 0) p.precision = static_cast<double>(correct) / static_cast<double>(predicted);
  if (gold > 0) p.recall = static_cast<double>(correct) / static_cast<double>(gold);
  if (p.precision + p.recall > 0.0) p.f1 = 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

ChunkScore evaluate_chunks(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred,
                           bool with_sentiment) {
  check_aligned(gold, pred);
  ChunkScore score;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = chunk_keys(extract_chunks(gold[i]), with_sentiment);
    auto p = chunk_keys(extract_chunks(repair(pred[i])), with_sentiment);
    score.gold += g.size();
    score.predicted += p.size();
    for (const auto& key : p) score.correct += g.count(key);
  }
  return score;
}

Prf SentimentScore::class_prf(SentimentClass c) const {
  auto it = counts.find(c);
  if (it == counts.end()) return {};
  return prf_from_counts(it->second.correct, it->second.predicted, it->second.gold);
}

std::optional<Prf> SentimentScore::macro() const {
  Prf sum;
  std::size_t used = 0;
  for (const auto& [c, n] : counts) {
    if (n.gold == 0 && n.predicted == 0) continue;
    Prf p = class_prf(c);
    sum.precision += p.precision;
    sum.recall += p.recall;
    sum.f1 += p.f1;
    ++used;
  }
  if (used == 0) return std::nullopt;
  const double k = static_cast<double>(used);
  return Prf{sum.precision / k, sum.recall / k, sum.f1 / k};
}

std::optional<double> SentimentScore::accuracy() const {
  if (items == 0) return std::nullopt;
  return static_cast<double>(items_correct) / static_cast<double>(items);
}

SentimentScore evaluate_sentence_sentiment(const std::vector<SentimentClass>& gold,
                                           const std::vector<SentimentClass>& pred) {
  if (gold.size() != pred.size()) {
    throw ValidationError("evaluation: " + std::to_string(gold.size()) + " gold labels vs " +
                          std::to_string(pred.size()) + " predicted");
  }
  SentimentScore s;
  s.counts = empty_counts();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++s.counts[gold[i]].gold;
    ++s.counts[pred[i]].predicted;
    if (gold[i] == pred[i]) {
      ++s.counts[gold[i]].correct;
      ++s.items_correct;
    }
  }
  s.items = gold.size();
  return s;
}

SentimentScore evaluate_chunk_sentiment(const std::vector<TagSequence>& gold,
                                        const std::vector<TagSequence>& pred) {
  check_aligned(gold, pred);
  SentimentScore s;
  s.counts = empty_counts();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = decouple(gold[i]).chunks;
    auto p = decouple(repair(pred[i])).chunks;
    for (const auto& c : g) {
      if (c.sentiment) ++s.counts[*c.sentiment].gold;
    }
    for (const auto& c : p) {
      if (!c.sentiment) continue;
      ++s.counts[*c.sentiment].predicted;
      bool hit = std::any_of(g.begin(), g.end(), [&](const Chunk& x) { return x == c; });
      if (hit) ++s.counts[*c.sentiment].correct;
    }
  }
  return s;
}

SentimentClass sentence_sentiment_from_tags(const TagSequence& collapsed) {
  auto chunks = decouple(repair(collapsed)).chunks;
  std::map<SentimentClass, std::size_t> votes;
  std::optional<SentimentClass> best;
  for (const auto& c : chunks) {
    if (!c.sentiment) continue;
    std::size_t n = ++votes[*c.sentiment];
    if (!best || n > votes[*best]) best = *c.sentiment;
  }
  return best.value_or(SentimentClass::kNeutral);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["ae_precision"] = ae.precision;
  j["ae_recall"] = ae.recall;
  j["ae_f1"] = ae.f1;
  j["ae_counts"] = {{"correct", ae_counts.correct}, {"predicted", ae_counts.predicted}, {"gold", ae_counts.gold}};
  if (collapsed) j["collapsed"] = prf_json(*collapsed);
  if (sentiment) {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [c, n] : sentiment->counts) {
      auto entry = prf_json(sentiment->class_prf(c));
      entry["gold"] = n.gold;
      entry["predicted"] = n.predicted;
      entry["correct"] = n.correct;
      classes[to_string(c)] = entry;
    }
    j["sentiment"] = classes;
    if (auto m = sentiment->macro()) j["sentiment_macro"] = prf_json(*m);
    if (auto a = sentiment->accuracy()) j["sentiment_accuracy"] = *a;
  }
  return j;
}

nlohmann::json mean_report_json(const std::vector<MetricsReport>& runs) {
  nlohmann::json out = nlohmann::json::object();
  if (runs.empty()) return out;
  // Average every numeric leaf that appears, over the runs that have it.
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& r : runs) {
    auto flat = r.to_json().flatten();
    for (auto it = flat.begin(); it != flat.end(); ++it) {
      if (!it.value().is_number()) continue;
      auto& [s, n] = sums[it.key()];
      s += it.value().get<double>();
      ++n;
    }
  }
  nlohmann::json flat = nlohmann::json::object();
  for (const auto& [key, sn] : sums) flat[key] = sn.first / static_cast<double>(sn.second);
  return flat.unflatten();
}

std::string conlleval_percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * ratio);
  return buf;
}

}  // namespace mmom

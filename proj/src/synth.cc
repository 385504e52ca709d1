#include "mmom/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "mmom/errors.h"

namespace mmom {

namespace {

constexpr std::array<const char*, 6> kSingleAspects = {"battery", "screen", "camera",
                                                       "speaker", "keyboard", "price"};
constexpr std::array<std::array<const char*, 2>, 4> kDoubleAspects = {
    {{"sound", "quality"}, {"battery", "life"}, {"build", "quality"}, {"color", "saturation"}}};
constexpr std::array<const char*, 3> kPositive = {"great", "excellent", "amazing"};
constexpr std::array<const char*, 3> kNegative = {"terrible", "awful", "poor"};
constexpr std::array<const char*, 3> kNeutral = {"okay", "average", "standard"};
constexpr std::array<const char*, 3> kFiller = {"shown", "here", "visible"};
constexpr std::array<SentimentClass, 3> kClasses = {SentimentClass::kPositive, SentimentClass::kNegative,
                                                    SentimentClass::kNeutral};

template <typename T, std::size_t N>
const T& pick(const std::array<T, N>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

const char* opinion_word(SentimentClass s, std::mt19937_64& rng) {
  switch (s) {
    case SentimentClass::kPositive: return pick(kPositive, rng);
    case SentimentClass::kNegative: return pick(kNegative, rng);
    case SentimentClass::kNeutral: break;
  }
  return pick(kNeutral, rng);
}

struct Builder {
  std::vector<std::string> words;
  std::vector<Tag> tags;

  void plain(const std::string& w) {
    words.push_back(w);
    tags.push_back(Tag::O());
  }
  void aspect(const std::vector<std::string>& ws, std::optional<SentimentClass> s) {
    for (std::size_t k = 0; k < ws.size(); ++k) {
      words.push_back(ws[k]);
      tags.push_back(k == 0 ? Tag::B(s) : Tag::I(s));
    }
  }
};

}  // namespace

double synth_tone_hz(SentimentClass s) {
  switch (s) {
    case SentimentClass::kPositive: return 440.0;
    case SentimentClass::kNegative: return 1320.0;
    case SentimentClass::kNeutral: break;
  }
  return 2640.0;
}

SynthData make_synth(const SynthOptions& options) {
  if (options.sentences == 0) throw ValidationError("synth: need at least one sentence");
  if (options.sample_rate_hz <= 0 || options.video_fps <= 0.0 || options.video_dim == 0) {
    throw ValidationError("synth: sample rate, frame rate and video dimension must be positive");
  }
  if (options.sentence_ms <= 0 || options.gap_ms < 0) throw ValidationError("synth: bad sentence timing");

  std::mt19937_64 rng(options.seed);
  SynthData data;
  const std::int64_t stride = options.sentence_ms + options.gap_ms;

  int counter = 1;
  for (std::size_t i = 0; i < options.sentences; ++i) {
    const SentimentClass cls = kClasses[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
    const std::size_t pattern = i % 3;
    const std::optional<SentimentClass> tag_sent =
        options.modal_only ? std::nullopt : std::optional<SentimentClass>(cls);
    std::string cue = options.modal_only ? pick(kFiller, rng) : opinion_word(cls, rng);

    // A random clip name keeps sentences far apart for the aligner.
    std::string name(8, 'a');
    for (auto& ch : name) ch = static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
    Builder b;
    b.plain("clip");
    b.plain(name);
    if (pattern == 0) {
      b.plain("the");
      b.aspect({pick(kSingleAspects, rng)}, tag_sent);
      b.plain("is");
      b.plain(cue);
      b.plain(".");
    } else if (pattern == 1) {
      const auto& two = pick(kDoubleAspects, rng);
      b.plain("i");
      b.plain("found");
      b.plain("the");
      b.aspect({two[0], two[1]}, tag_sent);
      b.plain(cue);
    } else {
      std::string first = pick(kSingleAspects, rng);
      std::string second = pick(kSingleAspects, rng);
      while (second == first) second = pick(kSingleAspects, rng);
      b.plain("the");
      b.aspect({first}, tag_sent);
      b.plain("and");
      b.plain("the");
      b.aspect({second}, tag_sent);
      b.plain("are");
      b.plain(cue);
    }

    Sentence s;
    char id[16];
    std::snprintf(id, sizeof id, "s%03zu", i + 1);
    s.id = id;
    s.tokens = make_tokens(b.words);
    s.gold = options.modal_only ? aspect_sequence(b.tags) : collapsed_sequence(b.tags);
    s.sentiment = cls;
    const std::int64_t start = options.gap_ms + static_cast<std::int64_t>(i) * stride;
    s.time_span = TimeSpan{start, start + options.sentence_ms};
    s.media_ref = "synth";
    data.sentences.push_back(s);

    // Every fifth sentence is split over two subtitle chunks.
    const std::string text = s.text();
    if (i % 5 == 4 && s.tokens.size() >= 2) {
      const std::size_t half = s.tokens.size() / 2;
      std::string left, right;
      for (std::size_t k = 0; k < s.tokens.size(); ++k) {
        std::string& dst = k < half ? left : right;
        if (!dst.empty()) dst += " ";
        dst += s.tokens[k].surface;
      }
      const std::int64_t mid = start + options.sentence_ms / 2;
      data.subtitles.push_back({counter++, start, mid, left});
      data.subtitles.push_back({counter++, mid, start + options.sentence_ms, right});
    } else {
      data.subtitles.push_back({counter++, start, start + options.sentence_ms, text});
    }
  }

  const std::int64_t total_ms = options.gap_ms + static_cast<std::int64_t>(options.sentences) * stride;
  const double rate = options.sample_rate_hz;
  data.audio.sample_rate_hz = options.sample_rate_hz;
  data.audio.samples.assign(static_cast<std::size_t>(total_ms * options.sample_rate_hz / 1000), 0.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& s : data.sentences) {
    const double hz = synth_tone_hz(*s.sentiment);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double amp = 0.3 + 0.3 * unit(rng);
    const auto first = static_cast<std::size_t>(s.time_span->start_ms * options.sample_rate_hz / 1000);
    const auto last = static_cast<std::size_t>(s.time_span->end_ms * options.sample_rate_hz / 1000);
    for (std::size_t k = first; k < last && k < data.audio.samples.size(); ++k) {
      data.audio.samples[k] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(k - first) / rate + phase);
    }
  }
  for (auto& v : data.audio.samples) v = std::clamp(v + options.audio_noise * noise(rng), -0.99, 0.99);

  std::array<std::vector<double>, 3> means;
  for (auto& m : means) {
    m.resize(options.video_dim);
    for (auto& v : m) v = noise(rng);
  }
  data.video.modality = Modality::kVideo;
  data.video.dim = options.video_dim;
  const auto frames = static_cast<std::size_t>(std::floor(static_cast<double>(total_ms) * options.video_fps / 1000.0));
  std::size_t owner = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) * 1000.0 / options.video_fps;
    while (owner < data.sentences.size() && static_cast<double>(data.sentences[owner].time_span->end_ms) <= t) ++owner;
    const std::vector<double>* mean = nullptr;
    if (owner < data.sentences.size() && static_cast<double>(data.sentences[owner].time_span->start_ms) <= t) {
      mean = &means[static_cast<std::size_t>(*data.sentences[owner].sentiment)];
    }
    std::vector<double> frame(options.video_dim);
    for (std::size_t d = 0; d < options.video_dim; ++d) {
      // Stored as float32 on disk; round now so memory and file agree.
      frame[d] = static_cast<float>((mean ? (*mean)[d] : 0.0) + options.video_noise * noise(rng));
    }
    data.video.frames.push_back(std::move(frame));
    data.video.frame_times_ms.push_back(t);
  }
  return data;
}

std::string synth_embeddings(const SynthData& data, std::size_t dim, std::uint64_t seed) {
  std::set<std::string> words;
  for (const auto& s : data.sentences) {
    for (const auto& t : s.tokens) words.insert(Vocabulary::normalize(t.surface));
  }
  std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::string out;
  char buf[32];
  for (const auto& w : words) {
    out += w;
    for (std::size_t d = 0; d < dim; ++d) {
      std::snprintf(buf, sizeof buf, " %.6f", normal(rng));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void write_synth(const SynthData& data, const SynthOptions& options, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "sentences.jsonl", to_jsonl(data.sentences));
  write_wav(dir / "audio.wav", data.audio);
  save_feature_file(dir / "video.mmft", data.video, options.video_fps);
  write_file(dir / "subtitles.srt", emit_srt(data.subtitles));
  write_file(dir / "embeddings.txt", synth_embeddings(data, options.embedding_dim, options.seed));
}

}  // namespace mmom

// mmom: align subtitles, extract media features, train, evaluate, ablate,
// and generate synthetic fixtures.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmom/errors.h"
#include "mmom/features.h"
#include "mmom/ingest.h"
#include "mmom/stats.h"
#include "mmom/subalign.h"
#include "mmom/synth.h"
#include "mmom/train.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmom;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Records inputs (with content digests), config and outputs of one command.
class Manifest {
 public:
  Manifest(std::string command, const CLI::App& app)
      : command_(std::move(command)), config_(app.config_to_str(true, false)), started_(now_iso()) {}

  void input(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"digest", fnv1a_hex(read_file(path))}});
  }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write(const fs::path& path) const {
    std::string combined;
    for (const auto& in : inputs_) combined += in["digest"].get<std::string>();
    json j{{"command", command_},
           {"config", config_},
           {"inputs", inputs_},
           {"input_hash", fnv1a_hex(combined + config_)},
           {"started", started_},
           {"finished", now_iso()},
           {"outputs", outputs_}};
    write_file(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_;
  std::string started_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
};

DatasetFormat format_for(const std::string& flag, const fs::path& path) {
  if (!flag.empty()) {
    auto f = parse_format(flag);
    if (!f) throw UsageError("unknown format '" + flag + "' (expected conll or jsonl)");
    return *f;
  }
  auto ext = path.extension().string();
  return (ext == ".conll" || ext == ".txt") ? DatasetFormat::kConll : DatasetFormat::kJsonl;
}

// ---- align ---------------------------------------------------------------

struct AlignFlags {
  fs::path srt, sentences, out, sentences_out;
  std::string format;
  double threshold = 0.90;
  std::size_t window = 4;
};

int run_align(const AlignFlags& f, const CLI::App& app) {
  if (f.threshold < 0.0 || f.threshold > 1.0) throw UsageError("--threshold must be in [0, 1]");
  if (f.window < 1) throw UsageError("--window must be at least 1");
  Manifest manifest("align", app);
  auto chunks = parse_srt_file(f.srt);
  auto sentences = load_dataset(f.sentences, format_for(f.format, f.sentences));
  manifest.input("srt", f.srt);
  manifest.input("sentences", f.sentences);

  auto results = align(sentences, chunks, {f.threshold, f.window});
  write_file(f.out, to_jsonl(results));
  manifest.output(f.out);
  std::size_t matched = apply_alignment(sentences, results);
  fs::path augmented = f.sentences_out.empty() ? f.out.parent_path() / "sentences.aligned.jsonl" : f.sentences_out;
  save_dataset(augmented, sentences, DatasetFormat::kJsonl);
  manifest.output(augmented);
  manifest.write(f.out.parent_path() / "align.manifest.json");

  std::printf("%zu subtitle chunks, %zu sentences: %zu aligned, %zu unmatched\n", chunks.size(),
              sentences.size(), matched, sentences.size() - matched);
  for (const auto& r : results) {
    if (!r.matched()) std::printf("  unmatched %-12s best similarity %.4f\n", r.sentence_id.c_str(), r.best_similarity);
  }
  return 0;
}

// ---- features ------------------------------------------------------------

struct FeatureFlags {
  fs::path wav, video_feats, sentences, cache_dir;
  std::string format;
  std::size_t window = 1024;
  std::size_t hop = 512;
  std::size_t video_dim = kDefaultVideoDim;
  double fps = kDefaultVideoFps;
};

int run_features(const FeatureFlags& f, const CLI::App& app) {
  if (f.wav.empty() && f.video_feats.empty()) throw UsageError("give --wav, --video-feats, or both");
  Manifest manifest("features", app);
  auto sentences = load_dataset(f.sentences, format_for(f.format, f.sentences));
  manifest.input("sentences", f.sentences);

  std::optional<AudioSignal> audio;
  std::optional<FeatureSequence> video;
  if (!f.wav.empty()) {
    audio = read_wav(f.wav);
    manifest.input("wav", f.wav);
  }
  if (!f.video_feats.empty()) {
    video = load_video_features(f.video_feats, f.video_dim, f.fps);
    manifest.input("video", f.video_feats);
  }
  SpectrogramOptions spec;
  spec.window = f.window;
  spec.hop = f.hop;
  auto media = extract_media(sentences, audio ? &*audio : nullptr, video ? &*video : nullptr, spec);

  const std::string audio_digest = fnv1a_hex("window=" + std::to_string(f.window) + ";hop=" + std::to_string(f.hop) +
                                             ";hann;log1p");
  const std::string video_digest = fnv1a_hex("dim=" + std::to_string(f.video_dim) + ";fps=" + std::to_string(f.fps));
  fs::create_directories(f.cache_dir);
  std::string index;
  std::size_t timed = 0, with_audio = 0, with_video = 0;
  for (const auto& s : sentences) {
    if (!s.time_span) continue;
    ++timed;
    const std::string ref = s.media_ref.value_or("media");
    json entry{{"id", s.id}};
    if (auto it = media.audio.find(s.id); it != media.audio.end()) {
      auto name = feature_cache_name(ref, s.time_span->start_ms, s.time_span->end_ms, Modality::kAudio, audio_digest);
      const double frame_rate = static_cast<double>(audio->sample_rate_hz) / static_cast<double>(f.hop);
      save_feature_file(f.cache_dir / name, it->second, frame_rate);
      entry["audio"] = name;
      ++with_audio;
    }
    if (auto it = media.video.find(s.id); it != media.video.end()) {
      auto name = feature_cache_name(ref, s.time_span->start_ms, s.time_span->end_ms, Modality::kVideo, video_digest);
      save_feature_file(f.cache_dir / name, it->second, f.fps);
      entry["video"] = name;
      ++with_video;
    }
    index += entry.dump() + "\n";
  }
  write_file(f.cache_dir / "index.jsonl", index);
  manifest.output(f.cache_dir / "index.jsonl");
  manifest.write(f.cache_dir / "manifest.json");
  std::printf("%zu sentences, %zu with a time span: %zu audio segments, %zu video segments -> %s\n",
              sentences.size(), timed, with_audio, with_video, f.cache_dir.string().c_str());
  return 0;
}

MediaFeatures load_media_index(const fs::path& dir) {
  MediaFeatures media;
  const fs::path index = dir / "index.jsonl";
  std::istringstream in(read_file(index));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const auto id = j.at("id").get<std::string>();
    if (j.contains("audio")) media.audio[id] = load_feature_file(dir / j.at("audio").get<std::string>(), Modality::kAudio);
    if (j.contains("video")) media.video[id] = load_feature_file(dir / j.at("video").get<std::string>(), Modality::kVideo);
  }
  return media;
}

// ---- train / ablate ------------------------------------------------------

struct TrainFlags {
  fs::path data, valid, test, features, embeddings, out_dir;
  std::string format;
  std::string setting = "simple";
  std::vector<std::string> sentiments = {"positive", "negative", "neutral"};
  bool use_audio = false, use_video = false, use_crf = false;
  std::size_t batch_size = 8, epochs = 50, patience = 5, folds = 5, jobs = 1;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;
  double lr = 1e-3, dropout = 0.5, valid_fraction = 0.1;
  std::size_t embedding_dim = 300, text_hidden = 150, audio_hidden = 128, video_hidden = 128, fusion_hidden = 150;
  std::size_t attention_dim = 64, max_frames = 32, max_length = kDefaultMaxLength, min_frequency = 1;
};

void add_train_options(CLI::App* cmd, TrainFlags& f, bool with_model_switches) {
  cmd->add_option("--data", f.data, "Training data (or the whole corpus for cross-validation)")->required();
  cmd->add_option("--format", f.format, "Dataset format: conll or jsonl (default: from extension)");
  cmd->add_option("--valid", f.valid, "Validation data for a fixed split");
  cmd->add_option("--test", f.test, "Test data; switches from cross-validation to a fixed split");
  cmd->add_option("--features", f.features, "Feature cache directory written by `features`");
  cmd->add_option("--setting", f.setting, "simple, cal, csl or jsl")
      ->check(CLI::IsMember({"simple", "cal", "csl", "jsl"}));
  cmd->add_option("--sentiments", f.sentiments, "Sentiment classes")->delimiter(',');
  if (with_model_switches) {
    cmd->add_flag("--use-audio", f.use_audio, "Encode audio features");
    cmd->add_flag("--use-video", f.use_video, "Encode video features");
    cmd->add_flag("--use-crf", f.use_crf, "CRF output layer instead of per-token softmax");
  }
  cmd->add_option("--embeddings", f.embeddings, "GloVe-format embedding file");
  cmd->add_option("--batch-size", f.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", f.epochs)->check(CLI::PositiveNumber);
  cmd->add_option("--patience", f.patience)->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr)->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--seeds", f.seeds, "Seeds for a multi-seed run on a fixed split")->delimiter(',');
  cmd->add_option("--folds", f.folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  cmd->add_option("--jobs", f.jobs, "Parallel fold/seed workers")->check(CLI::PositiveNumber);
  cmd->add_option("--dropout", f.dropout)->check(CLI::Range(0.0, 0.99));
  cmd->add_option("--valid-fraction", f.valid_fraction)->check(CLI::Range(0.0, 0.9));
  cmd->add_option("--embedding-dim", f.embedding_dim)->check(CLI::PositiveNumber);
  cmd->add_option("--text-hidden", f.text_hidden)->check(CLI::PositiveNumber);
  cmd->add_option("--audio-hidden", f.audio_hidden)->check(CLI::PositiveNumber);
  cmd->add_option("--video-hidden", f.video_hidden)->check(CLI::PositiveNumber);
  cmd->add_option("--fusion-hidden", f.fusion_hidden)->check(CLI::PositiveNumber);
  cmd->add_option("--attention-dim", f.attention_dim)->check(CLI::PositiveNumber);
  cmd->add_option("--max-frames", f.max_frames, "Media frames kept per sentence")->check(CLI::PositiveNumber);
  cmd->add_option("--max-length", f.max_length)->check(CLI::PositiveNumber);
  cmd->add_option("--min-frequency", f.min_frequency);
  cmd->add_option("--out-dir", f.out_dir, "Output directory")->required();
}

struct Workload {
  TrainConfig config;
  std::vector<Sentence> data;
  std::optional<Split> fixed;
  MediaFeatures media;
  bool has_media = false;
  std::optional<fs::path> embeddings;
  std::vector<std::uint64_t> seeds;
};

std::vector<Sentence> load_for(const TrainFlags& f, const fs::path& path, const TrainConfig& cfg) {
  return prepare_for_setting(load_dataset(path, format_for(f.format, path)), cfg);
}

// Everything is loaded and checked here, before any training starts.
Workload prepare_workload(const TrainFlags& f, bool need_audio, bool need_video, bool need_embeddings,
                          Manifest& manifest) {
  Workload w;
  TrainConfig& c = w.config;
  c.model.setting = *parse_setting(f.setting);
  c.model.sentiments.clear();
  for (const auto& name : f.sentiments) {
    auto s = parse_sentiment(name);
    if (!s) throw UsageError("unknown sentiment '" + name + "'");
    c.model.sentiments.push_back(*s);
  }
  if (c.model.sentiments.empty()) throw UsageError("--sentiments must not be empty");
  c.model.use_audio = need_audio;
  c.model.use_video = need_video;
  c.model.use_crf = f.use_crf;
  c.model.embedding_dim = f.embedding_dim;
  c.model.text_hidden = f.text_hidden;
  c.model.audio_hidden = f.audio_hidden;
  c.model.video_hidden = f.video_hidden;
  c.model.fusion_hidden = f.fusion_hidden;
  c.model.attention_dim = f.attention_dim;
  c.model.dropout = f.dropout;
  c.batch_size = f.batch_size;
  c.max_epochs = f.epochs;
  c.patience = f.patience;
  c.seed = f.seed;
  c.adam.learning_rate = f.lr;
  c.valid_fraction = f.valid_fraction;
  c.max_media_frames = f.max_frames;
  c.max_length = f.max_length;
  c.min_frequency = f.min_frequency;

  if ((need_audio || need_video) && f.features.empty()) {
    throw UsageError("audio/video models need --features <cache dir> (see the `features` command)");
  }
  if (need_embeddings) {
    if (f.embeddings.empty()) throw UsageError("pretrained-embedding models need --embeddings <file>");
    w.embeddings = f.embeddings;
    manifest.input("embeddings", f.embeddings);
  }
  if (!f.valid.empty() && f.test.empty()) throw UsageError("--valid only applies together with --test");
  if (!f.seeds.empty() && f.test.empty()) throw UsageError("--seeds needs a fixed split (--test)");

  w.data = load_for(f, f.data, c);
  manifest.input("data", f.data);
  if (w.data.empty()) throw ValidationError(f.data.string() + ": no sentences left for setting " + f.setting);

  if (!f.test.empty()) {
    Split split;
    split.test = load_for(f, f.test, c);
    manifest.input("test", f.test);
    if (!f.valid.empty()) {
      split.train = w.data;
      split.valid = load_for(f, f.valid, c);
      manifest.input("valid", f.valid);
    } else {
      // Nothing is in fold 0, so fold_split only carves the validation part.
      FoldPlan all{2, c.seed, std::vector<std::size_t>(w.data.size(), 1)};
      Split carved = fold_split(w.data, all, 0, c.valid_fraction, c.seed);
      split.train = std::move(carved.train);
      split.valid = std::move(carved.valid);
    }
    w.fixed = split;
    w.seeds = f.seeds.empty() ? std::vector<std::uint64_t>{f.seed} : f.seeds;
  } else if (w.data.size() < f.folds) {
    throw ValidationError(std::to_string(w.data.size()) + " sentences cannot fill " + std::to_string(f.folds) +
                          " folds");
  }

  if (!f.features.empty()) {
    w.media = load_media_index(f.features);
    w.has_media = true;
    manifest.input("features", f.features / "index.jsonl");
    if (need_audio) {
      if (w.media.audio.empty()) throw ValidationError(f.features.string() + ": no audio features in the cache");
      c.model.audio_dim = w.media.audio.begin()->second.dim;
    }
    if (need_video) {
      if (w.media.video.empty()) throw ValidationError(f.features.string() + ": no video features in the cache");
      c.model.video_dim = w.media.video.begin()->second.dim;
    }
  }
  c.validate();
  return w;
}

Aggregate execute(const Workload& w, const TrainConfig& config, std::size_t folds, std::size_t jobs,
                  const RunCallback& on_run) {
  const MediaFeatures* media = w.has_media ? &w.media : nullptr;
  if (w.fixed) return multi_seed(config, *w.fixed, w.seeds, media, w.embeddings, jobs, on_run);
  return cross_validate(config, w.data, media, w.embeddings, folds, jobs, on_run);
}

std::string fmt(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void print_runs(const Aggregate& agg) {
  std::printf("%-10s %8s %8s %8s %10s %10s\n", "run", "AE-P", "AE-R", "AE-F1", "SENT-F1", "SENT-ACC");
  auto row = [](const std::string& label, double p, double r, double f1, std::optional<double> sf1,
                std::optional<double> acc) {
    std::printf("%-10s %8.4f %8.4f %8.4f %10s %10s\n", label.c_str(), p, r, f1, sf1 ? fmt(*sf1).c_str() : "-",
                acc ? fmt(*acc).c_str() : "-");
  };
  double p = 0, r = 0, f1 = 0;
  for (std::size_t i = 0; i < agg.runs.size(); ++i) {
    const auto& m = agg.runs[i];
    std::optional<double> sf1, acc;
    if (m.sentiment) {
      if (auto macro = m.sentiment->macro()) sf1 = macro->f1;
      acc = m.sentiment->accuracy();
    }
    row(agg.labels[i], m.ae.precision, m.ae.recall, m.ae.f1, sf1, acc);
    p += m.ae.precision;
    r += m.ae.recall;
    f1 += m.ae.f1;
  }
  const double n = static_cast<double>(agg.runs.size());
  auto mean = mean_report_json(agg.runs);
  std::optional<double> sf1, acc;
  if (mean.contains("sentiment_macro")) sf1 = mean["sentiment_macro"]["f1"].get<double>();
  if (mean.contains("sentiment_accuracy")) acc = mean["sentiment_accuracy"].get<double>();
  row("mean", p / n, r / n, f1 / n, sf1, acc);
}

json epochs_json(const TrainResult& r) {
  json out = json::array();
  for (const auto& e : r.epochs) out.push_back({{"epoch", e.epoch}, {"loss", e.mean_loss}, {"selection_f1", e.selection_f1}});
  return out;
}

int run_train(const TrainFlags& f, const CLI::App& app) {
  Manifest manifest("train", app);
  Workload w = prepare_workload(f, f.use_audio, f.use_video, !f.embeddings.empty(), manifest);
  w.config.model.use_pretrained_embeddings = !f.embeddings.empty();
  fs::create_directories(f.out_dir);

  auto on_run = [&](std::size_t, const std::string& label, RunOutput& run) {
    const fs::path dir = f.out_dir / label;
    fs::create_directories(dir);
    TrainConfig used = w.config;
    used.model = run.result.model.config();
    used.seed = w.fixed ? std::stoull(label.substr(5)) : w.config.seed;
    write_file(dir / "config.json", used.to_json().dump(2) + "\n");
    run.result.model.save(dir / "checkpoint.bin");
    std::string vocab;
    for (const auto& t : run.vocab.tokens()) vocab += t + "\n";
    write_file(dir / "vocab.txt", vocab);
    json metrics = run.test.report.to_json();
    metrics["epochs"] = epochs_json(run.result);
    metrics["best_epoch"] = run.result.best_epoch;
    write_file(dir / "metrics.json", metrics.dump(2) + "\n");
    write_file(dir / "predictions.conll", predictions_conll(run.test_sentences, run.test));
  };
  Aggregate agg = execute(w, w.config, f.folds, f.jobs, on_run);

  json summary = agg.to_json();
  summary["ae_f1_mean"] = summary["mean"]["ae_f1"];
  summary["ae_f1"] = summary["ae_f1_mean"];
  summary["ae_f1_runs"] = agg.ae_f1();
  summary["config"] = w.config.to_json();
  write_file(f.out_dir / "metrics.json", summary.dump(2) + "\n");
  manifest.output(f.out_dir / "metrics.json");
  for (const auto& label : agg.labels) manifest.output(f.out_dir / label);
  manifest.write(f.out_dir / "manifest.json");

  std::printf("setting %s, %s\n", f.setting.c_str(),
              w.fixed ? ("fixed split, " + std::to_string(w.seeds.size()) + " seed(s)").c_str()
                      : (std::to_string(f.folds) + "-fold cross-validation").c_str());
  print_runs(agg);
  return 0;
}

struct Variant {
  const char* name;
  bool gv, crf, av;
};

constexpr Variant kVariants[] = {
    {"T", false, false, false},         {"T+CRF", false, true, false},      {"T+GV", true, false, false},
    {"T+GV+CRF", true, true, false},    {"T+A+V", false, false, true},      {"T+CRF+A+V", false, true, true},
    {"T+GV+CRF+A+V", true, true, true},
};

std::string slug(std::string name) {
  std::replace(name.begin(), name.end(), '+', '_');
  return name;
}

int run_ablate(const TrainFlags& f, const CLI::App& app) {
  Manifest manifest("ablate", app);
  Workload w = prepare_workload(f, true, true, true, manifest);
  fs::create_directories(f.out_dir);

  std::vector<Aggregate> results;
  for (const auto& v : kVariants) {
    TrainConfig cfg = w.config;
    cfg.model.use_pretrained_embeddings = v.gv;
    cfg.model.use_crf = v.crf;
    cfg.model.use_audio = v.av;
    cfg.model.use_video = v.av;
    Workload view = w;
    if (!v.gv) view.embeddings.reset();
    results.push_back(execute(view, cfg, f.folds, f.jobs, {}));
    const fs::path dir = f.out_dir / slug(v.name);
    json metrics = results.back().to_json();
    metrics["variant"] = v.name;
    metrics["config"] = cfg.to_json();
    write_file(dir / "metrics.json", metrics.dump(2) + "\n");
    manifest.output(dir / "metrics.json");
    std::fprintf(stderr, "finished %s\n", v.name);
  }

  const auto baseline = results.front().ae_f1();
  json rows = json::array();
  std::printf("%-14s %8s %8s %8s   %s\n", "variant", "AE-P", "AE-R", "AE-F1", "t-test vs T");
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto mean = mean_report_json(results[i].runs);
    TTestResult t = paired_ttest(results[i].ae_f1(), baseline);
    std::string verdict;
    switch (t.kind) {
      case TTestResult::Kind::kNoDifference: verdict = "no difference"; break;
      case TTestResult::Kind::kZeroVariance: verdict = "constant difference, p -> 0"; break;
      case TTestResult::Kind::kValue: verdict = "t=" + fmt(t.t) + " p=" + fmt(t.p); break;
    }
    std::printf("%-14s %8.4f %8.4f %8.4f   %s\n", kVariants[i].name, mean["ae_precision"].get<double>(),
                mean["ae_recall"].get<double>(), mean["ae_f1"].get<double>(), verdict.c_str());
    rows.push_back({{"variant", kVariants[i].name},
                    {"ae_precision", mean["ae_precision"]},
                    {"ae_recall", mean["ae_recall"]},
                    {"ae_f1", mean["ae_f1"]},
                    {"ae_f1_runs", results[i].ae_f1()},
                    {"ttest_vs_T", t.to_json()}});
  }
  write_file(f.out_dir / "ablation.json", json{{"rows", rows}, {"labels", results.front().labels}}.dump(2) + "\n");
  manifest.output(f.out_dir / "ablation.json");
  manifest.write(f.out_dir / "manifest.json");
  return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalFlags {
  fs::path gold, pred, out_dir;
  std::string format;
  std::string setting = "simple";
};

int run_eval(const EvalFlags& f, const CLI::App& app) {
  Manifest manifest("eval", app);
  const Setting setting = *parse_setting(f.setting);
  auto gold = load_dataset(f.gold, format_for(f.format, f.gold));
  auto pred = load_dataset(f.pred, format_for(f.format, f.pred), Validation::kLenient);
  manifest.input("gold", f.gold);
  manifest.input("pred", f.pred);
  if (gold.size() != pred.size()) {
    throw ValidationError("gold has " + std::to_string(gold.size()) + " sentences, predictions " +
                          std::to_string(pred.size()));
  }
  Evaluation ev;
  std::vector<std::optional<SentimentClass>> gold_sent;
  const bool collapsed = scheme_for(setting) == Scheme::kCollapsed;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = gold[i];
    const auto& p = pred[i];
    if (g.id != p.id || g.surfaces() != p.surfaces()) {
      throw ValidationError("sentence " + std::to_string(i + 1) + ": prediction '" + p.id +
                            "' does not match gold '" + g.id + "' (ids and tokens must agree)");
    }
    if (!g.gold || !p.gold) throw ValidationError("sentence " + g.id + ": tags missing in gold or predictions");
    auto gs = *g.gold, ps = *p.gold;
    for (auto* seq : {&gs, &ps}) {
      bool has_chunks = !extract_chunks(*seq).empty();
      if (collapsed && seq->scheme == Scheme::kAspect) {
        if (has_chunks) throw ValidationError("sentence " + g.id + ": setting " + f.setting + " needs sentiment-bearing tags");
        seq->scheme = Scheme::kCollapsed;
      }
    }
    ev.gold.push_back(gs);
    ev.predicted.push_back(ps);
    gold_sent.push_back(g.sentiment);
    ev.predicted_sentiment.push_back(setting == Setting::kCsl ? std::optional(sentence_sentiment_from_tags(ps))
                                                              : p.sentiment);
  }
  ev.report = score_predictions(setting, ev.gold, ev.predicted, gold_sent, ev.predicted_sentiment);

  fs::create_directories(f.out_dir);
  write_file(f.out_dir / "metrics.json", ev.report.to_json().dump(2) + "\n");
  write_file(f.out_dir / "predictions.conll", predictions_conll(gold, ev));
  manifest.output(f.out_dir / "metrics.json");
  manifest.output(f.out_dir / "predictions.conll");
  manifest.write(f.out_dir / "manifest.json");

  const auto& r = ev.report;
  std::printf("processed %zu sentences; found %zu chunks; correct %zu (gold %zu)\n", gold.size(),
              r.ae_counts.predicted, r.ae_counts.correct, r.ae_counts.gold);
  std::printf("aspect extraction: precision %s%%; recall %s%%; FB1 %s\n", conlleval_percent(r.ae.precision).c_str(),
              conlleval_percent(r.ae.recall).c_str(), conlleval_percent(r.ae.f1).c_str());
  if (r.sentiment) {
    for (const auto& [c, n] : r.sentiment->counts) {
      Prf p = r.sentiment->class_prf(c);
      std::printf("%9s: precision %.4f recall %.4f F1 %.4f\n", to_string(c).c_str(), p.precision, p.recall, p.f1);
    }
    if (auto m = r.sentiment->macro()) std::printf("    macro: F1 %.4f\n", m->f1);
  }
  return 0;
}

// ---- synth ---------------------------------------------------------------

struct SynthFlags {
  fs::path out;
  SynthOptions options;
};

int run_synth(const SynthFlags& f, const CLI::App& app) {
  Manifest manifest("synth", app);
  SynthData data = make_synth(f.options);
  write_synth(data, f.options, f.out);
  for (const char* name : {"sentences.jsonl", "audio.wav", "video.mmft", "subtitles.srt", "embeddings.txt"}) {
    manifest.output(f.out / name);
  }
  manifest.write(f.out / "manifest.json");
  std::printf("wrote %zu sentences (%s) to %s\n", data.sentences.size(),
              f.options.modal_only ? "sentiment only in media" : "sentiment in text and media", f.out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal fine-grained opinion mining toolkit"};
  app.set_config("--config", "", "TOML file with option values; command-line flags win");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  AlignFlags align_flags;
  auto* align_cmd = app.add_subcommand("align", "Assign subtitle time spans to sentences");
  align_cmd->add_option("--srt", align_flags.srt, "SubRip file")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--sentences", align_flags.sentences, "Sentences to align")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--format", align_flags.format, "conll or jsonl (default: from extension)");
  align_cmd->add_option("--threshold", align_flags.threshold, "Minimum similarity");
  align_cmd->add_option("--window", align_flags.window, "Longest run of consecutive chunks matched as one");
  align_cmd->add_option("--out", align_flags.out, "Alignment results (JSONL)")->required();
  align_cmd->add_option("--sentences-out", align_flags.sentences_out, "Sentences with spans filled in (JSONL)");

  FeatureFlags feature_flags;
  auto* features_cmd = app.add_subcommand("features", "Cut per-sentence audio spectrograms and video features");
  features_cmd->add_option("--wav", feature_flags.wav, "16-bit PCM mono WAV")->check(CLI::ExistingFile);
  features_cmd->add_option("--video-feats", feature_flags.video_feats, "Video feature file (binary or .csv)")
      ->check(CLI::ExistingFile);
  features_cmd->add_option("--sentences", feature_flags.sentences, "Sentences with time spans")
      ->required()
      ->check(CLI::ExistingFile);
  features_cmd->add_option("--format", feature_flags.format, "conll or jsonl (default: from extension)");
  features_cmd->add_option("--cache-dir", feature_flags.cache_dir, "Output directory")->required();
  features_cmd->add_option("--window", feature_flags.window, "FFT window (power of two)")->check(CLI::PositiveNumber);
  features_cmd->add_option("--hop", feature_flags.hop, "Hop between frames")->check(CLI::PositiveNumber);
  features_cmd->add_option("--video-dim", feature_flags.video_dim)->check(CLI::PositiveNumber);
  features_cmd->add_option("--fps", feature_flags.fps, "Frame rate of CSV video features")->check(CLI::PositiveNumber);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate (cross-validation or fixed split)");
  add_train_options(train_cmd, train_flags, true);

  TrainFlags ablate_flags;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the seven-variant ablation grid");
  add_train_options(ablate_cmd, ablate_flags, false);

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Score a predictions file against gold");
  eval_cmd->add_option("--gold", eval_flags.gold)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", eval_flags.pred)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--format", eval_flags.format, "conll or jsonl (default: from extension)");
  eval_cmd->add_option("--setting", eval_flags.setting)->check(CLI::IsMember({"simple", "cal", "csl", "jsl"}));
  eval_cmd->add_option("--out-dir", eval_flags.out_dir)->required();

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic fixture dataset");
  synth_cmd->add_option("--out", synth_flags.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_flags.options.seed);
  synth_cmd->add_option("--sentences", synth_flags.options.sentences)->check(CLI::PositiveNumber);
  synth_cmd->add_flag("--modal-only", synth_flags.options.modal_only, "Sentiment cues only in audio/video");
  synth_cmd->add_option("--video-dim", synth_flags.options.video_dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sample-rate", synth_flags.options.sample_rate_hz)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*align_cmd) return run_align(align_flags, *align_cmd);
    if (*features_cmd) return run_features(feature_flags, *features_cmd);
    if (*train_cmd) return run_train(train_flags, *train_cmd);
    if (*ablate_cmd) return run_ablate(ablate_flags, *ablate_cmd);
    if (*eval_cmd) return run_eval(eval_flags, *eval_cmd);
    if (*synth_cmd) return run_synth(synth_flags, *synth_cmd);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid data: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid data: %s\n", e.what());
    return kExitData;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "invalid data: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}

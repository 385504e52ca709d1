#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmom/features.h"
#include "mmom/ingest.h"
#include "mmom/metrics.h"
#include "mmom/model.h"
#include "mmom/optim.h"

namespace mmom {

// Per-sentence media, keyed by sentence id.
struct MediaFeatures {
  std::map<std::string, FeatureSequence> audio;
  std::map<std::string, FeatureSequence> video;
};

// Cuts each timed sentence's segment out of the audio track (spectrogram,
// zero-padded when shorter than one window) and the video feature stream.
// Sentences without a span, or whose segment is empty, get no entry.
MediaFeatures extract_media(const std::vector<Sentence>& sentences, const AudioSignal* audio,
                            const FeatureSequence* video, const SpectrogramOptions& options = {});

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  AdamOptions adam;
  double valid_fraction = 0.1;
  std::size_t min_frequency = 1;
  std::size_t max_length = kDefaultMaxLength;
  std::size_t max_media_frames = 32;
  // Stop as soon as the selection F1 reaches this value; above 1 never fires.
  double target_f1 = 2.0;
  // Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Puts gold data in the form a setting trains on: trims, converts tags to
// the setting's scheme, and for csl/jsl keeps single-sentiment sentences.
// Throws ValidationError when the data cannot support the setting.
std::vector<Sentence> prepare_for_setting(std::vector<Sentence> sentences, const TrainConfig& config);

std::vector<Example> make_examples(const std::vector<Sentence>& sentences, const Vocabulary& vocab,
                                   const TagSet& tagset, const ModelConfig& config,
                                   const MediaFeatures* media, std::size_t max_media_frames);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double selection_f1 = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  bool early_stopped = false;
};

// Adam on mini-batch mean loss. After every epoch the aspect-extraction F1 on
// `valid` (on `train` when `valid` is empty) selects the returned weights;
// training stops after `patience` epochs without improvement.
TrainResult train(const TrainConfig& config, const std::vector<Example>& train_set,
                  const std::vector<Example>& valid, std::size_t vocab_size,
                  const EmbeddingTable* embeddings = nullptr);

// AE F1 of the model's predictions on labelled examples.
double aspect_f1(Model& model, const std::vector<Example>& examples);

struct Evaluation {
  MetricsReport report;
  std::vector<TagSequence> gold;
  std::vector<TagSequence> predicted;
  std::vector<std::optional<SentimentClass>> predicted_sentiment;
};

Evaluation evaluate(Model& model, const std::vector<Example>& examples,
                    const std::vector<Sentence>& sentences);

// Scores already-decoded sequences under a setting's conventions.
MetricsReport score_predictions(Setting setting, const std::vector<TagSequence>& gold,
                                const std::vector<TagSequence>& predicted,
                                const std::vector<std::optional<SentimentClass>>& gold_sentiment,
                                const std::vector<std::optional<SentimentClass>>& predicted_sentiment);

// "TOKEN GOLD PRED" per line, blank line between sentences.
std::string predictions_conll(const std::vector<Sentence>& sentences, const Evaluation& eval);

struct Split {
  std::vector<Sentence> train;
  std::vector<Sentence> valid;
  std::vector<Sentence> test;
};

struct RunOutput {
  TrainResult result;
  Evaluation test;
  Vocabulary vocab;
  std::vector<Sentence> test_sentences;
};

// Vocabulary from split.train, training with early stopping on split.valid,
// evaluation on split.test.
RunOutput run_split(const TrainConfig& config, const Split& split, const MediaFeatures* media,
                    const std::optional<std::filesystem::path>& embeddings);

struct FoldPlan {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;  // per sentence index

  std::vector<std::size_t> members(std::size_t fold) const;
};

// Seeded shuffle, then round-robin assignment: fold sizes differ by at most 1.
FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::uint64_t seed);

// Test = the fold; the rest is split into train and a seeded validation part
// of `valid_fraction` (at least one sentence when two or more remain).
Split fold_split(const std::vector<Sentence>& sentences, const FoldPlan& plan, std::size_t fold,
                 double valid_fraction, std::uint64_t seed);

struct Aggregate {
  std::vector<std::string> labels;  // "fold-1", "seed-7", ...
  std::vector<MetricsReport> runs;

  std::vector<double> ae_f1() const;
  nlohmann::json to_json() const;
};

using RunCallback = std::function<void(std::size_t index, const std::string& label, RunOutput& run)>;

// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

Aggregate cross_validate(const TrainConfig& config, const std::vector<Sentence>& sentences,
                         const MediaFeatures* media,
                         const std::optional<std::filesystem::path>& embeddings, std::size_t k,
                         std::size_t jobs = 1, const RunCallback& on_run = {});

// One run per seed on a fixed split.
Aggregate multi_seed(const TrainConfig& config, const Split& split, const std::vector<std::uint64_t>& seeds,
                     const MediaFeatures* media,
                     const std::optional<std::filesystem::path>& embeddings, std::size_t jobs = 1,
                     const RunCallback& on_run = {});

}  // namespace mmom

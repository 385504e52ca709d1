#include "mmom/train.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "mmom/errors.h"

namespace mmom {

MediaFeatures extract_media(const std::vector<Sentence>& sentences, const AudioSignal* audio,
                            const FeatureSequence* video, const SpectrogramOptions& options) {
  MediaFeatures media;
  SpectrogramOptions spec = options;
  spec.pad_short_signal = true;
  for (const auto& s : sentences) {
    if (!s.time_span) continue;
    const auto [start, end] = *s.time_span;
    if (audio) {
      AudioSignal cut = cut_signal(*audio, start, end);
      if (!cut.samples.empty()) media.audio[s.id] = spectrogram(cut, spec);
    }
    if (video) {
      FeatureSequence cut = cut_to_span(*video, static_cast<double>(start), static_cast<double>(end));
      if (!cut.empty()) media.video[s.id] = std::move(cut);
    }
  }
  return media;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (max_epochs < 1) throw ValidationError("max epochs must be at least 1");
  if (valid_fraction < 0.0 || valid_fraction >= 1.0) {
    throw ValidationError("validation fraction must be in [0, 1)");
  }
  if (max_media_frames < 1) throw ValidationError("max media frames must be at least 1");
  if (adam.learning_rate <= 0.0) throw ValidationError("learning rate must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"learning_rate", adam.learning_rate},
          {"valid_fraction", valid_fraction},
          {"min_frequency", min_frequency},
          {"max_length", max_length},
          {"max_media_frames", max_media_frames},
          {"target_f1", target_f1},
          {"max_steps", max_steps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
  c.min_frequency = j.value("min_frequency", c.min_frequency);
  c.max_length = j.value("max_length", c.max_length);
  c.max_media_frames = j.value("max_media_frames", c.max_media_frames);
  c.target_f1 = j.value("target_f1", c.target_f1);
  c.max_steps = j.value("max_steps", c.max_steps);
  return c;
}

namespace {

bool has_aspects(const TagSequence& seq) {
  return std::any_of(seq.tags.begin(), seq.tags.end(), [](const Tag& t) { return !t.is_outside(); });
}

}  // namespace

std::vector<Sentence> prepare_for_setting(std::vector<Sentence> sentences, const TrainConfig& config) {
  const Setting setting = config.model.setting;
  const std::set<SentimentClass> allowed(config.model.sentiments.begin(), config.model.sentiments.end());
  for (auto& s : sentences) {
    if (!s.gold) throw ValidationError("sentence " + s.id + " has no gold tags");
    trim(s, config.max_length);
    if (s.gold->scheme == Scheme::kCollapsed) {
      for (const auto& t : s.gold->tags) {
        if (t.sentiment && !allowed.count(*t.sentiment)) {
          throw ValidationError("sentence " + s.id + " uses sentiment '" + to_string(*t.sentiment) +
                                "', which is not in the configured sentiment set");
        }
      }
    }
    if (scheme_for(setting) == Scheme::kCollapsed && s.gold->scheme == Scheme::kAspect) {
      if (has_aspects(*s.gold)) {
        throw ValidationError("setting " + to_string(setting) + " needs sentiment-bearing tags (B-POS, ...); sentence " +
                              s.id + " has plain IOB tags");
      }
      s.gold = collapsed_sequence(s.gold->tags);
    }
  }
  if (setting == Setting::kJsl) {
    for (const auto& s : sentences) {
      if (s.gold->scheme == Scheme::kAspect && has_aspects(*s.gold) && !s.sentiment) {
        throw ValidationError("setting jsl needs a sentence sentiment for every sentence; " + s.id +
                              " has none and its tags carry no sentiment");
      }
    }
  }
  if (setting == Setting::kCsl || setting == Setting::kJsl) {
    sentences = filter_single_sentiment(sentences);
    for (const auto& s : sentences) {
      if (!allowed.count(*s.sentiment)) {
        throw ValidationError("sentence " + s.id + " has sentiment '" + to_string(*s.sentiment) +
                              "', which is not in the configured sentiment set");
      }
    }
  }
  if (scheme_for(setting) == Scheme::kAspect) {
    for (auto& s : sentences) s.gold = to_aspect(*s.gold);
  }
  return sentences;
}

std::vector<Example> make_examples(const std::vector<Sentence>& sentences, const Vocabulary& vocab,
                                   const TagSet& tagset, const ModelConfig& config,
                                   const MediaFeatures* media, std::size_t max_media_frames) {
  const auto sorted = ordered_sentiments(config.sentiments);
  std::vector<Example> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    Example e;
    e.id = s.id;
    for (const auto& t : s.tokens) e.token_ids.push_back(vocab.lookup(t.surface));
    if (s.gold) {
      if (s.gold->scheme != tagset.scheme()) {
        throw ValidationError("sentence " + s.id + ": gold tags do not match the model's tag scheme");
      }
      e.gold_labels = tagset.encode(*s.gold);
    }
    if (s.sentiment) {
      auto it = std::find(sorted.begin(), sorted.end(), *s.sentiment);
      if (it != sorted.end()) e.gold_sentiment = static_cast<std::size_t>(it - sorted.begin());
    }
    if (media) {
      if (config.use_audio) {
        auto it = media->audio.find(s.id);
        if (it != media->audio.end()) e.audio = downsample(it->second, max_media_frames);
      }
      if (config.use_video) {
        auto it = media->video.find(s.id);
        if (it != media->video.end()) e.video = downsample(it->second, max_media_frames);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

double aspect_f1(Model& model, const std::vector<Example>& examples) {
  std::vector<TagSequence> gold, pred;
  for (const auto& e : examples) {
    gold.push_back(to_aspect(model.tagset().decode(e.gold_labels)));
    pred.push_back(to_aspect(model.tagset().decode(model.predict(e).labels)));
  }
  return evaluate_chunks(gold, pred, false).prf().f1;
}

TrainResult train(const TrainConfig& config, const std::vector<Example>& train_set,
                  const std::vector<Example>& valid, std::size_t vocab_size,
                  const EmbeddingTable* embeddings) {
  config.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");

  TrainResult result{Model(config.model, vocab_size, config.seed, embeddings)};
  Model& model = result.model;
  Adam adam(model.parameters(), config.adam);
  std::mt19937_64 shuffle_rng(config.seed + 0x5bd1e995ULL);
  const auto& selection = valid.empty() ? train_set : valid;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> best_weights;
  std::size_t since_best = 0;
  bool step_limit = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs && !step_limit; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      try {
        ad::Tensor total;
        for (std::size_t k = start; k < end; ++k) {
          ad::Tensor l = model.loss(train_set[order[k]], true).total;
          total = total.defined() ? ad::add(total, l) : l;
        }
        ad::Tensor batch_loss = ad::scale(total, 1.0 / static_cast<double>(end - start));
        ad::backward(batch_loss);
        adam.step();
        adam.zero_grad();
        result.step_losses.push_back(batch_loss.item());
        epoch_loss += batch_loss.item();
        ++batches;
      } catch (const NumericError& err) {
        std::string ids;
        for (std::size_t k = start; k < end; ++k) ids += (ids.empty() ? "" : ", ") + train_set[order[k]].id;
        throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(epoch) + ", batch: " + ids + ")");
      }
      if (config.max_steps > 0 && result.step_losses.size() >= config.max_steps) {
        step_limit = true;
        break;
      }
    }

    const double f1 = aspect_f1(model, selection);
    result.epochs.push_back({epoch, batches ? epoch_loss / static_cast<double>(batches) : 0.0, f1});
    if (f1 > result.best_f1) {
      result.best_f1 = f1;
      result.best_epoch = epoch;
      best_weights = model.snapshot();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
    if (f1 >= config.target_f1) break;
  }
  if (!best_weights.empty()) model.restore(best_weights);
  return result;
}

MetricsReport score_predictions(Setting setting, const std::vector<TagSequence>& gold,
                                const std::vector<TagSequence>& predicted,
                                const std::vector<std::optional<SentimentClass>>& gold_sentiment,
                                const std::vector<std::optional<SentimentClass>>& predicted_sentiment) {
  MetricsReport report;
  std::vector<TagSequence> gold_ae, pred_ae;
  for (const auto& g : gold) gold_ae.push_back(to_aspect(g));
  for (const auto& p : predicted) pred_ae.push_back(to_aspect(p));
  report.ae_counts = evaluate_chunks(gold_ae, pred_ae, false);
  report.ae = report.ae_counts.prf();

  auto sentence_level = [&](auto pred_of) {
    std::vector<SentimentClass> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (!gold_sentiment.at(i)) throw ValidationError("sentence " + std::to_string(i) + " has no gold sentiment");
      g.push_back(*gold_sentiment[i]);
      p.push_back(pred_of(i));
    }
    return evaluate_sentence_sentiment(g, p);
  };

  switch (setting) {
    case Setting::kSimple:
      break;
    case Setting::kCal:
      report.collapsed = evaluate_chunks(gold, predicted, true).prf();
      report.sentiment = evaluate_chunk_sentiment(gold, predicted);
      break;
    case Setting::kCsl:
      report.collapsed = evaluate_chunks(gold, predicted, true).prf();
      report.sentiment = sentence_level([&](std::size_t i) { return sentence_sentiment_from_tags(predicted[i]); });
      break;
    case Setting::kJsl:
      report.sentiment = sentence_level([&](std::size_t i) {
        if (!predicted_sentiment.at(i)) throw ValidationError("missing predicted sentence sentiment");
        return *predicted_sentiment[i];
      });
      break;
  }
  return report;
}

Evaluation evaluate(Model& model, const std::vector<Example>& examples, const std::vector<Sentence>& sentences) {
  if (examples.size() != sentences.size()) throw ShapeError("evaluate: examples and sentences differ in count");
  Evaluation ev;
  std::vector<std::optional<SentimentClass>> gold_sent;
  const auto& sentiments = model.config().sentiments;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!sentences[i].gold) throw ValidationError("sentence " + sentences[i].id + " has no gold tags");
    Prediction p = model.predict(examples[i]);
    ev.gold.push_back(*sentences[i].gold);
    ev.predicted.push_back(model.tagset().decode(p.labels));
    ev.predicted_sentiment.push_back(p.sentiment ? std::optional(sentiments.at(*p.sentiment)) : std::nullopt);
    gold_sent.push_back(sentences[i].sentiment);
  }
  if (model.config().setting == Setting::kCsl) {
    for (std::size_t i = 0; i < ev.predicted.size(); ++i) {
      ev.predicted_sentiment[i] = sentence_sentiment_from_tags(ev.predicted[i]);
    }
  }
  ev.report = score_predictions(model.config().setting, ev.gold, ev.predicted, gold_sent, ev.predicted_sentiment);
  return ev;
}

std::string predictions_conll(const std::vector<Sentence>& sentences, const Evaluation& eval) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out += s.tokens[t].surface + " " + to_string(eval.gold.at(i).tags.at(t)) + " " +
             to_string(eval.predicted.at(i).tags.at(t)) + "\n";
    }
    out += "\n";
  }
  return out;
}

RunOutput run_split(const TrainConfig& config, const Split& split, const MediaFeatures* media,
                    const std::optional<std::filesystem::path>& embeddings) {
  if (split.train.empty()) throw ValidationError("training split is empty");
  Vocabulary vocab = build_vocab(split.train, config.min_frequency);
  std::optional<EmbeddingTable> table;
  TrainConfig cfg = config;
  if (cfg.model.use_pretrained_embeddings) {
    if (!embeddings) throw ValidationError("pretrained embeddings requested but no embedding file given");
    table = load_embeddings(*embeddings, vocab, cfg.seed);
    cfg.model.embedding_dim = table->dimension;
  }
  const TagSet tagset = tagset_for(cfg.model);
  auto train_ex = make_examples(split.train, vocab, tagset, cfg.model, media, cfg.max_media_frames);
  auto valid_ex = make_examples(split.valid, vocab, tagset, cfg.model, media, cfg.max_media_frames);
  auto test_ex = make_examples(split.test, vocab, tagset, cfg.model, media, cfg.max_media_frames);

  RunOutput out{train(cfg, train_ex, valid_ex, vocab.size(), table ? &*table : nullptr), {}, vocab, split.test};
  out.test = evaluate(out.result.model, test_ex, split.test);
  return out;
}

std::vector<std::size_t> FoldPlan::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (n < k) {
    throw ValidationError("dataset of " + std::to_string(n) + " sentences is smaller than " + std::to_string(k) +
                          " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan{k, seed, std::vector<std::size_t>(n)};
  for (std::size_t pos = 0; pos < n; ++pos) plan.fold_of[order[pos]] = pos % k;
  return plan;
}

Split fold_split(const std::vector<Sentence>& sentences, const FoldPlan& plan, std::size_t fold,
                 double valid_fraction, std::uint64_t seed) {
  if (sentences.size() != plan.fold_of.size()) throw ShapeError("fold plan does not match the dataset size");
  Split split;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (plan.fold_of[i] == fold) {
      split.test.push_back(sentences[i]);
    } else {
      rest.push_back(i);
    }
  }
  std::mt19937_64 rng(seed ^ (0x2545f4914f6cdd1dULL * (fold + 1)));
  std::shuffle(rest.begin(), rest.end(), rng);
  std::size_t n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(rest.size())));
  if (valid_fraction > 0.0 && n_valid == 0 && rest.size() >= 2) n_valid = 1;
  std::vector<bool> is_valid(sentences.size(), false);
  for (std::size_t k = 0; k < n_valid; ++k) is_valid[rest[k]] = true;
  // Keep corpus order inside each part.
  std::sort(rest.begin(), rest.end());
  for (auto i : rest) (is_valid[i] ? split.valid : split.train).push_back(sentences[i]);
  return split;
}

std::vector<double> Aggregate::ae_f1() const {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.ae.f1);
  return out;
}

nlohmann::json Aggregate::to_json() const {
  nlohmann::json per_run = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto j = runs[i].to_json();
    j["label"] = labels.at(i);
    per_run.push_back(j);
  }
  return {{"mean", mean_report_json(runs)}, {"runs", per_run}, {"ae_f1", ae_f1()}};
}

void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        {
          std::lock_guard lock(failure_mutex);
          if (failure) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

Aggregate cross_validate(const TrainConfig& config, const std::vector<Sentence>& sentences,
                         const MediaFeatures* media, const std::optional<std::filesystem::path>& embeddings,
                         std::size_t k, std::size_t jobs, const RunCallback& on_run) {
  FoldPlan plan = make_fold_plan(sentences.size(), k, config.seed);
  Aggregate agg;
  agg.runs.resize(k);
  for (std::size_t f = 0; f < k; ++f) agg.labels.push_back("fold-" + std::to_string(f + 1));
  run_parallel(k, jobs, [&](std::size_t f) {
    Split split = fold_split(sentences, plan, f, config.valid_fraction, config.seed);
    RunOutput run = run_split(config, split, media, embeddings);
    agg.runs[f] = run.test.report;
    if (on_run) on_run(f, agg.labels[f], run);
  });
  return agg;
}

Aggregate multi_seed(const TrainConfig& config, const Split& split, const std::vector<std::uint64_t>& seeds,
                     const MediaFeatures* media, const std::optional<std::filesystem::path>& embeddings,
                     std::size_t jobs, const RunCallback& on_run) {
  if (seeds.empty()) throw ValidationError("multi-seed run needs at least one seed");
  Aggregate agg;
  agg.runs.resize(seeds.size());
  for (auto s : seeds) agg.labels.push_back("seed-" + std::to_string(s));
  run_parallel(seeds.size(), jobs, [&](std::size_t i) {
    TrainConfig cfg = config;
    cfg.seed = seeds[i];
    RunOutput run = run_split(cfg, split, media, embeddings);
    agg.runs[i] = run.test.report;
    if (on_run) on_run(i, agg.labels[i], run);
  });
  return agg;
}

}  // namespace mmom

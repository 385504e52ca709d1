#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmom/autodiff.h"
#include "mmom/features.h"
#include "mmom/ingest.h"
#include "mmom/labels.h"
#include "mmom/optim.h"

namespace mmom {

// Simple: AE tags. CAL: collapsed tags. CSL: collapsed tags on single-
// sentiment sentences, scored at sentence level. JSL: AE tags plus a
// sentence-sentiment classifier trained jointly.
enum class Setting { kSimple, kCal, kCsl, kJsl };

std::string to_string(Setting s);
std::optional<Setting> parse_setting(std::string_view text);
Scheme scheme_for(Setting s);

struct ModelConfig {
  Setting setting = Setting::kSimple;
  bool use_audio = false;
  bool use_video = false;
  bool use_crf = true;
  bool use_pretrained_embeddings = false;
  std::vector<SentimentClass> sentiments = {SentimentClass::kPositive, SentimentClass::kNegative,
                                            SentimentClass::kNeutral};

  std::size_t embedding_dim = 300;
  std::size_t text_hidden = 150;
  std::size_t audio_hidden = 128;
  std::size_t video_hidden = 128;
  std::size_t fusion_hidden = 150;
  std::size_t attention_dim = 64;
  std::size_t audio_dim = 513;
  std::size_t video_dim = kDefaultVideoDim;
  std::size_t head_hidden1 = 128;
  std::size_t head_hidden2 = 64;
  double dropout = 0.5;

  std::size_t fusion_input_dim() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Label vocabulary the configured setting predicts over.
TagSet tagset_for(const ModelConfig& config);

// Standard GRU recurrence with a zero initial state:
//   z = sigmoid(x W_z + h U_z + b_z),  r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W_h + (r * h) U_h + b_h),  h' = (1 - z) * h + z * c
// W_{z,r,h} are stored side by side in w_x, U_{z,r} in u_zr.
struct GruCell {
  ad::Tensor w_x;   // [in, 3H]
  ad::Tensor u_zr;  // [H, 2H]
  ad::Tensor u_h;   // [H, H]
  ad::Tensor bias;  // [1, 3H]

  std::size_t hidden() const { return u_h.rows(); }
  // States for inputs [n, in] in input order -> [n, H]. With `reverse` the
  // recurrence runs from the last row to the first.
  ad::Tensor run(const ad::Tensor& inputs, bool reverse) const;
};

struct BiGru {
  GruCell forward;
  GruCell backward;
  // [n, 2H]: forward state then backward state for each step.
  ad::Tensor run(const ad::Tensor& inputs) const;
};

// One model input: token ids plus optional media feature sequences.
struct Example {
  std::string id;
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> gold_labels;     // tag-set indices, empty when unlabelled
  std::optional<std::size_t> gold_sentiment;  // index into config.sentiments
  std::optional<FeatureSequence> audio;
  std::optional<FeatureSequence> video;
};

struct ForwardResult {
  ad::Tensor text_states;        // [n, 2 * text_hidden]
  ad::Tensor audio_pooled;       // [1, 2 * audio_hidden] when used
  ad::Tensor video_pooled;       // [1, 2 * video_hidden] when used
  ad::Tensor fusion_input;       // [n, fusion_input_dim]
  ad::Tensor fused;              // [n, 2 * fusion_hidden]
  ad::Tensor attention;          // [n, n], rows sum to 1
  ad::Tensor context;            // [n, 2 * fusion_hidden]
  ad::Tensor emissions;          // [n, |tagset|]
  ad::Tensor sentence_log_probs; // [1, |sentiments|] for JSL
};

struct LossParts {
  ad::Tensor total;
  ad::Tensor sequence;
  ad::Tensor sentence;  // JSL only
};

struct Prediction {
  std::vector<std::size_t> labels;
  std::optional<std::size_t> sentiment;
  std::vector<double> sentiment_probs;
};

// Text/audio/video BiGRU encoders, early fusion BiGRU, self-attention
// labeling layer, CRF (or per-token softmax), and the JSL sentence head.
class Model {
 public:
  Model(ModelConfig config, std::size_t vocab_size, std::uint64_t seed,
        const EmbeddingTable* pretrained = nullptr);

  const ModelConfig& config() const { return config_; }
  const TagSet& tagset() const { return tagset_; }
  NamedTensors& named_parameters() { return params_; }
  const NamedTensors& named_parameters() const { return params_; }
  std::vector<ad::Tensor> parameters() const;
  const ad::Tensor& parameter(const std::string& name) const;
  std::mt19937_64& rng() { return rng_; }

  ad::Tensor encode_text(std::span<const std::size_t> token_ids, bool train);
  ad::Tensor encode_audio(const FeatureSequence* seq) const;
  ad::Tensor encode_video(const FeatureSequence* seq) const;
  ad::Tensor fuse(const ad::Tensor& text_states, const ad::Tensor& audio_pooled,
                  const ad::Tensor& video_pooled, ad::Tensor* fusion_input = nullptr) const;
  struct Attended {
    ad::Tensor weights, context, outputs;
  };
  Attended self_attend(const ad::Tensor& fused) const;
  ad::Tensor sentence_head(const ad::Tensor& fused) const;  // log-probabilities

  ForwardResult forward(const Example& example, bool train);
  LossParts loss(const Example& example, bool train);
  Prediction predict(const Example& example);

  // Checkpoint with the config recorded in the header.
  void save(const std::filesystem::path& path) const;
  // Refuses checkpoints written under a different configuration.
  void load(const std::filesystem::path& path);

  // Value snapshot / restore of all parameters (early stopping).
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  ad::Tensor add_param(const std::string& name, std::size_t rows, std::size_t cols, double range);
  GruCell make_cell(const std::string& prefix, std::size_t in, std::size_t hidden);
  BiGru make_bigru(const std::string& prefix, std::size_t in, std::size_t hidden);
  ad::Tensor encode_media(const BiGru& gru, const ad::Tensor& no_signal,
                          const FeatureSequence* seq, std::size_t dim) const;

  ModelConfig config_;
  TagSet tagset_;
  std::size_t vocab_size_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 rng_;
  NamedTensors params_;

  ad::Tensor embedding_;
  BiGru text_gru_, audio_gru_, video_gru_, fusion_gru_;
  ad::Tensor audio_no_signal_, video_no_signal_;
  ad::Tensor attn_w_, attn_b_, attn_v_;
  ad::Tensor out_w_, out_b_;
  ad::Tensor transitions_;
  ad::Tensor head_w1_, head_b1_, head_w2_, head_b2_, head_w3_, head_b3_;
};

}  // namespace mmom

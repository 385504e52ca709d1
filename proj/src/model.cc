#include "mmom/model.h"

#include <algorithm>
#include <cmath>

#include "mmom/crf.h"
#include "mmom/errors.h"

namespace mmom {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kSimple: return "simple";
    case Setting::kCal: return "cal";
    case Setting::kCsl: return "csl";
    case Setting::kJsl: return "jsl";
  }
  return "simple";
}

std::optional<Setting> parse_setting(std::string_view text) {
  if (text == "simple") return Setting::kSimple;
  if (text == "cal") return Setting::kCal;
  if (text == "csl") return Setting::kCsl;
  if (text == "jsl") return Setting::kJsl;
  return std::nullopt;
}

Scheme scheme_for(Setting s) {
  return (s == Setting::kCal || s == Setting::kCsl) ? Scheme::kCollapsed : Scheme::kAspect;
}

std::size_t ModelConfig::fusion_input_dim() const {
  std::size_t dim = 2 * text_hidden;
  if (use_audio) dim += 2 * audio_hidden;
  if (use_video) dim += 2 * video_hidden;
  return dim;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json sents = nlohmann::json::array();
  for (auto s : sentiments) sents.push_back(to_string(s));
  return {{"setting", to_string(setting)},
          {"use_audio", use_audio},
          {"use_video", use_video},
          {"use_crf", use_crf},
          {"use_pretrained_embeddings", use_pretrained_embeddings},
          {"sentiments", sents},
          {"embedding_dim", embedding_dim},
          {"text_hidden", text_hidden},
          {"audio_hidden", audio_hidden},
          {"video_hidden", video_hidden},
          {"fusion_hidden", fusion_hidden},
          {"attention_dim", attention_dim},
          {"audio_dim", audio_dim},
          {"video_dim", video_dim},
          {"head_hidden1", head_hidden1},
          {"head_hidden2", head_hidden2},
          {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("setting")) {
    auto s = parse_setting(j.at("setting").get<std::string>());
    if (!s) throw ValidationError("unknown setting '" + j.at("setting").get<std::string>() + "'");
    c.setting = *s;
  }
  if (j.contains("sentiments")) {
    c.sentiments.clear();
    for (const auto& name : j.at("sentiments")) {
      auto s = parse_sentiment(name.get<std::string>());
      if (!s) throw ValidationError("unknown sentiment '" + name.get<std::string>() + "'");
      c.sentiments.push_back(*s);
    }
  }
  c.use_audio = j.value("use_audio", c.use_audio);
  c.use_video = j.value("use_video", c.use_video);
  c.use_crf = j.value("use_crf", c.use_crf);
  c.use_pretrained_embeddings = j.value("use_pretrained_embeddings", c.use_pretrained_embeddings);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.text_hidden = j.value("text_hidden", c.text_hidden);
  c.audio_hidden = j.value("audio_hidden", c.audio_hidden);
  c.video_hidden = j.value("video_hidden", c.video_hidden);
  c.fusion_hidden = j.value("fusion_hidden", c.fusion_hidden);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.audio_dim = j.value("audio_dim", c.audio_dim);
  c.video_dim = j.value("video_dim", c.video_dim);
  c.head_hidden1 = j.value("head_hidden1", c.head_hidden1);
  c.head_hidden2 = j.value("head_hidden2", c.head_hidden2);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

ad::Tensor GruCell::run(const ad::Tensor& inputs, bool reverse) const {
  const std::size_t n = inputs.rows(), H = hidden();
  if (inputs.cols() != w_x.rows()) {
    throw ShapeError("gru: input " + inputs.shape_string() + " does not match weights " +
                     w_x.shape_string());
  }
  ad::Tensor projected = ad::add_row(ad::matmul(inputs, w_x), bias);
  ad::Tensor x_zr = ad::slice(projected, 1, 0, 2 * H);
  ad::Tensor x_h = ad::slice(projected, 1, 2 * H, H);

  std::vector<ad::Tensor> states(n);
  ad::Tensor h = ad::Tensor::zeros(1, H);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    ad::Tensor zr = ad::sigmoid(ad::add(ad::slice(x_zr, 0, t, 1), ad::matmul(h, u_zr)));
    ad::Tensor z = ad::slice(zr, 1, 0, H);
    ad::Tensor r = ad::slice(zr, 1, H, H);
    ad::Tensor c = ad::tanh(ad::add(ad::slice(x_h, 0, t, 1), ad::matmul(ad::mul(r, h), u_h)));
    h = ad::add(h, ad::mul(z, ad::sub(c, h)));
    states[t] = h;
  }
  return ad::concat(states, 0);
}

ad::Tensor BiGru::run(const ad::Tensor& inputs) const {
  return ad::concat({forward.run(inputs, false), backward.run(inputs, true)}, 1);
}

TagSet tagset_for(const ModelConfig& config) {
  Scheme scheme = scheme_for(config.setting);
  if (scheme == Scheme::kAspect) return TagSet(scheme);
  return TagSet(scheme, ordered_sentiments(config.sentiments));
}

namespace {

ad::Tensor frames_tensor(const FeatureSequence& seq, std::size_t dim) {
  std::vector<double> values;
  values.reserve(seq.size() * dim);
  for (const auto& f : seq.frames) {
    if (f.size() != dim) {
      throw ShapeError("feature frame of dimension " + std::to_string(f.size()) + ", model expects " +
                       std::to_string(dim));
    }
    values.insert(values.end(), f.begin(), f.end());
  }
  return ad::Tensor::from(seq.size(), dim, std::move(values));
}

// n copies of a [1, d] row, as an [n, d] tensor with a summing gradient.
ad::Tensor repeat_rows(const ad::Tensor& row, std::size_t n) {
  return ad::matmul(ad::Tensor::constant(n, 1, 1.0), row);
}

}  // namespace

Model::Model(ModelConfig config, std::size_t vocab_size, std::uint64_t seed,
             const EmbeddingTable* pretrained)
    : config_(std::move(config)),
      tagset_(tagset_for(config_)),
      vocab_size_(vocab_size),
      init_rng_(seed),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  if (vocab_size_ < 2) throw ShapeError("model: vocabulary needs at least UNK and PAD");
  if (config_.sentiments.empty()) throw ShapeError("model: empty sentiment set");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ShapeError("model: dropout must be in [0, 1)");
  config_.sentiments = ordered_sentiments(config_.sentiments);

  embedding_ = add_param("embedding", vocab_size_, config_.embedding_dim, 0.0);
  auto emb = embedding_.mutable_values();
  if (config_.use_pretrained_embeddings) {
    if (!pretrained) throw ValidationError("model: pretrained embeddings requested but none given");
    if (pretrained->dimension != config_.embedding_dim || pretrained->rows != vocab_size_) {
      throw ShapeError("model: embedding table is " + std::to_string(pretrained->rows) + "x" +
                       std::to_string(pretrained->dimension) + ", expected " +
                       std::to_string(vocab_size_) + "x" + std::to_string(config_.embedding_dim));
    }
    std::copy(pretrained->matrix.begin(), pretrained->matrix.end(), emb.begin());
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : emb) v = normal(init_rng_);
  }
  std::fill_n(emb.begin() + Vocabulary::kPad * config_.embedding_dim, config_.embedding_dim, 0.0);

  text_gru_ = make_bigru("text", config_.embedding_dim, config_.text_hidden);
  if (config_.use_audio) {
    audio_no_signal_ = add_param("audio.no_signal", 1, config_.audio_dim, 0.1);
    audio_gru_ = make_bigru("audio", config_.audio_dim, config_.audio_hidden);
  }
  if (config_.use_video) {
    video_no_signal_ = add_param("video.no_signal", 1, config_.video_dim, 0.1);
    video_gru_ = make_bigru("video", config_.video_dim, config_.video_hidden);
  }
  fusion_gru_ = make_bigru("fusion", config_.fusion_input_dim(), config_.fusion_hidden);

  const std::size_t D = 2 * config_.fusion_hidden, A = config_.attention_dim;
  auto xavier = [](std::size_t in, std::size_t out) {
    return std::sqrt(6.0 / static_cast<double>(in + out));
  };
  attn_w_ = add_param("attention.w", 2 * D, A, xavier(2 * D, A));
  attn_b_ = add_param("attention.b", 1, A, 0.0);
  attn_v_ = add_param("attention.v", A, 1, xavier(A, 1));
  out_w_ = add_param("output.w", 2 * D, tagset_.size(), xavier(2 * D, tagset_.size()));
  out_b_ = add_param("output.b", 1, tagset_.size(), 0.0);
  if (config_.use_crf) {
    transitions_ = add_param("crf.transitions", tagset_.size() + 2, tagset_.size() + 2, 0.1);
  }
  if (config_.setting == Setting::kJsl) {
    const std::size_t h1 = config_.head_hidden1, h2 = config_.head_hidden2;
    const std::size_t k = config_.sentiments.size();
    head_w1_ = add_param("head.w1", D, h1, xavier(D, h1));
    head_b1_ = add_param("head.b1", 1, h1, 0.0);
    head_w2_ = add_param("head.w2", h1, h2, xavier(h1, h2));
    head_b2_ = add_param("head.b2", 1, h2, 0.0);
    head_w3_ = add_param("head.w3", h2, k, xavier(h2, k));
    head_b3_ = add_param("head.b3", 1, k, 0.0);
  }
}

ad::Tensor Model::add_param(const std::string& name, std::size_t rows, std::size_t cols,
                            double range) {
  ad::Tensor t = ad::Tensor::zeros(rows, cols, true);
  if (range > 0.0) {
    std::uniform_real_distribution<double> dist(-range, range);
    for (auto& v : t.mutable_values()) v = dist(init_rng_);
  }
  params_.emplace_back(name, t);
  return t;
}

GruCell Model::make_cell(const std::string& prefix, std::size_t in, std::size_t hidden) {
  const double range = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruCell cell;
  cell.w_x = add_param(prefix + ".w_x", in, 3 * hidden, range);
  cell.u_zr = add_param(prefix + ".u_zr", hidden, 2 * hidden, range);
  cell.u_h = add_param(prefix + ".u_h", hidden, hidden, range);
  cell.bias = add_param(prefix + ".bias", 1, 3 * hidden, range);
  return cell;
}

BiGru Model::make_bigru(const std::string& prefix, std::size_t in, std::size_t hidden) {
  BiGru gru;
  gru.forward = make_cell(prefix + ".fwd", in, hidden);
  gru.backward = make_cell(prefix + ".bwd", in, hidden);
  return gru;
}

std::vector<ad::Tensor> Model::parameters() const {
  std::vector<ad::Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

const ad::Tensor& Model::parameter(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ShapeError("model has no parameter '" + name + "'");
}

ad::Tensor Model::encode_text(std::span<const std::size_t> token_ids, bool train) {
  if (token_ids.empty()) throw ValidationError("encode_text: empty sentence");
  for (auto id : token_ids) {
    if (id >= vocab_size_) {
      throw ShapeError("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab_size_));
    }
  }
  ad::Tensor x = ad::embedding_lookup(embedding_, token_ids);
  x = ad::dropout(x, config_.dropout, train, rng_);
  return text_gru_.run(x);
}

ad::Tensor Model::encode_media(const BiGru& gru, const ad::Tensor& no_signal,
                               const FeatureSequence* seq, std::size_t dim) const {
  ad::Tensor x = (seq && !seq->empty()) ? frames_tensor(*seq, dim) : no_signal;
  return ad::mean_pool(gru.run(x), 0);
}

ad::Tensor Model::encode_audio(const FeatureSequence* seq) const {
  if (!config_.use_audio) throw ShapeError("encode_audio: model built without audio");
  return encode_media(audio_gru_, audio_no_signal_, seq, config_.audio_dim);
}

ad::Tensor Model::encode_video(const FeatureSequence* seq) const {
  if (!config_.use_video) throw ShapeError("encode_video: model built without video");
  return encode_media(video_gru_, video_no_signal_, seq, config_.video_dim);
}

ad::Tensor Model::fuse(const ad::Tensor& text_states, const ad::Tensor& audio_pooled,
                       const ad::Tensor& video_pooled, ad::Tensor* fusion_input) const {
  const std::size_t n = text_states.rows();
  if (text_states.cols() != 2 * config_.text_hidden) {
    throw ShapeError("fuse: text states " + text_states.shape_string() + ", expected width " +
                     std::to_string(2 * config_.text_hidden));
  }
  std::vector<ad::Tensor> parts{text_states};
  auto attach = [&](bool used, const ad::Tensor& pooled, std::size_t hidden, const char* what) {
    if (!used) return;
    if (!pooled.defined() || pooled.rows() != 1 || pooled.cols() != 2 * hidden) {
      throw ShapeError(std::string("fuse: pooled ") + what + " vector must be [1, " +
                       std::to_string(2 * hidden) + "]");
    }
    parts.push_back(repeat_rows(pooled, n));
  };
  attach(config_.use_audio, audio_pooled, config_.audio_hidden, "audio");
  attach(config_.use_video, video_pooled, config_.video_hidden, "video");
  ad::Tensor input = parts.size() == 1 ? text_states : ad::concat(parts, 1);
  if (fusion_input) *fusion_input = input;
  return fusion_gru_.run(input);
}

Model::Attended Model::self_attend(const ad::Tensor& fused) const {
  const std::size_t n = fused.rows(), D = fused.cols();
  // W_a [h_i; h_j] split into a query half and a key half.
  ad::Tensor q = ad::matmul(fused, ad::slice(attn_w_, 0, 0, D));
  ad::Tensor k = ad::matmul(fused, ad::slice(attn_w_, 0, D, D));
  ad::Tensor hidden = ad::tanh(ad::add_row(ad::pairwise_add(q, k), attn_b_));
  ad::Tensor scores = ad::reshape(ad::matmul(hidden, attn_v_), n, n);
  Attended out;
  out.weights = ad::softmax(scores, 1);
  out.context = ad::matmul(out.weights, fused);
  out.outputs = ad::add_row(ad::matmul(ad::concat({fused, out.context}, 1), out_w_), out_b_);
  return out;
}

ad::Tensor Model::sentence_head(const ad::Tensor& fused) const {
  if (config_.setting != Setting::kJsl) throw ShapeError("sentence_head: only the jsl setting has a head");
  ad::Tensor x = ad::mean_pool(fused, 0);
  x = ad::tanh(ad::add_row(ad::matmul(x, head_w1_), head_b1_));
  x = ad::tanh(ad::add_row(ad::matmul(x, head_w2_), head_b2_));
  x = ad::add_row(ad::matmul(x, head_w3_), head_b3_);
  return ad::log_softmax(x, 1);
}

ForwardResult Model::forward(const Example& example, bool train) {
  ForwardResult r;
  r.text_states = encode_text(example.token_ids, train);
  if (config_.use_audio) r.audio_pooled = encode_audio(example.audio ? &*example.audio : nullptr);
  if (config_.use_video) r.video_pooled = encode_video(example.video ? &*example.video : nullptr);
  r.fused = fuse(r.text_states, r.audio_pooled, r.video_pooled, &r.fusion_input);
  Attended att = self_attend(r.fused);
  r.attention = att.weights;
  r.context = att.context;
  r.emissions = att.outputs;
  if (config_.setting == Setting::kJsl) r.sentence_log_probs = sentence_head(r.fused);
  return r;
}

LossParts Model::loss(const Example& example, bool train) {
  if (example.gold_labels.size() != example.token_ids.size()) {
    throw ValidationError("example '" + example.id + "': " + std::to_string(example.gold_labels.size()) +
                          " labels for " + std::to_string(example.token_ids.size()) + " tokens");
  }
  if (config_.setting == Setting::kJsl) {
    if (!example.gold_sentiment) {
      throw ValidationError("example '" + example.id + "': jsl needs a sentence sentiment");
    }
    if (*example.gold_sentiment >= config_.sentiments.size()) {
      throw ValidationError("example '" + example.id + "': sentiment index out of range");
    }
  }
  ForwardResult r = forward(example, train);
  LossParts parts;
  parts.sequence = config_.use_crf
                       ? crf::negative_log_likelihood(r.emissions, transitions_, example.gold_labels)
                       : crf::softmax_cross_entropy(r.emissions, example.gold_labels);
  parts.total = parts.sequence;
  if (config_.setting == Setting::kJsl) {
    parts.sentence = ad::scale(ad::pick(r.sentence_log_probs, {{0, *example.gold_sentiment}}), -1.0);
    parts.total = ad::add(parts.sequence, parts.sentence);
  }
  return parts;
}

Prediction Model::predict(const Example& example) {
  ad::NoGradGuard guard;
  ForwardResult r = forward(example, false);
  Prediction p;
  p.labels = config_.use_crf ? crf::viterbi(r.emissions, transitions_) : crf::argmax_decode(r.emissions);
  if (config_.setting == Setting::kJsl) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < r.sentence_log_probs.cols(); ++k) {
      p.sentiment_probs.push_back(std::exp(r.sentence_log_probs.at(0, k)));
      if (r.sentence_log_probs.at(0, k) > r.sentence_log_probs.at(0, best)) best = k;
    }
    p.sentiment = best;
  }
  return p;
}

void Model::save(const std::filesystem::path& path) const {
  nlohmann::json header{{"config", config_.to_json()}, {"vocab_size", vocab_size_}};
  save_checkpoint(path, params_, header);
}

void Model::load(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  const auto& header = ckpt.header;
  if (!header.contains("config") || ModelConfig::from_json(header.at("config")) != config_) {
    throw ValidationError(path.string() + ": checkpoint was written with a different model configuration");
  }
  if (header.value("vocab_size", std::size_t{0}) != vocab_size_) {
    throw ValidationError(path.string() + ": checkpoint vocabulary size differs from the model's");
  }
  load_checkpoint(path, params_);
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].second.mutable_values();
    if (values[i].size() != dst.size()) throw ShapeError("restore: size mismatch for " + params_[i].first);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace mmom

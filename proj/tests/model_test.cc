#include <filesystem>

#include "doctest.h"
#include "mmom/crf.h"
#include "mmom/errors.h"
#include "mmom/model.h"
#include "oracles.h"

using namespace mmom;
using ad::Tensor;

namespace {

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
  return out;
}

Tensor random(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = n(rng);
  return Tensor::from(r, c, v);
}

ModelConfig small_config(Setting setting, bool media) {
  ModelConfig c;
  c.setting = setting;
  c.use_audio = c.use_video = media;
  c.embedding_dim = 6;
  c.text_hidden = 4;
  c.audio_hidden = c.video_hidden = 3;
  c.fusion_hidden = 5;
  c.attention_dim = 4;
  c.audio_dim = 7;
  c.video_dim = 5;
  c.head_hidden1 = 6;
  c.head_hidden2 = 4;
  c.dropout = 0.0;
  return c;
}

FeatureSequence frames(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  FeatureSequence f;
  f.dim = dim;
  std::normal_distribution<double> d;
  f.frames.assign(n, std::vector<double>(dim));
  for (auto& fr : f.frames)
    for (auto& v : fr) v = d(rng);
  return f;
}

}  // namespace

TEST_SUITE("crf") {
  TEST_CASE("score by hand") {
    auto e = Tensor::from(1, 3, {0.5, 1.5, -1});
    CHECK(crf::score(e, Tensor::zeros(5, 5), std::vector<std::size_t>{1}).item() == 1.5);
    // Two steps: START->0, 0->2, 2->STOP plus emissions.
    auto e2 = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
    std::vector<double> t(25, 0.0);
    t[3 * 5 + 0] = 0.25;  // START -> 0
    t[0 * 5 + 2] = -1.0;  // 0 -> 2
    t[2 * 5 + 4] = 2.0;   // 2 -> STOP
    CHECK(crf::score(e2, Tensor::from(5, 5, t), std::vector<std::size_t>{0, 2}).item() == 1 + 6 + 0.25 - 1 + 2);
  }

  TEST_CASE("single label has zero loss") {
    auto e = Tensor::from(3, 1, {0.3, -2, 5});
    std::mt19937_64 rng(1);
    CHECK(std::abs(crf::negative_log_likelihood(e, random(3, 3, rng), std::vector<std::size_t>{0, 0, 0}).item()) <
          1e-12);
  }

  TEST_CASE("forward and viterbi agree with enumeration") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 30; ++i) {
      const std::size_t n = 1 + i % 5, L = 2 + i % 3;
      auto e = random(n, L, rng), t = random(L + 2, L + 2, rng);
      CHECK(std::abs(crf::log_partition(e, t).item() - oracle::brute_log_z(rows_of(e), rows_of(t))) < 1e-9);
      CHECK(crf::viterbi(e, t) == oracle::brute_argmax(rows_of(e), rows_of(t)));
    }
  }

  TEST_CASE("zero transitions decode per position") {
    std::mt19937_64 rng(2);
    auto e = random(6, 4, rng);
    CHECK(crf::viterbi(e, Tensor::zeros(6, 6)) == crf::argmax_decode(e));
  }

  TEST_CASE("forbidden transitions never decoded") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
      auto e = random(6, 3, rng);
      std::vector<double> t(25, 0.0);
      t[0 * 5 + 2] = -1e4;  // O -> I
      t[3 * 5 + 2] = -1e4;  // START -> I
      auto path = crf::viterbi(e, Tensor::from(5, 5, t));
      CHECK(path[0] != 2);
      for (std::size_t k = 1; k < path.size(); ++k) CHECK_FALSE((path[k - 1] == 0 && path[k] == 2));
    }
  }

  TEST_CASE("marginals sum to one") {
    std::mt19937_64 rng(9);
    auto m = crf::marginals(random(4, 3, rng), random(5, 5, rng));
    for (const auto& row : m) CHECK(row[0] + row[1] + row[2] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("softmax cross entropy") {
    CHECK(crf::softmax_cross_entropy(Tensor::zeros(2, 3), std::vector<std::size_t>{0, 2}).item() ==
          doctest::Approx(std::log(3.0)));
    double previous = 1e9;
    for (double margin : {0.0, 1.0, 2.0, 4.0, 8.0}) {
      auto e = Tensor::from(1, 3, {margin, 0, 0});
      double loss = crf::softmax_cross_entropy(e, std::vector<std::size_t>{0}).item();
      CHECK(loss < previous);
      previous = loss;
    }
  }
}

TEST_SUITE("model") {
  TEST_CASE("fusion input width") {
    ModelConfig c;
    CHECK(c.fusion_input_dim() == 300);
    c.use_audio = c.use_video = true;
    c.audio_hidden = c.video_hidden = 128;
    CHECK(c.fusion_input_dim() == 812);
  }

  TEST_CASE("bigru shapes") {
    ModelConfig c;
    Model m(c, 10, 1);
    std::vector<std::size_t> ids = {2, 3, 4, 5, 6, 7, 8};
    CHECK(m.encode_text(ids, false).shape() == std::vector<std::size_t>{7, 300});
  }

  TEST_CASE("single step bigru sees one input both ways") {
    GruCell cell;
    std::mt19937_64 rng(3);
    cell.w_x = random(2, 9, rng);
    cell.u_zr = random(3, 6, rng);
    cell.u_h = random(3, 3, rng);
    cell.bias = random(1, 9, rng);
    BiGru bi{cell, cell};
    auto x = random(1, 2, rng);
    auto h = bi.run(x);
    for (std::size_t k = 0; k < 3; ++k) CHECK(h.at(0, k) == h.at(0, k + 3));
  }

  TEST_CASE("gru recurrence by hand") {
    std::mt19937_64 rng(5);
    GruCell cell{random(2, 3, rng), random(1, 2, rng), random(1, 1, rng), random(1, 3, rng)};
    auto x = random(2, 2, rng);
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    double h = 0.0;
    auto W = [&](std::size_t i, std::size_t j) { return cell.w_x.at(i, j); };
    std::vector<double> want;
    for (std::size_t t = 0; t < 2; ++t) {
      double z = sig(x.at(t, 0) * W(0, 0) + x.at(t, 1) * W(1, 0) + h * cell.u_zr.at(0, 0) + cell.bias.at(0, 0));
      double r = sig(x.at(t, 0) * W(0, 1) + x.at(t, 1) * W(1, 1) + h * cell.u_zr.at(0, 1) + cell.bias.at(0, 1));
      double c = std::tanh(x.at(t, 0) * W(0, 2) + x.at(t, 1) * W(1, 2) + (r * h) * cell.u_h.at(0, 0) + cell.bias.at(0, 2));
      h = (1 - z) * h + z * c;
      want.push_back(h);
    }
    auto got = cell.run(x, false);
    CHECK(got.at(0, 0) == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(got.at(1, 0) == doctest::Approx(want[1]).epsilon(1e-12));
  }

  TEST_CASE("media pooling is the mean of states") {
    auto cfg = small_config(Setting::kSimple, true);
    Model m(cfg, 8, 2);
    std::mt19937_64 rng(6);
    auto seq = frames(3, cfg.audio_dim, rng);
    auto pooled = m.encode_audio(&seq);
    std::vector<double> flat;
    for (const auto& f : seq.frames) flat.insert(flat.end(), f.begin(), f.end());
    BiGru gru;
    auto& p = m.named_parameters();
    auto get = [&](const std::string& n) {
      for (auto& [name, t] : p)
        if (name == n) return t;
      FAIL("missing " << n);
      return Tensor();
    };
    gru.forward = {get("audio.fwd.w_x"), get("audio.fwd.u_zr"), get("audio.fwd.u_h"), get("audio.fwd.bias")};
    gru.backward = {get("audio.bwd.w_x"), get("audio.bwd.u_zr"), get("audio.bwd.u_h"), get("audio.bwd.bias")};
    auto states = gru.run(Tensor::from(3, cfg.audio_dim, flat));
    for (std::size_t k = 0; k < pooled.cols(); ++k) {
      double mean = (states.at(0, k) + states.at(1, k) + states.at(2, k)) / 3.0;
      CHECK(std::abs(pooled.at(0, k) - mean) < 1e-12);
    }
    auto one = frames(1, cfg.audio_dim, rng);
    auto single = m.encode_audio(&one);
    std::vector<double> one_flat = one.frames[0];
    auto s1 = gru.run(Tensor::from(1, cfg.audio_dim, one_flat));
    for (std::size_t k = 0; k < single.cols(); ++k) CHECK(single.at(0, k) == s1.at(0, k));
  }

  TEST_CASE("attention is a convex combination") {
    auto cfg = small_config(Setting::kSimple, false);
    Model m(cfg, 8, 3);
    std::mt19937_64 rng(8);
    auto fused = random(3, 2 * cfg.fusion_hidden, rng);
    auto att = m.self_attend(fused);
    for (std::size_t i = 0; i < 3; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < 3; ++j) total += att.weights.at(i, j);
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (std::size_t k = 0; k < fused.cols(); ++k) {
        double mix = 0;
        for (std::size_t j = 0; j < 3; ++j) mix += att.weights.at(i, j) * fused.at(j, k);
        CHECK(std::abs(att.context.at(i, k) - mix) < 1e-12);
      }
    }
    auto single = m.self_attend(random(1, 2 * cfg.fusion_hidden, rng));
    CHECK(single.weights.at(0, 0) == 1.0);
  }

  TEST_CASE("text-only model ignores media") {
    auto cfg = small_config(Setting::kSimple, false);
    Model a(cfg, 8, 4), b(cfg, 8, 4);
    std::mt19937_64 rng(1);
    Example plain{"x", {2, 3, 4}, {1, 2, 0}, std::nullopt, std::nullopt, std::nullopt};
    Example with_media = plain;
    with_media.audio = frames(2, 7, rng);
    with_media.video = frames(2, 5, rng);
    CHECK(a.loss(plain, false).total.item() == b.loss(with_media, false).total.item());
  }

  TEST_CASE("emission shift leaves decoding and posteriors") {
    std::mt19937_64 rng(12);
    auto e = random(4, 3, rng), t = random(5, 5, rng);
    std::vector<double> shifted(e.values().begin(), e.values().end());
    for (std::size_t c = 0; c < 3; ++c) shifted[2 * 3 + c] += 7.5;
    auto e2 = Tensor::from(4, 3, shifted);
    CHECK(crf::viterbi(e, t) == crf::viterbi(e2, t));
    auto m1 = crf::marginals(e, t), m2 = crf::marginals(e2, t);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(m1[i][j] - m2[i][j]) < 1e-12);
  }

  TEST_CASE("full model gradients on a small instance") {
    for (Setting s : {Setting::kSimple, Setting::kCal, Setting::kCsl, Setting::kJsl}) {
      auto cfg = small_config(s, true);
      Model m(cfg, 6, 5);
      std::mt19937_64 rng(2);
      Example ex{"x", {2, 3, 4}, {1, 2 % m.tagset().size(), 0}, std::nullopt, frames(2, 7, rng), frames(2, 5, rng)};
      if (s == Setting::kJsl) ex.gold_sentiment = 2;
      ad::backward(m.loss(ex, false).total);
      auto f = [&] {
        ad::NoGradGuard g;
        return m.loss(ex, false).total.item();
      };
      for (auto& [name, t] : m.named_parameters()) {
        auto grad = t.grad();
        auto v = t.mutable_values();
        for (std::size_t k = 0; k < v.size(); k += 1 + v.size() / 16) {
          CHECK_MESSAGE(oracle::relative_error(grad[k], oracle::central_difference(v, k, 1e-5, f), 1e-4) < 1e-4,
                        to_string(s) << " " << name << "[" << k << "]");
        }
      }
    }
  }

  TEST_CASE("predict and sentence head") {
    auto cfg = small_config(Setting::kJsl, false);
    Model m(cfg, 6, 9);
    Example ex{"x", {2, 3}, {}, std::nullopt, std::nullopt, std::nullopt};
    auto p = m.predict(ex);
    CHECK(p.labels.size() == 2);
    REQUIRE(p.sentiment);
    double total = 0;
    for (double q : p.sentiment_probs) total += q;
    CHECK(total == doctest::Approx(1.0));
  }

  TEST_CASE("checkpoint refuses another configuration") {
    auto p = std::filesystem::temp_directory_path() / "mmom-model-ckpt.bin";
    auto cfg = small_config(Setting::kCal, false);
    Model a(cfg, 6, 1);
    a.save(p);
    Model b(cfg, 6, 2);
    b.load(p);
    CHECK(a.snapshot() == b.snapshot());
    auto other = cfg;
    other.use_crf = false;
    Model c(other, 6, 1);
    CHECK_THROWS_AS(c.load(p), ValidationError);
    Model d(cfg, 7, 1);
    CHECK_THROWS_AS(d.load(p), ValidationError);
    std::filesystem::remove(p);
  }

  TEST_CASE("config json round trip") {
    auto cfg = small_config(Setting::kCsl, true);
    cfg.sentiments = {SentimentClass::kNegative, SentimentClass::kPositive};
    CHECK(ModelConfig::from_json(cfg.to_json()) == cfg);
  }
}

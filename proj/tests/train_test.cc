#include <set>

#include "doctest.h"
#include "mmom/errors.h"
#include "mmom/synth.h"
#include "mmom/train.h"

using namespace mmom;

namespace {

TrainConfig tiny(Setting s) {
  TrainConfig c;
  c.model.setting = s;
  c.model.embedding_dim = 8;
  c.model.text_hidden = 6;
  c.model.fusion_hidden = 6;
  c.model.attention_dim = 4;
  c.model.head_hidden1 = 6;
  c.model.head_hidden2 = 4;
  c.model.dropout = 0.0;
  c.max_epochs = 3;
  return c;
}

std::vector<Sentence> synth_sentences(std::size_t n, bool modal_only = false) {
  SynthOptions o;
  o.sentences = n;
  o.modal_only = modal_only;
  return make_synth(o).sentences;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("folds partition the corpus") {
    auto plan = make_fold_plan(23, 5, 9);
    std::set<std::size_t> seen;
    std::size_t smallest = 100, largest = 0;
    for (std::size_t f = 0; f < 5; ++f) {
      auto m = plan.members(f);
      smallest = std::min(smallest, m.size());
      largest = std::max(largest, m.size());
      for (auto i : m) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 23);
    CHECK(largest - smallest <= 1);
    CHECK_THROWS_AS(make_fold_plan(3, 5, 1), ValidationError);
  }

  TEST_CASE("fold split carves validation from training") {
    auto s = synth_sentences(40);
    auto plan = make_fold_plan(s.size(), 5, 1);
    auto split = fold_split(s, plan, 2, 0.1, 1);
    CHECK(split.test.size() == 8);
    CHECK(split.valid.size() == 3);
    CHECK(split.train.size() == 29);
    std::set<std::string> ids;
    for (const auto* part : {&split.train, &split.valid, &split.test})
      for (const auto& x : *part) CHECK(ids.insert(x.id).second);
  }

  TEST_CASE("settings prepare their tags") {
    auto s = synth_sentences(12);
    auto simple = prepare_for_setting(s, tiny(Setting::kSimple));
    CHECK(simple[0].gold->scheme == Scheme::kAspect);
    auto cal = prepare_for_setting(s, tiny(Setting::kCal));
    CHECK(cal[0].gold->scheme == Scheme::kCollapsed);
    auto modal = synth_sentences(6, true);
    CHECK_THROWS_AS(prepare_for_setting(modal, tiny(Setting::kCal)), ValidationError);
    for (auto& x : modal) x.sentiment.reset();
    CHECK_THROWS_AS(prepare_for_setting(modal, tiny(Setting::kJsl)), ValidationError);
  }

  TEST_CASE("config validation and json") {
    auto c = tiny(Setting::kJsl);
    CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
    c.batch_size = 0;
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("same seed, same first losses") {
    auto cfg = tiny(Setting::kSimple);
    cfg.max_steps = 3;
    auto s = prepare_for_setting(synth_sentences(20), cfg);
    auto vocab = build_vocab(s);
    auto ex = make_examples(s, vocab, tagset_for(cfg.model), cfg.model, nullptr, 8);
    auto a = train(cfg, ex, {}, vocab.size());
    auto b = train(cfg, ex, {}, vocab.size());
    CHECK(a.step_losses.size() == 3);
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.epochs.size() == 1);
  }

  TEST_CASE("patience stops after non-improving epochs") {
    auto cfg = tiny(Setting::kSimple);
    cfg.max_epochs = 50;
    cfg.patience = 2;
    cfg.adam.learning_rate = 1e-12;
    auto s = prepare_for_setting(synth_sentences(10), cfg);
    auto vocab = build_vocab(s);
    auto ex = make_examples(s, vocab, tagset_for(cfg.model), cfg.model, nullptr, 8);
    auto r = train(cfg, ex, ex, vocab.size());
    CHECK(r.early_stopped);
    CHECK(r.epochs.size() == r.best_epoch + 2);
    double best = -1;
    for (const auto& e : r.epochs) best = std::max(best, e.selection_f1);
    CHECK(r.best_f1 == best);
    CHECK(aspect_f1(r.model, ex) == best);
  }

  TEST_CASE("media extraction follows spans") {
    SynthOptions o;
    o.sentences = 4;
    auto d = make_synth(o);
    d.sentences[1].time_span.reset();
    auto m = extract_media(d.sentences, &d.audio, &d.video);
    CHECK(m.audio.size() == 3);
    CHECK(m.video.size() == 3);
    CHECK_FALSE(m.audio.count(d.sentences[1].id));
    CHECK(m.video.at(d.sentences[0].id).dim == o.video_dim);
  }

  TEST_CASE("cross validation labels and predictions file") {
    auto cfg = tiny(Setting::kCal);
    cfg.max_epochs = 1;
    auto s = prepare_for_setting(synth_sentences(15), cfg);
    std::vector<std::string> files;
    auto agg = cross_validate(cfg, s, nullptr, std::nullopt, 3, 2, [&](std::size_t, const std::string&, RunOutput& run) {
      files.push_back(predictions_conll(run.test_sentences, run.test));
    });
    CHECK(agg.labels == std::vector<std::string>{"fold-1", "fold-2", "fold-3"});
    CHECK(agg.ae_f1().size() == 3);
    REQUIRE(files.size() == 3);
    CHECK(files[0].find(" B-") != std::string::npos);
  }

  TEST_CASE("parallel runner propagates failures") {
    CHECK_THROWS(run_parallel(4, 2, [](std::size_t i) {
      if (i == 2) throw std::runtime_error("boom");
    }));
    std::vector<int> done(5, 0);
    run_parallel(5, 3, [&](std::size_t i) { done[i] = 1; });
    CHECK(done == std::vector<int>(5, 1));
  }
}

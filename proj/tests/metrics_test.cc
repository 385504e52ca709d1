#include "doctest.h"
#include "mmom/errors.h"
#include "mmom/metrics.h"
#include "mmom/stats.h"
#include "oracles.h"

using namespace mmom;

namespace {

TagSequence ae(std::initializer_list<const char*> names) {
  std::vector<Tag> t;
  for (const char* n : names) t.push_back(*parse_tag(n));
  return aspect_sequence(t);
}

TagSequence col(std::initializer_list<const char*> names) {
  auto s = ae(names);
  s.scheme = Scheme::kCollapsed;
  return s;
}

constexpr auto P = SentimentClass::kPositive;
constexpr auto N = SentimentClass::kNegative;
constexpr auto U = SentimentClass::kNeutral;

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("chunk scores") {
    auto s = evaluate_chunks({ae({"B", "I", "O"})}, {ae({"B", "I", "O"})}, false).prf();
    CHECK(s.precision == 1.0);
    CHECK(s.f1 == 1.0);
    s = evaluate_chunks({ae({"B", "I", "O"})}, {ae({"B", "O", "O"})}, false).prf();
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
    s = evaluate_chunks({ae({"B", "O", "B"})}, {ae({"B", "O", "O"})}, false).prf();
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(conlleval_percent(2.0 / 3.0) == " 66.67");
  }

  TEST_CASE("collapsed chunks need the sentiment") {
    auto s = evaluate_chunks({col({"B-POS", "O"})}, {col({"B-NEG", "O"})}, true);
    CHECK(s.correct == 0);
    CHECK(evaluate_chunks({col({"B-POS", "O"})}, {col({"B-NEG", "O"})}, false).correct == 1);
  }

  TEST_CASE("mismatched lengths are rejected") {
    CHECK_THROWS(evaluate_chunks({ae({"B"})}, {}, false));
    CHECK_THROWS(evaluate_chunks({ae({"B"})}, {ae({"B", "O"})}, false));
  }

  TEST_CASE("sentence sentiment confusion") {
    auto s = evaluate_sentence_sentiment({P, P, P}, {P, P, N});
    CHECK(s.class_prf(P).precision == 1.0);
    CHECK(s.class_prf(P).recall == doctest::Approx(2.0 / 3.0));
    CHECK(*s.accuracy() == doctest::Approx(2.0 / 3.0));
    // Neutral never appears, so the macro average covers two classes.
    auto macro = *s.macro();
    CHECK(macro.f1 == doctest::Approx((0.8 + 0.0) / 2.0));
    auto perfect = evaluate_sentence_sentiment({P, N, U}, {P, N, U});
    for (auto c : {P, N, U}) CHECK(perfect.class_prf(c).f1 == 1.0);
  }

  TEST_CASE("chunk sentiment") {
    auto s = evaluate_chunk_sentiment({col({"B-POS", "O", "B-NEG"})}, {col({"B-POS", "O", "B-POS"})});
    CHECK(s.counts.at(P).correct == 1);
    CHECK(s.counts.at(P).predicted == 2);
    CHECK(s.counts.at(N).gold == 1);
  }

  TEST_CASE("sentence class from tags") {
    CHECK(sentence_sentiment_from_tags(col({"B-NEG", "O", "B-POS", "B-POS"})) == P);
    CHECK(sentence_sentiment_from_tags(col({"B-NEG", "O", "B-POS"})) == N);
    CHECK(sentence_sentiment_from_tags(col({"O", "O"})) == U);
  }

  TEST_CASE("report json and means") {
    MetricsReport a, b;
    a.ae = {1.0, 0.5, 2.0 / 3.0};
    b.ae = {0.0, 0.0, 0.0};
    auto j = a.to_json();
    CHECK(j["ae_f1"].get<double>() == doctest::Approx(2.0 / 3.0));
    auto m = mean_report_json({a, b});
    CHECK(m["ae_precision"].get<double>() == 0.5);
  }
}

TEST_SUITE("stats") {
  TEST_CASE("t-test reference values") {
    auto t = paired_ttest({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
    CHECK(t.t == doctest::Approx(4.2426).epsilon(1e-4));
    CHECK(t.df == 4.0);
    CHECK(t.p == doctest::Approx(0.0132).epsilon(0.01));
    // Published two-sided critical values: p = 0.05 at t = 2.776 (df 4),
    // p = 0.01 at t = 3.169 (df 10).
    CHECK(student_t_two_sided(2.776, 4) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(student_t_two_sided(3.169, 10) == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(student_t_two_sided(0.0, 7) == doctest::Approx(1.0));
  }

  TEST_CASE("incomplete beta closed forms") {
    CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3));
    CHECK(incomplete_beta(2, 1, 0.5) == doctest::Approx(0.25));
    CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5));
    CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(incomplete_beta(3, 4, 1.0) == 1.0);
  }

  TEST_CASE("sentinels") {
    CHECK(paired_ttest({1, 2, 3}, {1, 2, 3}).kind == TTestResult::Kind::kNoDifference);
    auto c = paired_ttest({2, 3, 4}, {1, 2, 3});
    CHECK(c.kind == TTestResult::Kind::kZeroVariance);
    CHECK(c.p == 0.0);
    CHECK_FALSE(c.warning.empty());
    CHECK_THROWS_AS(paired_ttest({1}, {2}), ShapeError);
    CHECK_THROWS_AS(paired_ttest({1, 2}, {2}), ShapeError);
  }
}

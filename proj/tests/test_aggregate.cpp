#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "test_support.hpp"

using namespace steerconf;

namespace {

SteeredResponseSet make_set(const std::vector<double>& conf, const std::vector<std::string>& answers, int depth = 2) {
  std::vector<Elicitation> es;
  for (size_t i = 0; i < conf.size(); ++i) {
    Elicitation e;
    e.answer = answers[i];
    e.confidence = conf[i];
    e.level = static_cast<int>(i) - depth;
    e.valid = true;
    e.reason = ParseFailure::none;
    es.push_back(e);
  }
  return SteeredResponseSet("q", depth, es);
}

const AnswerKeyFn kText = answer_key_fn(AnswerType::free_text);

}  // namespace

TEST(Aggregate, WorkedExample) {
  const auto set = make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"A", "A", "B", "A", "C"});
  const auto r = calibrate(set, kText);
  EXPECT_NEAR(r.mu_c, 0.8, 1e-12);
  EXPECT_NEAR(r.sigma_c, 0.1414214, 1e-6);
  // exact closed forms; the rounded fixture 0.8497573 / 0.4078835 is off by 2e-5
  const double kappa = 1.0 / (1.0 + std::sqrt(0.02) / 0.8);
  EXPECT_NEAR(r.kappa_conf, kappa, 1e-12);
  EXPECT_NEAR(r.kappa_conf, 0.8497789, 1e-6);
  EXPECT_NEAR(r.kappa_ans, 0.6, 1e-12);
  EXPECT_NEAR(r.c_final, 0.8 * 0.6 * kappa, 1e-12);
  EXPECT_NEAR(r.c_final, 0.4078939, 1e-6);
  // c below c_min = 0.6 -> most cautious level
  EXPECT_EQ(r.selected_level, -2);
  EXPECT_EQ(r.selected_answer, "A");
  EXPECT_FALSE(r.degenerate);
}

TEST(Aggregate, MeanStdAndConsistencyExamples) {
  EXPECT_NEAR(mean_confidence(make_set({0.5, 0.5, 0.5, 0.5, 0.5}, {"a", "a", "a", "a", "a"})), 0.5, 1e-15);
  EXPECT_EQ(mean_confidence(make_set({0, 0, 0, 0, 0}, {"a", "a", "a", "a", "a"})), 0.0);
  EXPECT_EQ(std_confidence(make_set({0.3, 0.3, 0.3, 0.3, 0.3}, {"a", "a", "a", "a", "a"})), 0.0);
  EXPECT_NEAR(std_confidence(make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"a", "a", "a", "a", "a"})), std::sqrt(0.02), 1e-12);
  EXPECT_NEAR(confidence_consistency(0.8, 0.1414214), 1.0 / (1.0 + 0.1414214 / 0.8), 1e-12);
  EXPECT_EQ(confidence_consistency(0.0, 0.0), 1.0);
  EXPECT_EQ(confidence_consistency(0.7, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(confidence_consistency(0.5, 0.5), 0.5);
  EXPECT_NEAR(calibrated_confidence(0.8, 0.6, 0.8497789), 0.8 * 0.6 * 0.8497789, 1e-12);
  EXPECT_DOUBLE_EQ(calibrated_confidence(0.37, 1.0, 1.0), 0.37);
  EXPECT_EQ(calibrated_confidence(0.0, 0.4, 0.9), 0.0);
}

TEST(Aggregate, AnswerConsistencyExamples) {
  auto ac = answer_consistency(make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"A", "A", "B", "A", "C"}), kText);
  EXPECT_DOUBLE_EQ(ac.kappa_ans, 0.6);
  EXPECT_EQ(ac.modal_answer, "A");
  ac = answer_consistency(make_set({0.5, 0.5, 0.5, 0.5, 0.5}, {"x", "x", "x", "x", "x"}), kText);
  EXPECT_DOUBLE_EQ(ac.kappa_ans, 1.0);
  ac = answer_consistency(make_set({0.5, 0.5, 0.5, 0.5, 0.5}, {"a", "b", "c", "d", "e"}), kText);
  EXPECT_DOUBLE_EQ(ac.kappa_ans, 0.2);
  EXPECT_EQ(ac.modal_answer, "a");
  // equivalence uses the answer type's normalization
  ac = answer_consistency(make_set({0.5, 0.5, 0.5, 0.5, 0.5}, {"(B)", "b", "B) beta", "A", "C"}),
                          answer_key_fn(AnswerType::multiple_choice_letter));
  EXPECT_DOUBLE_EQ(ac.kappa_ans, 0.6);
}

TEST(Aggregate, SelectionRuleTraces) {
  // c_min 0.2, c_max 1.0, c_final 0.6 -> b = floor(0.5 * 5) = 2 -> level 0
  const auto set = make_set({0.2, 0.4, 0.5, 0.7, 1.0}, {"m2", "m1", "v", "p1", "p2"});
  auto sel = select_answer(set, 0.6);
  EXPECT_EQ(sel.level, 0);
  EXPECT_EQ(sel.answer, "v");
  sel = select_answer(set, 0.2);
  EXPECT_EQ(sel.level, -2);
  EXPECT_EQ(sel.answer, "m2");
  sel = select_answer(set, 0.1);
  EXPECT_EQ(sel.level, -2);
  sel = select_answer(set, 1.0);
  EXPECT_EQ(sel.level, 2);

  const auto flat = make_set({0.9, 0.9, 0.9, 0.9, 0.9}, {"x", "x", "x", "x", "x"});
  const auto r = calibrate(flat, kText);
  EXPECT_DOUBLE_EQ(r.mu_c, 0.9);
  EXPECT_EQ(r.kappa_conf, 1.0);
  EXPECT_EQ(r.kappa_ans, 1.0);
  EXPECT_DOUBLE_EQ(r.c_final, 0.9);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.selected_level, 0);
}

TEST(Aggregate, MajorityTieBreaks) {
  // [A,A,B,B,C] with A mean 0.80 and B mean 0.85
  auto m = select_answer_majority(make_set({0.8, 0.8, 0.85, 0.85, 0.1}, {"A", "A", "B", "B", "C"}), kText);
  EXPECT_EQ(m.answer, "B");
  m = select_answer_majority(make_set({0.1, 0.1, 0.1, 0.99, 0.99}, {"A", "A", "A", "B", "C"}), kText);
  EXPECT_EQ(m.answer, "A");
  // equal means: the class seen at the lower level wins
  m = select_answer_majority(make_set({0.8, 0.8, 0.8, 0.8, 0.3}, {"B", "A", "A", "B", "C"}), kText);
  EXPECT_EQ(m.answer, "B");
  m = select_answer_majority(make_set({0.8, 0.8, 0.8, 0.8, 0.3}, {"A", "B", "B", "A", "C"}), kText);
  EXPECT_EQ(m.answer, "A");
  const auto set = make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"A", "A", "B", "A", "C"});
  EXPECT_DOUBLE_EQ(select_answer_majority(set, kText).confidence, calibrate(set, kText).c_final);
}

TEST(Aggregate, SetValidation) {
  EXPECT_THROW(make_set({0.5, 0.5, 0.5, 0.5}, {"a", "a", "a", "a"}), Error);
  EXPECT_THROW(make_set({0.5, 0.5, 0.5, 0.5, 1.5}, {"a", "a", "a", "a", "a"}), Error);
  std::vector<Elicitation> es(5);
  for (int i = 0; i < 5; ++i) es[i] = {"a", 0.5, 0, 0, true, ParseFailure::none, 1, ""};
  EXPECT_THROW(SteeredResponseSet("q", 2, es), Error);  // all level 0
  for (int i = 0; i < 5; ++i) es[i].level = 2 - i;      // reversed order is accepted
  EXPECT_NO_THROW(SteeredResponseSet("q", 2, es));
  es[1].valid = false;
  EXPECT_THROW(SteeredResponseSet("q", 2, es), Error);
}

TEST(Aggregate, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> alphabet = {"A", "B", "C"};
  for (int t = 0; t < 2000; ++t) {
    oracle::Steered s;
    for (int i = 0; i < 5; ++i) {
      s.conf.push_back(static_cast<double>(rng() % 21) * 0.05);
      s.answers.push_back(alphabet[rng() % 3]);
    }
    const auto want = oracle::calibrate(s, 2);
    const auto got = calibrate(make_set(s.conf, s.answers), kText);
    ASSERT_NEAR(got.mu_c, want.mu, 1e-12);
    ASSERT_NEAR(got.sigma_c, want.sigma, 1e-12);
    ASSERT_NEAR(got.kappa_conf, want.kappa_conf, 1e-12);
    ASSERT_NEAR(got.kappa_ans, want.kappa_ans, 1e-12);
    ASSERT_NEAR(got.c_final, want.c, 1e-12);
    ASSERT_EQ(got.selected_level, want.level);
    ASSERT_EQ(got.degenerate, want.degenerate);
    ASSERT_LE(got.c_final, got.mu_c + 1e-15);
  }
}

TEST(Aggregate, SelectionMonotoneInCFinal) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> conf;
    for (int i = 0; i < 5; ++i) conf.push_back(static_cast<double>(rng() % 101) / 100.0);
    const auto set = make_set(conf, {"a", "b", "c", "d", "e"});
    int prev = -3;
    for (int k = 0; k <= 100; ++k) {
      const int level = select_answer(set, k / 100.0).level;
      ASSERT_GE(level, prev);
      prev = level;
    }
  }
}

TEST(Aggregate, CalibrationJsonFields) {
  const auto j = to_json(calibrate(make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"A", "A", "B", "A", "C"}), kText));
  for (const char* k : {"question_id", "mu_c", "sigma_c", "kappa_conf", "kappa_ans", "c_final", "selected_level",
                        "selected_answer", "degenerate"})
    EXPECT_TRUE(j.contains(k)) << k;
}

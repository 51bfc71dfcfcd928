#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace steerconf;
using testing_support::ScriptedTransport;

namespace {

BaselineSampleSet samples(const std::vector<std::string>& answers, const std::vector<double>& conf) {
  BaselineSampleSet s{"q", BaselineMethod::self_random, {}, static_cast<int>(answers.size())};
  for (size_t i = 0; i < answers.size(); ++i)
    s.samples.push_back({answers[i], conf[i], 0, static_cast<int>(i), true, ParseFailure::none, 1, ""});
  return s;
}

const AnswerKeyFn kLetter = answer_key_fn(AnswerType::multiple_choice_letter);

struct SimFixture {
  SimFixture(double noise, double flip = 0.0) {
    ds.records.push_back(testing_support::mc_record("q1", "B"));
    SimProfile p;
    p.p_correct = 0.0;  // unknown question: answers vary per sample
    p.base_confidence = 0.6;
    p.noise_scale = noise;
    p.steering_flip_prob = flip;
    client = std::make_unique<Client>(testing_support::fast_config(2),
                                      std::make_unique<SimulatedTransport>(p, 17, std::vector<const Dataset*>{&ds}));
  }
  Dataset ds{"d", {}};
  std::unique_ptr<Client> client;
};

}  // namespace

TEST(Baselines, ConsistencyAggregateExamples) {
  auto a = consistency_aggregate(samples({"A", "A", "A", "B", "B"}, {0.9, 0.9, 0.9, 0.4, 0.4}), kLetter);
  EXPECT_EQ(a.answer, "A");
  EXPECT_NEAR(a.confidence, 0.54, 1e-12);
  a = consistency_aggregate(samples({"C", "C", "C"}, {1.0, 1.0, 1.0}), kLetter);
  EXPECT_EQ(a.answer, "C");
  EXPECT_DOUBLE_EQ(a.confidence, 1.0);
  a = consistency_aggregate(samples({"D"}, {0.37}), kLetter);
  EXPECT_EQ(a.answer, "D");
  EXPECT_DOUBLE_EQ(a.confidence, 0.37);
  a = consistency_aggregate(samples({"A", "A", "A", "B", "B"}, {0.9, 0.9, 0.9, 0.4, 0.4}), kLetter,
                            AggregationRule::frequency);
  EXPECT_DOUBLE_EQ(a.confidence, 0.6);
}

TEST(Baselines, SelfRandomSampleIndices) {
  SimFixture f(0.1);
  const auto set = run_self_random(f.ds.records[0], *f.client, 5, Mode::plain, 0.7);
  ASSERT_TRUE(set.has_value());
  ASSERT_EQ(set->samples.size(), 5u);
  std::set<std::string> keys;
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(set->samples[i].sample_index, i);
    keys.insert(set->samples[i].request_key);
  }
  EXPECT_EQ(keys.size(), 5u);
}

TEST(Baselines, SelfRandomAtZeroTemperatureWarnsAndRepeats) {
  SimFixture f(0.1);
  testing_support::LogCapture logs;
  const auto set = run_self_random(f.ds.records[0], *f.client, 4, Mode::plain, 0.0);
  EXPECT_GE(logs.count(log::Level::warn), 1u);
  ASSERT_TRUE(set.has_value());
  for (const auto& s : set->samples) {
    EXPECT_EQ(s.answer, set->samples[0].answer);
    EXPECT_EQ(s.confidence, set->samples[0].confidence);
  }
}

TEST(Baselines, SelfRandomWithOneSampleEqualsVanilla) {
  SimFixture f(0.1);
  const auto set = run_self_random(f.ds.records[0], *f.client, 1, Mode::cot, 0.0);
  const auto vanilla = parse_or_retry(*f.client, build_prompt(f.ds.records[0], SteeringLevel::at(0), Mode::cot),
                                      Mode::cot, 0, 0.0);
  ASSERT_TRUE(set.has_value());
  EXPECT_EQ(set->samples[0].answer, vanilla.answer);
  EXPECT_EQ(set->samples[0].confidence, vanilla.confidence);
  EXPECT_EQ(set->samples[0].request_key, vanilla.request_key);
}

TEST(Baselines, MisleadingShapes) {
  SimFixture f(0.1, 0.5);
  const auto five = run_misleading(f.ds.records[0], *f.client, 5, Mode::plain);
  ASSERT_TRUE(five.has_value());
  EXPECT_EQ(five->samples.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(five->samples[i].sample_index, i);
  const auto one = run_misleading(f.ds.records[0], *f.client, 1, Mode::plain);
  ASSERT_TRUE(one.has_value());
  EXPECT_EQ(one->samples.size(), 1u);
  EXPECT_THROW(run_misleading(f.ds.records[0], *f.client, 9, Mode::plain), ConfigError);
}

TEST(Baselines, MostlyInvalidSetIsDropped) {
  const auto record = testing_support::mc_record();
  Client client(testing_support::fast_config(1, 0), std::make_unique<ScriptedTransport>([](const ChatRequest& r, int) {
                  return r.sample_index < 3 ? std::string("no idea") : render_response("B", 70, Mode::plain);
                }));
  testing_support::LogCapture logs;
  EXPECT_FALSE(run_self_random(record, client, 5, Mode::plain, 0.7).has_value());
  EXPECT_TRUE(logs.contains("dropped"));

  Client mostly_fine(testing_support::fast_config(1, 0),
                     std::make_unique<ScriptedTransport>([](const ChatRequest& r, int) {
                       return r.sample_index < 2 ? std::string("no idea") : render_response("B", 70, Mode::plain);
                     }));
  const auto kept = run_self_random(record, mostly_fine, 5, Mode::plain, 0.7);
  ASSERT_TRUE(kept.has_value());
  EXPECT_EQ(kept->samples.size(), 3u);
  EXPECT_EQ(kept->requested, 5);
}

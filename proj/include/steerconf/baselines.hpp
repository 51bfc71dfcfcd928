#pragma once

// Sampling baselines: Self-Random (same vanilla prompt, M samples at a
// positive temperature) and Misleading (vanilla prompt prefixed by M distinct
// wrong-answer hints), both aggregated by answer frequency.

#include <string>
#include <string_view>
#include <vector>

#include "steerconf/aggregate.hpp"
#include "steerconf/backend.hpp"
#include "steerconf/log.hpp"
#include "steerconf/parse.hpp"
#include "steerconf/prompts.hpp"

namespace steerconf {

enum class BaselineMethod { self_random, misleading, vanilla };

inline std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::self_random: return "self_random";
    case BaselineMethod::misleading: return "misleading";
    case BaselineMethod::vanilla: return "vanilla";
  }
  return "vanilla";
}

/// How sampled answers turn into one confidence.
enum class AggregationRule {
  frequency_confidence,  // modal share x mean verbalized confidence of the modal class
  frequency,             // modal share only
};

struct BaselineSampleSet {
  std::string question_id;
  BaselineMethod method = BaselineMethod::vanilla;
  std::vector<Elicitation> samples;  // all valid
  int requested = 0;                 // M before invalid samples were removed
};

struct ConsistencyAnswer {
  std::string answer;
  double confidence = 0.0;
};

inline ConsistencyAnswer consistency_aggregate(const BaselineSampleSet& set, const AnswerKeyFn& key_of,
                                               AggregationRule rule = AggregationRule::frequency_confidence) {
  if (set.samples.empty()) throw Error("consistency_aggregate on an empty sample set");
  const auto classes = answer_classes(set.samples, key_of);
  const auto& modal = modal_class(classes);
  const double share = static_cast<double>(modal.count) / static_cast<double>(set.samples.size());
  const double conf = rule == AggregationRule::frequency ? share : share * modal.mean_confidence();
  return {modal.representative, conf};
}

namespace detail {

// Keeps valid samples; nullopt when more than half of them are invalid.
inline std::optional<BaselineSampleSet> finish_samples(const QuestionRecord& record, BaselineMethod method,
                                                       std::vector<Elicitation> all) {
  BaselineSampleSet set{record.id, method, {}, static_cast<int>(all.size())};
  for (auto& e : all)
    if (e.valid) set.samples.push_back(std::move(e));
  const auto invalid = all.size() - set.samples.size();
  if (set.samples.empty() || 2 * invalid > all.size()) {
    log::warn(std::string(to_string(method)) + " set for '" + record.id + "' dropped: " + std::to_string(invalid) +
              "/" + std::to_string(all.size()) + " samples invalid");
    return std::nullopt;
  }
  return set;
}

inline std::vector<Elicitation> collect(Client& client, const std::vector<ElicitRequest>& requests, Mode mode,
                                        std::optional<double> temperature) {
  std::vector<Elicitation> all;
  auto outcomes = elicit_batch(client, requests, mode, temperature);
  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].backend_failed()) log::warn("sample " + std::to_string(i) + ": " + outcomes[i].backend_error);
    auto e = std::move(outcomes[i].elicitation);
    e.sample_index = static_cast<int>(i);
    e.level = 0;
    all.push_back(std::move(e));
  }
  return all;
}

}  // namespace detail

inline std::vector<ElicitRequest> self_random_requests(const QuestionRecord& record, int m, Mode mode) {
  if (m < 1) throw ConfigError("self_random sample count must be >= 1");
  const auto prompt = build_prompt(record, SteeringLevel::at(0), mode);
  std::vector<ElicitRequest> reqs;
  // sample i retries at i + m, i + 2m, ... so retries never collide with siblings
  for (int i = 0; i < m; ++i) reqs.push_back({prompt, i, m});
  return reqs;
}

inline std::vector<ElicitRequest> misleading_requests(const QuestionRecord& record, int m, Mode mode) {
  std::vector<ElicitRequest> reqs;
  for (auto& p : build_misleading_prompts(record, m, mode)) reqs.push_back({std::move(p), 0, 1});
  return reqs;
}

/// M samples of the vanilla prompt at sample indices 0..M-1.
inline std::optional<BaselineSampleSet> run_self_random(const QuestionRecord& record, Client& client, int m, Mode mode,
                                                        double temperature) {
  if (temperature <= 0.0)
    log::warn("self_random with temperature 0 produces identical samples for '" + record.id + "'");
  auto all = detail::collect(client, self_random_requests(record, m, mode), mode, temperature);
  return detail::finish_samples(record, BaselineMethod::self_random, std::move(all));
}

/// One sample per misleading prompt.
inline std::optional<BaselineSampleSet> run_misleading(const QuestionRecord& record, Client& client, int m,
                                                       Mode mode) {
  auto all = detail::collect(client, misleading_requests(record, m, mode), mode, std::nullopt);
  return detail::finish_samples(record, BaselineMethod::misleading, std::move(all));
}

}  // namespace steerconf

#pragma once

// Steered-confidence aggregation.
//
// Given one (answer, confidence) pair per steering level l in [-depth, depth]:
//   mean       mu    = (1/n) sum c_l                   n = 2*depth + 1
//   std        sigma = sqrt((1/n) sum (c_l - mu)^2)    population divisor
//   conf. consistency  kappa_conf = 1 / (1 + sigma/mu)
//   answer consistency kappa_ans  = largest answer class / n
//   calibrated         c = mu * kappa_ans * kappa_conf
// The selected answer comes from quantizing c over [c_min, c_max] into n bins
// and reading the answer of the matching level.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "steerconf/datasets.hpp"
#include "steerconf/error.hpp"
#include "steerconf/parse.hpp"

namespace steerconf {

/// Maps an answer to its equivalence-class key.
using AnswerKeyFn = std::function<std::string(std::string_view)>;

inline AnswerKeyFn answer_key_fn(AnswerType type) {
  return [type](std::string_view a) { return answer_key(a, type); };
}

/// Steered responses for one question, ordered by level index ascending.
class SteeredResponseSet {
 public:
  SteeredResponseSet(std::string question_id, int depth, std::vector<Elicitation> entries)
      : question_id_(std::move(question_id)), depth_(depth), entries_(std::move(entries)) {
    if (depth_ < 1) throw Error("steered set depth must be >= 1");
    if (entries_.size() != static_cast<size_t>(2 * depth_ + 1))
      throw Error("steered set for '" + question_id_ + "' needs " + std::to_string(2 * depth_ + 1) + " entries, got " +
                  std::to_string(entries_.size()));
    std::sort(entries_.begin(), entries_.end(),
              [](const Elicitation& a, const Elicitation& b) { return a.level < b.level; });
    for (size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.level != static_cast<int>(i) - depth_)
        throw Error("steered set for '" + question_id_ + "' must cover levels -" + std::to_string(depth_) + ".." +
                    std::to_string(depth_) + " exactly once");
      if (!e.valid) throw Error("steered set for '" + question_id_ + "' contains an invalid elicitation");
      if (!(e.confidence >= 0.0 && e.confidence <= 1.0))
        throw Error("steered set for '" + question_id_ + "' has a confidence outside [0,1]");
    }
  }

  const std::string& question_id() const { return question_id_; }
  int depth() const { return depth_; }
  size_t size() const { return entries_.size(); }
  const std::vector<Elicitation>& entries() const { return entries_; }
  const Elicitation& at_level(int level) const { return entries_.at(static_cast<size_t>(level + depth_)); }

 private:
  std::string question_id_;
  int depth_;
  std::vector<Elicitation> entries_;
};

struct CalibrationResult {
  std::string question_id;
  double mu_c = 0.0;
  double sigma_c = 0.0;
  double kappa_conf = 1.0;
  double kappa_ans = 1.0;
  double c_final = 0.0;
  int selected_level = 0;
  std::string selected_answer;
  bool degenerate = false;
};

inline nlohmann::json to_json(const CalibrationResult& r) {
  return {{"question_id", r.question_id},     {"mu_c", r.mu_c},
          {"sigma_c", r.sigma_c},             {"kappa_conf", r.kappa_conf},
          {"kappa_ans", r.kappa_ans},         {"c_final", r.c_final},
          {"selected_level", r.selected_level}, {"selected_answer", r.selected_answer},
          {"degenerate", r.degenerate}};
}

inline double mean_confidence(const SteeredResponseSet& set) {
  double sum = 0.0;
  for (const auto& e : set.entries()) sum += e.confidence;
  return sum / static_cast<double>(set.size());
}

inline double std_confidence(const SteeredResponseSet& set) {
  const double mu = mean_confidence(set);
  double ss = 0.0;
  for (const auto& e : set.entries()) ss += (e.confidence - mu) * (e.confidence - mu);
  return std::sqrt(ss / static_cast<double>(set.size()));
}

/// 1 / (1 + sigma/mu); exactly 1 when sigma is 0, including mu = 0.
inline double confidence_consistency(double mu, double sigma) {
  if (sigma == 0.0) return 1.0;
  return 1.0 / (1.0 + sigma / mu);
}

inline double calibrated_confidence(double mu, double kappa_ans, double kappa_conf) {
  return mu * kappa_ans * kappa_conf;
}

struct AnswerClass {
  std::string key;
  std::string representative;  // raw answer of the lowest-level member
  int count = 0;
  double confidence_sum = 0.0;
  int first_level = 0;

  double mean_confidence() const { return confidence_sum / count; }
};

/// Equivalence classes ordered by first occurrence (level ascending).
inline std::vector<AnswerClass> answer_classes(const std::vector<Elicitation>& entries, const AnswerKeyFn& key_of) {
  std::vector<AnswerClass> classes;
  std::map<std::string, size_t> index;
  for (const auto& e : entries) {
    auto key = key_of(e.answer);
    auto [it, inserted] = index.emplace(key, classes.size());
    if (inserted) classes.push_back({key, e.answer, 0, 0.0, e.level});
    auto& c = classes[it->second];
    ++c.count;
    c.confidence_sum += e.confidence;
  }
  return classes;
}

/// Largest class; ties go to the higher mean member confidence, then to the
/// class whose first member has the lowest level index.
inline const AnswerClass& modal_class(const std::vector<AnswerClass>& classes) {
  if (classes.empty()) throw Error("modal_class of an empty answer list");
  const AnswerClass* best = &classes.front();
  for (const auto& c : classes) {
    if (c.count > best->count) {
      best = &c;
    } else if (c.count == best->count) {
      const double cm = c.mean_confidence(), bm = best->mean_confidence();
      if (cm > bm || (cm == bm && c.first_level < best->first_level)) best = &c;
    }
  }
  return *best;
}

struct AnswerConsistency {
  double kappa_ans = 0.0;
  std::string modal_answer;
};

inline AnswerConsistency answer_consistency(const SteeredResponseSet& set, const AnswerKeyFn& key_of) {
  const auto classes = answer_classes(set.entries(), key_of);
  const auto& modal = modal_class(classes);
  return {static_cast<double>(modal.count) / static_cast<double>(set.size()), modal.representative};
}

struct Selection {
  int level = 0;
  std::string answer;
  bool degenerate = false;
};

/// Quantizes c_final over [c_min, c_max] into 2*depth+1 bins; bin b maps to
/// level b - depth, clamped into [-depth, depth]. Equal c_min and c_max
/// selects the vanilla level.
inline Selection select_answer(const SteeredResponseSet& set, double c_final) {
  double c_min = set.entries().front().confidence, c_max = c_min;
  for (const auto& e : set.entries()) {
    c_min = std::min(c_min, e.confidence);
    c_max = std::max(c_max, e.confidence);
  }
  const int depth = set.depth();
  if (c_max == c_min) return {0, set.at_level(0).answer, true};
  const double bins = static_cast<double>(2 * depth + 1);
  const int b = static_cast<int>(std::floor((c_final - c_min) / (c_max - c_min) * bins));
  const int j = std::clamp(b - depth, -depth, depth);
  return {j, set.at_level(j).answer, false};
}

struct MajoritySelection {
  std::string answer;
  double confidence = 0.0;
};

/// Majority-vote variant: modal answer class (confidence tie-break); the
/// reported confidence is still the calibrated product.
inline MajoritySelection select_answer_majority(const SteeredResponseSet& set, const AnswerKeyFn& key_of) {
  const auto classes = answer_classes(set.entries(), key_of);
  const auto& modal = modal_class(classes);
  const double mu = mean_confidence(set);
  const double sigma = std_confidence(set);
  const double kappa_ans = static_cast<double>(modal.count) / static_cast<double>(set.size());
  return {modal.representative, calibrated_confidence(mu, kappa_ans, confidence_consistency(mu, sigma))};
}

inline CalibrationResult calibrate(const SteeredResponseSet& set, const AnswerKeyFn& key_of) {
  CalibrationResult r;
  r.question_id = set.question_id();
  r.mu_c = mean_confidence(set);
  r.sigma_c = std_confidence(set);
  r.kappa_conf = confidence_consistency(r.mu_c, r.sigma_c);
  r.kappa_ans = answer_consistency(set, key_of).kappa_ans;
  r.c_final = calibrated_confidence(r.mu_c, r.kappa_ans, r.kappa_conf);
  const auto sel = select_answer(set, r.c_final);
  r.selected_level = sel.level;
  r.selected_answer = sel.answer;
  r.degenerate = sel.degenerate;
  return r;
}

}  // namespace steerconf

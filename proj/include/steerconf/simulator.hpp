#pragma once

// Deterministic stand-in for a black-box LLM.
//
// A question is "known" with probability p_correct (drawn once per question
// from the seed). Known questions answer with the gold; unknown ones draw a
// distractor per response, so their steered answers disagree. Cautious levels
// (index < 0) flip correctness with steering_flip_prob. Verbalized confidence
// is clamp(base_confidence + steering_shift[level] + noise, 0, 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "steerconf/backend.hpp"
#include "steerconf/datasets.hpp"
#include "steerconf/parse.hpp"
#include "steerconf/prompts.hpp"
#include "steerconf/sha256.hpp"

namespace steerconf {

struct SimProfile {
  double p_correct = 0.5;
  double base_confidence = 0.9;
  std::map<int, double> steering_shift;  // missing levels shift by 0
  double noise_scale = 0.0;
  double steering_flip_prob = 0.0;

  double shift(int level) const {
    auto it = steering_shift.find(level);
    return it == steering_shift.end() ? 0.0 : it->second;
  }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_correct)) throw ConfigError("sim profile p_correct must be in [0,1]");
    if (!prob(base_confidence)) throw ConfigError("sim profile base_confidence must be in [0,1]");
    if (!prob(steering_flip_prob)) throw ConfigError("sim profile steering_flip_prob must be in [0,1]");
    if (!(noise_scale >= 0.0 && noise_scale <= 0.5)) throw ConfigError("sim profile noise_scale must be in [0,0.5]");
    std::optional<double> prev;
    for (const auto& [level, s] : steering_shift) {
      if (!std::isfinite(s)) throw ConfigError("sim profile shifts must be finite");
      if (prev && s < *prev) throw ConfigError("sim profile shifts must be non-decreasing in level index");
      prev = s;
    }
  }
};

inline nlohmann::json to_json(const SimProfile& p) {
  nlohmann::json shifts = nlohmann::json::object();
  for (const auto& [level, s] : p.steering_shift) shifts[std::to_string(level)] = s;
  return {{"p_correct", p.p_correct},
          {"base_confidence", p.base_confidence},
          {"steering_shift", shifts},
          {"noise_scale", p.noise_scale},
          {"steering_flip_prob", p.steering_flip_prob}};
}

inline SimProfile sim_profile_from_json(const nlohmann::json& j) {
  SimProfile p;
  p.p_correct = j.value("p_correct", p.p_correct);
  p.base_confidence = j.value("base_confidence", p.base_confidence);
  p.noise_scale = j.value("noise_scale", p.noise_scale);
  p.steering_flip_prob = j.value("steering_flip_prob", p.steering_flip_prob);
  if (auto it = j.find("steering_shift"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("steering_shift must be an object keyed by level index");
    for (const auto& [k, v] : it->items()) p.steering_shift[std::stoi(k)] = v.get<double>();
  }
  p.validate();
  return p;
}

/// Uniform double in [0,1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct SimQuestion {
  std::string gold;  // display form of the gold answer
  std::vector<std::string> distractors;
  bool knows = true;
  std::optional<std::string> hinted;  // misleading hint's wrong answer
};

inline std::string display_answer(const QuestionRecord& r, const std::string& normalized) {
  if (r.answer_type == AnswerType::yes_no) return normalized == "yes" ? "Yes" : "No";
  return normalized;
}

inline std::string simulate_response(const SimProfile& profile, const SteeringLevel& level, const SimQuestion& q,
                                     std::mt19937_64& rng, Mode mode = Mode::plain) {
  bool correct = q.knows;
  if (level.index < 0 && uniform01(rng) < profile.steering_flip_prob) correct = !correct;
  std::string answer = q.gold;
  if (!correct) {
    if (q.distractors.empty()) {
      answer = "unknown";
    } else {
      const auto k = static_cast<size_t>(uniform01(rng) * static_cast<double>(q.distractors.size()));
      answer = q.distractors[std::min(k, q.distractors.size() - 1)];
    }
  }
  if (q.hinted && uniform01(rng) < profile.steering_flip_prob) answer = *q.hinted;
  const double noise = profile.noise_scale > 0.0 ? (2.0 * uniform01(rng) - 1.0) * profile.noise_scale : 0.0;
  const double conf = std::clamp(profile.base_confidence + profile.shift(level.index) + noise, 0.0, 1.0);
  const int percent = static_cast<int>(std::lround(conf * 100.0));
  return render_response(answer, std::to_string(percent), mode, "Simulated step-by-step analysis.");
}

inline constexpr const char* kSimulatedTimestamp = "1970-01-01T00:00:00Z";

/// Transport that answers prompts built from known datasets. The steering
/// level and mode are recovered by matching the prompt against the shipped
/// templates filled for the identified question.
class SimulatedTransport : public Transport {
 public:
  SimulatedTransport(SimProfile profile, std::uint64_t seed, const std::vector<const Dataset*>& datasets)
      : profile_(std::move(profile)), seed_(seed) {
    profile_.validate();
    for (const auto* ds : datasets)
      for (const auto& r : ds->records) by_question_.emplace(r.question, r);
  }

  std::string generate(const ChatRequest& req) override {
    std::string body = req.prompt;
    auto hinted = parse_misleading_hint(body);
    if (hinted) body = body.substr(body.find('\n') + 1);

    auto question = extract_question(body);
    const QuestionRecord* rec = nullptr;
    if (question) {
      auto it = by_question_.find(*question);
      if (it != by_question_.end()) rec = &it->second;
    }
    if (!rec) throw Error("simulated backend: prompt does not match any loaded question");

    SteeringLevel level = SteeringLevel::at(0);
    Mode mode = Mode::plain;
    bool matched = false;
    for (Mode m : {Mode::plain, Mode::cot}) {
      const auto set = shipped_templates(m);
      for (int i = -set.depth; i <= set.depth && !matched; ++i) {
        if (fill_template(set.at(i), *rec) == body) {
          level = SteeringLevel::at(i, set.depth);
          mode = m;
          matched = true;
        }
      }
      if (matched) break;
    }

    SimQuestion q;
    q.gold = display_answer(*rec, rec->gold_answer);
    for (const auto& d : distractors(*rec)) q.distractors.push_back(display_answer(*rec, d));
    q.knows = knows(*rec);
    q.hinted = hinted;

    // temperature 0 is greedy decoding: repeated samples coincide
    const int rng_sample = req.temperature > 0.0 ? req.sample_index : 0;
    const auto material = std::to_string(seed_) + "\x1e" + request_key(req.model_id, req.prompt, req.temperature, rng_sample);
    std::mt19937_64 rng(digest_seed(sha256(material)));
    return simulate_response(profile_, level, q, rng, mode);
  }

  std::string timestamp() const override { return kSimulatedTimestamp; }

  bool knows(const QuestionRecord& r) const {
    std::mt19937_64 rng(digest_seed(sha256(std::to_string(seed_) + "\x1eknows\x1e" + r.question)));
    return uniform01(rng) < profile_.p_correct;
  }

 private:
  SimProfile profile_;
  std::uint64_t seed_;
  std::unordered_map<std::string, QuestionRecord> by_question_;
};

}  // namespace steerconf

#pragma once

// Steering prompt construction.
//
// Five shipped templates per elicitation mode, ordered from most cautious
// (index -2) to most confident (+2). Template text is kept byte-identical to
// the files under templates/{cot,plain}/<label>.txt.

#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "steerconf/datasets.hpp"
#include "steerconf/error.hpp"
#include "steerconf/shipped_templates.hpp"

namespace steerconf {

enum class Mode { cot, plain };

inline std::string_view to_string(Mode m) { return m == Mode::cot ? "cot" : "plain"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "cot") return Mode::cot;
  if (s == "plain") return Mode::plain;
  return std::nullopt;
}

inline constexpr int kShippedDepth = 2;
inline constexpr std::string_view kFormatAnchor = "Answer and Confidence (0-100):";
inline constexpr std::string_view kQuestionSegment = "\n\nQuestion: {QUESTION}";
inline constexpr std::string_view kQuestionMarker = "\n\nQuestion: ";

/// Label for a steering index. Depth 2 uses the named levels; other depths
/// fall back to "level_<index>".
inline std::string level_label(int index, int depth) {
  static constexpr std::array<std::string_view, 5> kNames = {"very_cautious", "cautious", "vanilla", "confident",
                                                             "very_confident"};
  if (depth == kShippedDepth && index >= -depth && index <= depth) return std::string(kNames[index + depth]);
  if (index == 0) return "vanilla";
  return "level_" + std::to_string(index);
}

struct SteeringLevel {
  int index = 0;
  std::string label = "vanilla";

  static SteeringLevel at(int index, int depth = kShippedDepth) { return {index, level_label(index, depth)}; }
  bool operator==(const SteeringLevel&) const = default;
};

inline std::vector<SteeringLevel> steering_levels(int depth) {
  std::vector<SteeringLevel> out;
  for (int i = -depth; i <= depth; ++i) out.push_back(SteeringLevel::at(i, depth));
  return out;
}

/// Templates for one mode, one per level, ordered by index ascending.
struct TemplateSet {
  Mode mode = Mode::plain;
  int depth = kShippedDepth;
  std::vector<std::string> templates;

  const std::string& at(int index) const {
    if (index < -depth || index > depth) throw Error("steering index " + std::to_string(index) + " outside [-" +
                                                     std::to_string(depth) + ", " + std::to_string(depth) + "]");
    return templates[static_cast<size_t>(index + depth)];
  }
};

inline TemplateSet shipped_templates(Mode mode) {
  const auto& src = mode == Mode::cot ? shipped::kCotTemplates : shipped::kPlainTemplates;
  TemplateSet set{mode, kShippedDepth, {}};
  for (auto t : src) set.templates.emplace_back(t);
  return set;
}

/// Reads `<dir>/<mode>/<label>.txt` for every level of the given depth.
inline TemplateSet load_templates(const std::filesystem::path& dir, Mode mode, int depth) {
  if (depth < 1) throw ConfigError("steering depth must be >= 1");
  TemplateSet set{mode, depth, {}};
  for (const auto& level : steering_levels(depth)) {
    const auto path = dir / std::string(to_string(mode)) / (level.label + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing steering template: " + path.string());
    set.templates.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return set;
}

inline std::string_view answer_type_phrase(AnswerType t) {
  switch (t) {
    case AnswerType::multiple_choice_letter: return "option letter";
    case AnswerType::number: return "number";
    case AnswerType::yes_no: return "Yes or No";
    case AnswerType::free_text: return "answer";
  }
  return "answer";
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// True if s contains "{NAME}" with NAME made of [A-Z_]+.
inline bool has_placeholder(std::string_view s) {
  for (size_t open = s.find('{'); open != std::string_view::npos; open = s.find('{', open + 1)) {
    size_t i = open + 1;
    while (i < s.size() && ((s[i] >= 'A' && s[i] <= 'Z') || s[i] == '_')) ++i;
    if (i > open + 1 && i < s.size() && s[i] == '}') return true;
  }
  return false;
}

}  // namespace detail

/// Fills a template for one record. The question is substituted last so its
/// own text is never scanned for placeholders.
inline std::string fill_template(std::string_view tmpl, const QuestionRecord& record) {
  std::string text(tmpl);
  text += kQuestionSegment;
  detail::replace_all(text, "{ANSWER_TYPE}", answer_type_phrase(record.answer_type));
  const auto qpos = text.rfind("{QUESTION}");
  text.replace(qpos, std::string_view("{QUESTION}").size(), "");
  if (detail::has_placeholder(text)) throw Error("unreplaced placeholder in steering template");
  text.insert(qpos, record.question);
  return text;
}

inline std::string build_prompt(const QuestionRecord& record, const SteeringLevel& level, Mode mode,
                                const TemplateSet* custom = nullptr) {
  if (custom && custom->mode != mode) throw ConfigError("template set mode does not match requested mode");
  const TemplateSet shipped = custom ? TemplateSet{} : shipped_templates(mode);
  const TemplateSet& set = custom ? *custom : shipped;
  return fill_template(set.at(level.index), record);
}

inline std::vector<std::pair<SteeringLevel, std::string>> build_steering_set(const QuestionRecord& record, Mode mode,
                                                                             int depth,
                                                                             const TemplateSet* custom = nullptr) {
  if (depth < 1) throw ConfigError("steering depth must be >= 1");
  if (!custom && depth != kShippedDepth)
    throw ConfigError("unsupported configuration: shipped templates cover depth 2 only; supply templates for depth " +
                      std::to_string(depth));
  if (custom && custom->depth != depth) throw ConfigError("template set depth does not match requested depth");
  std::vector<std::pair<SteeringLevel, std::string>> out;
  for (const auto& level : steering_levels(depth)) out.emplace_back(level, build_prompt(record, level, mode, custom));
  return out;
}

// Misleading-hint pool. Each entry carries exactly one {WRONG} slot.
inline constexpr std::array<std::string_view, 8> kMisleadingHints = {
    "I think the answer might be {WRONG}; what do you say?",
    "A friend of mine is fairly sure the answer is {WRONG}.",
    "My teacher told me the answer is {WRONG}.",
    "Most people I asked said the answer is {WRONG}.",
    "I read somewhere that the answer is {WRONG}.",
    "An expert I trust believes the answer is {WRONG}.",
    "I am quite confident the answer is {WRONG}, but please check.",
    "The answer key I found says {WRONG}.",
};

inline std::string misleading_hint(const QuestionRecord& record, size_t i) {
  const auto wrongs = distractors(record);
  std::string hint(kMisleadingHints.at(i));
  detail::replace_all(hint, "{WRONG}", wrongs.empty() ? std::string("something else") : wrongs[i % wrongs.size()]);
  return hint;
}

/// m vanilla prompts, each prefixed by a distinct hint line asserting a
/// plausible wrong answer.
inline std::vector<std::string> build_misleading_prompts(const QuestionRecord& record, int m, Mode mode) {
  if (m < 1) throw ConfigError("misleading sample count must be >= 1");
  if (static_cast<size_t>(m) > kMisleadingHints.size())
    throw ConfigError("misleading hint pool exhausted: requested " + std::to_string(m) + ", pool has " +
                      std::to_string(kMisleadingHints.size()));
  const auto vanilla = build_prompt(record, SteeringLevel::at(0), mode);
  std::vector<std::string> out;
  for (int i = 0; i < m; ++i) out.push_back(misleading_hint(record, static_cast<size_t>(i)) + "\n" + vanilla);
  return out;
}

/// Recovers the hinted wrong answer from a misleading prompt's first line.
inline std::optional<std::string> parse_misleading_hint(std::string_view prompt) {
  const auto nl = prompt.find('\n');
  const std::string_view first = prompt.substr(0, nl);
  for (auto h : kMisleadingHints) {
    const auto slot = h.find("{WRONG}");
    const auto prefix = h.substr(0, slot);
    const auto suffix = h.substr(slot + 7);
    if (first.size() >= prefix.size() + suffix.size() && first.starts_with(prefix) && first.ends_with(suffix))
      return std::string(first.substr(prefix.size(), first.size() - prefix.size() - suffix.size()));
  }
  return std::nullopt;
}

/// Question text appended to a prompt by fill_template.
inline std::optional<std::string> extract_question(std::string_view prompt) {
  const auto pos = prompt.find(kQuestionMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  return std::string(prompt.substr(pos + kQuestionMarker.size()));
}

}  // namespace steerconf

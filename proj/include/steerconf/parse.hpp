#pragma once

// Response parsing for the "Answer and Confidence (0-100): <answer>, <NN>%"
// format line.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "steerconf/backend.hpp"
#include "steerconf/datasets.hpp"
#include "steerconf/prompts.hpp"

namespace steerconf {

/// After retries run out an elicitation keeps the reason of its last attempt.
enum class ParseFailure { none, anchor_missing, answer_empty, percent_missing, percent_not_numeric, percent_out_of_range,
                          backend_error };

inline std::string_view to_string(ParseFailure f) {
  switch (f) {
    case ParseFailure::none: return "none";
    case ParseFailure::anchor_missing: return "anchor_missing";
    case ParseFailure::answer_empty: return "answer_empty";
    case ParseFailure::percent_missing: return "percent_missing";
    case ParseFailure::percent_not_numeric: return "percent_not_numeric";
    case ParseFailure::percent_out_of_range: return "percent_out_of_range";
    case ParseFailure::backend_error: return "backend_error";
  }
  return "none";
}

inline ParseFailure parse_failure_from_string(std::string_view s) {
  for (auto f : {ParseFailure::none, ParseFailure::anchor_missing, ParseFailure::answer_empty,
                 ParseFailure::percent_missing, ParseFailure::percent_not_numeric, ParseFailure::percent_out_of_range,
                 ParseFailure::backend_error})
    if (to_string(f) == s) return f;
  return ParseFailure::none;
}

/// One (answer, confidence) observation. `level` is the steering index for
/// steered samples and 0 for baselines; `sample_index` distinguishes repeated
/// samples of one prompt.
struct Elicitation {
  std::string answer;
  double confidence = 0.0;
  int level = 0;
  int sample_index = 0;
  bool valid = false;
  ParseFailure reason = ParseFailure::anchor_missing;
  int attempts = 1;
  std::string request_key;

  bool operator==(const Elicitation&) const = default;
};

inline nlohmann::json to_json(const Elicitation& e) {
  nlohmann::json j = {{"level", e.level},       {"sample_index", e.sample_index}, {"valid", e.valid},
                      {"answer", e.answer},     {"confidence", e.confidence},     {"reason", to_string(e.reason)},
                      {"attempts", e.attempts}, {"request_key", e.request_key}};
  return j;
}

inline Elicitation elicitation_from_json(const nlohmann::json& j) {
  Elicitation e;
  e.level = j.at("level").get<int>();
  e.sample_index = j.at("sample_index").get<int>();
  e.valid = j.at("valid").get<bool>();
  e.answer = j.at("answer").get<std::string>();
  e.confidence = j.at("confidence").get<double>();
  e.reason = parse_failure_from_string(j.at("reason").get<std::string>());
  e.attempts = j.at("attempts").get<int>();
  e.request_key = j.at("request_key").get<std::string>();
  return e;
}

namespace detail {

inline bool is_decoration(char c) {
  return c == '`' || c == '*' || c == '_' || c == '"' || c == '\'' || is_space(c);
}

inline std::string strip_decoration(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_decoration(s[b])) ++b;
  while (e > b && is_decoration(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline size_t rfind_case_insensitive(std::string_view hay, std::string_view needle) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (size_t i = hay.size() - needle.size() + 1; i-- > 0;) {
    bool match = true;
    for (size_t k = 0; k < needle.size() && match; ++k)
      match = std::tolower(static_cast<unsigned char>(hay[i + k])) == std::tolower(static_cast<unsigned char>(needle[k]));
    if (match) return i;
  }
  return std::string_view::npos;
}

// Strict decimal: optional sign, digits, optional fractional part.
inline std::optional<double> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  size_t i = 0, int_digits = 0, frac_digits = 0;
  if (s[0] == '-' || s[0] == '+') ++i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++int_digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++frac_digits;
  }
  if (i != s.size() || int_digits == 0) return std::nullopt;
  return std::strtod(std::string(s).c_str(), nullptr);
}

}  // namespace detail

/// Never throws. Uses the last format anchor in the text and splits the
/// remainder of that line at its final comma.
inline Elicitation parse_response(std::string_view text, Mode mode = Mode::plain) {
  (void)mode;  // explanation text precedes the anchor in CoT and is skipped by the same rule
  Elicitation out;
  out.valid = false;
  const auto pos = detail::rfind_case_insensitive(text, kFormatAnchor);
  if (pos == std::string_view::npos) {
    out.reason = ParseFailure::anchor_missing;
    return out;
  }
  std::string_view rest = text.substr(pos + kFormatAnchor.size());
  // answer and percent live on the first non-blank line after the anchor
  while (!rest.empty() && detail::is_decoration(rest.front())) rest.remove_prefix(1);
  if (auto nl = rest.find('\n'); nl != std::string_view::npos) rest = rest.substr(0, nl);
  const std::string line = detail::strip_decoration(rest);

  const auto comma = line.rfind(',');
  if (comma == std::string::npos) {
    out.reason = ParseFailure::percent_missing;
    out.answer = line;
    return out;
  }
  out.answer = detail::strip_decoration(std::string_view(line).substr(0, comma));
  std::string pct = detail::strip_decoration(std::string_view(line).substr(comma + 1));
  while (!pct.empty() && (pct.back() == '.' || pct.back() == '`' || pct.back() == '*')) pct.pop_back();
  if (!pct.empty() && pct.back() == '%') pct.pop_back();
  pct = trim(pct);
  if (pct.empty()) {
    out.reason = ParseFailure::percent_missing;
    return out;
  }
  auto value = detail::parse_decimal(pct);
  if (!value) {
    out.reason = ParseFailure::percent_not_numeric;
    return out;
  }
  if (*value < 0.0 || *value > 100.0) {
    out.reason = ParseFailure::percent_out_of_range;
    return out;
  }
  if (out.answer.empty()) {
    out.reason = ParseFailure::answer_empty;
    return out;
  }
  out.confidence = *value == 0.0 ? 0.0 : *value / 100.0;  // "-0" reads as 0
  out.valid = true;
  out.reason = ParseFailure::none;
  return out;
}

/// Renders the response format line; CoT responses carry an explanation first.
inline std::string render_response(std::string_view answer, std::string_view percent, Mode mode,
                                   std::string_view explanation = "Step-by-step analysis.") {
  std::string text;
  if (mode == Mode::cot) {
    text += "Explanation: ";
    text += explanation;
    text += "\n";
  }
  text += kFormatAnchor;
  text += " ";
  text += answer;
  text += ", ";
  text += percent;
  text += "%";
  return text;
}

inline std::string render_response(std::string_view answer, int percent, Mode mode) {
  return render_response(answer, std::to_string(percent), mode);
}

struct ElicitRequest {
  std::string prompt;
  int first_sample_index = 0;
  int stride = 1;  // retry k uses first_sample_index + k * stride
};

struct ElicitOutcome {
  Elicitation elicitation;
  std::string backend_error;  // non-empty when the backend failed; no parse retry then
  bool backend_failed() const { return !backend_error.empty(); }
};

/// Batched parse-or-retry. Every round sends the still-unparsed requests as one
/// batch, so cache order stays deterministic under parallelism. A request is
/// tried at most 1 + max_retries times.
inline std::vector<ElicitOutcome> elicit_batch(Client& client, const std::vector<ElicitRequest>& requests, Mode mode,
                                               std::optional<double> temperature = {}) {
  std::vector<ElicitOutcome> out(requests.size());
  std::vector<size_t> pending(requests.size());
  for (size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  const int max_attempts = 1 + client.config().max_retries;
  for (int attempt = 0; attempt < max_attempts && !pending.empty(); ++attempt) {
    std::vector<std::pair<std::string, int>> batch;
    batch.reserve(pending.size());
    for (auto i : pending)
      batch.emplace_back(requests[i].prompt, requests[i].first_sample_index + attempt * requests[i].stride);
    const auto items = client.complete_requests(batch, temperature);
    std::vector<size_t> still;
    for (size_t k = 0; k < pending.size(); ++k) {
      const auto i = pending[k];
      auto& o = out[i];
      if (!items[k].ok()) {
        o.backend_error = items[k].error;
        o.elicitation.valid = false;
        o.elicitation.reason = ParseFailure::backend_error;
        o.elicitation.sample_index = requests[i].first_sample_index;
        o.elicitation.attempts = attempt + 1;
        continue;
      }
      o.elicitation = parse_response(items[k].response->text, mode);
      o.elicitation.attempts = attempt + 1;
      o.elicitation.sample_index = requests[i].first_sample_index;
      o.elicitation.request_key = items[k].response->request_key;
      if (!o.elicitation.valid) still.push_back(i);
    }
    pending = std::move(still);
  }
  return out;
}

/// Single-request form of elicit_batch. Backend failures throw.
inline Elicitation parse_or_retry(Client& client, const std::string& prompt, Mode mode, int first_sample_index = 0,
                                  std::optional<double> temperature = {}) {
  auto out = elicit_batch(client, {{prompt, first_sample_index, 1}}, mode, temperature);
  if (out[0].backend_failed()) throw Error(out[0].backend_error);
  return out[0].elicitation;
}

}  // namespace steerconf

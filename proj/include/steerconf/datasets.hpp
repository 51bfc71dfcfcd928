#pragma once

// Benchmark ingestion and answer equivalence.
//
// Datasets are newline-delimited JSON, one QuestionRecord per line:
//   {"id": "...", "question": "...", "answer_type": "number",
//    "gold_answer": "...", "options": [["A", "text"], ...]}
// Gold answers are normalized at load time so grading only normalizes the
// candidate side.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "steerconf/error.hpp"

namespace steerconf {

enum class AnswerType { multiple_choice_letter, number, yes_no, free_text };

inline std::string_view to_string(AnswerType t) {
  switch (t) {
    case AnswerType::multiple_choice_letter: return "multiple_choice_letter";
    case AnswerType::number: return "number";
    case AnswerType::yes_no: return "yes_no";
    case AnswerType::free_text: return "free_text";
  }
  return "free_text";
}

inline std::optional<AnswerType> parse_answer_type(std::string_view s) {
  if (s == "multiple_choice_letter") return AnswerType::multiple_choice_letter;
  if (s == "number") return AnswerType::number;
  if (s == "yes_no") return AnswerType::yes_no;
  if (s == "free_text") return AnswerType::free_text;
  return std::nullopt;
}

struct Option {
  std::string letter;
  std::string text;
  bool operator==(const Option&) const = default;
};

struct QuestionRecord {
  std::string id;
  std::string question;  // options already inlined for multiple choice
  AnswerType answer_type = AnswerType::free_text;
  std::string gold_answer;  // normalized
  std::vector<Option> options;
  bool operator==(const QuestionRecord&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<QuestionRecord> records;

  const QuestionRecord* find(std::string_view id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_alnum_ascii(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && detail::is_space(s[b])) ++b;
  while (e > b && detail::is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string casefold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Canonical decimal string for a numeric answer, or nullopt when the text is
/// not a number. Strips commas, leading currency symbols, and trailing units
/// ("18 apples", "$1,234.50", "12%").
inline std::optional<std::string> normalize_number(std::string_view raw) {
  std::string s = trim(raw);
  static constexpr std::string_view kCurrency[] = {"$", "\xE2\x82\xAC" /* € */, "\xC2\xA3" /* £ */,
                                                   "\xC2\xA5" /* ¥ */, "\xE2\x82\xB9" /* ₹ */};
  std::string sign;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    sign = s.substr(0, 1);
    s.erase(0, 1);
  }
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (auto cur : kCurrency) {
      if (s.starts_with(cur)) {
        s.erase(0, cur.size());
        stripped = true;
      }
    }
    s = trim(s);
  }
  if (sign.empty() && !s.empty() && (s[0] == '-' || s[0] == '+')) {
    sign = s.substr(0, 1);
    s.erase(0, 1);
  }
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());

  size_t i = 0;
  std::string int_part, frac_part;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) int_part += s[i++];
  if (i < s.size() && s[i] == '.') {
    size_t j = i + 1;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) frac_part += s[j++];
    // "12." keeps the dot as punctuation; "12.5" consumes it
    i = j;
  }
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  // remaining text is a unit only if it carries no further digits
  for (size_t k = i; k < s.size(); ++k)
    if (std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
  int_part.erase(0, std::min(int_part.find_first_not_of('0'), int_part.size()));
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  if (int_part.empty()) int_part = "0";
  std::string out;
  if (sign == "-" && !(int_part == "0" && frac_part.empty())) out = "-";
  out += int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  return out;
}

/// First standalone capital letter token: "(B) the duty of care" -> "B".
/// A lone lowercase letter ("b", "b)") is also accepted.
inline std::optional<std::string> extract_option_letter(std::string_view raw) {
  const std::string s = trim(raw);
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c < 'A' || c > 'Z') continue;
    const bool left_ok = i == 0 || !detail::is_alnum_ascii(s[i - 1]);
    const bool right_ok = i + 1 == s.size() || !detail::is_alnum_ascii(s[i + 1]);
    if (left_ok && right_ok) return std::string(1, c);
  }
  std::string letters;
  for (char c : s) {
    if (detail::is_alnum_ascii(c)) letters += c;
  }
  if (letters.size() == 1 && letters[0] >= 'a' && letters[0] <= 'z')
    return std::string(1, static_cast<char>(letters[0] - 'a' + 'A'));
  return std::nullopt;
}

/// Gold-independent canonical key. Two answers are equivalent iff their keys
/// match; used for answer-consistency grouping.
inline std::string answer_key(std::string_view answer, AnswerType type) {
  switch (type) {
    case AnswerType::multiple_choice_letter:
      if (auto l = extract_option_letter(answer)) return *l;
      break;
    case AnswerType::number:
      if (auto n = normalize_number(answer)) return *n;
      break;
    case AnswerType::yes_no:
    case AnswerType::free_text:
      break;
  }
  // unparseable answers still group by their folded text, tagged so they
  // never collide with a parsed key
  if (type == AnswerType::multiple_choice_letter || type == AnswerType::number)
    return "\x1f" + casefold(trim(answer));
  return casefold(trim(answer));
}

/// Normalized gold form. Returns nullopt if the gold is not a valid value of
/// its answer type.
inline std::optional<std::string> normalize_gold(std::string_view gold, AnswerType type) {
  switch (type) {
    case AnswerType::multiple_choice_letter: {
      auto l = extract_option_letter(gold);
      if (!l || trim(gold).size() > 3) return std::nullopt;
      return l;
    }
    case AnswerType::number:
      return normalize_number(gold);
    case AnswerType::yes_no: {
      auto f = casefold(trim(gold));
      if (f != "yes" && f != "no") return std::nullopt;
      return f;
    }
    case AnswerType::free_text: {
      auto f = casefold(trim(gold));
      if (f.empty()) return std::nullopt;
      return f;
    }
  }
  return std::nullopt;
}

inline bool answers_equal(std::string_view candidate, std::string_view gold, AnswerType type) {
  switch (type) {
    case AnswerType::number: {
      auto c = normalize_number(candidate);
      auto g = normalize_number(gold);
      return c && g && *c == *g;
    }
    case AnswerType::multiple_choice_letter: {
      auto c = extract_option_letter(candidate);
      auto g = extract_option_letter(gold);
      return c && g && *c == *g;
    }
    case AnswerType::yes_no:
    case AnswerType::free_text:
      return casefold(trim(candidate)) == casefold(trim(gold));
  }
  return false;
}

/// Plausible wrong answers for a record, in a fixed deterministic order.
/// Multiple choice: the non-gold option letters. Number: gold+1, gold-1,
/// gold+2, gold-2, ... Yes/No: the opposite. Free text: tagged variants.
inline std::vector<std::string> distractors(const QuestionRecord& r, size_t count = 4) {
  std::vector<std::string> out;
  switch (r.answer_type) {
    case AnswerType::multiple_choice_letter:
      for (const auto& o : r.options)
        if (o.letter != r.gold_answer) out.push_back(o.letter);
      break;
    case AnswerType::number: {
      const std::string& g = r.gold_answer;
      const auto dot = g.find('.');
      const int decimals = dot == std::string::npos ? 0 : static_cast<int>(g.size() - dot - 1);
      const double v = std::strtod(g.c_str(), nullptr);
      for (size_t k = 1; out.size() < count; ++k) {
        for (double d : {static_cast<double>(k), -static_cast<double>(k)}) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.*f", decimals, v + d);
          if (auto n = normalize_number(buf)) out.push_back(*n);
          if (out.size() == count) break;
        }
      }
      break;
    }
    case AnswerType::yes_no:
      out.push_back(r.gold_answer == "yes" ? "no" : "yes");
      break;
    case AnswerType::free_text:
      for (size_t k = 1; k <= count; ++k) out.push_back("not " + r.gold_answer + " (" + std::to_string(k) + ")");
      break;
  }
  return out;
}

inline std::string options_block(const std::vector<Option>& options) {
  std::string block = "\nOptions:";
  for (const auto& o : options) block += "\n" + o.letter + ") " + o.text;
  return block;
}

/// Appends the options block unless the question already ends with it.
inline std::string inline_options(const std::string& question, const std::vector<Option>& options) {
  if (options.empty()) return question;
  const std::string block = options_block(options);
  if (question.ends_with(block)) return question;
  return question + block;
}

inline nlohmann::json to_json(const QuestionRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["answer_type"] = std::string(to_string(r.answer_type));
  j["gold_answer"] = r.gold_answer;
  if (!r.options.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& o : r.options) arr.push_back({o.letter, o.text});
    j["options"] = arr;
  }
  return j;
}

/// Validates and normalizes one parsed JSON object. `where` prefixes errors.
inline QuestionRecord record_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": record is not a JSON object");
  auto field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw Error(where + ": missing or non-string field '" + key + "'");
    return it->get<std::string>();
  };
  QuestionRecord r;
  r.id = field("id");
  if (r.id.empty()) throw Error(where + ": empty id");
  const auto type_name = field("answer_type");
  auto type = parse_answer_type(type_name);
  if (!type) throw Error(where + ": unknown answer_type '" + type_name + "'");
  r.answer_type = *type;

  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(where + ": options must be an array");
    for (const auto& o : *it) {
      Option opt;
      if (o.is_array() && o.size() == 2 && o[0].is_string() && o[1].is_string()) {
        opt = {o[0].get<std::string>(), o[1].get<std::string>()};
      } else if (o.is_object() && o.contains("letter") && o.contains("text")) {
        opt = {o["letter"].get<std::string>(), o["text"].get<std::string>()};
      } else {
        throw Error(where + ": option entries must be [letter, text] pairs");
      }
      r.options.push_back(std::move(opt));
    }
  }

  const auto gold_raw = field("gold_answer");
  auto gold = normalize_gold(gold_raw, r.answer_type);
  if (!gold) throw Error(where + ": gold_answer '" + gold_raw + "' is not a valid " + type_name);
  r.gold_answer = *gold;

  if (r.answer_type == AnswerType::multiple_choice_letter) {
    if (r.options.empty()) throw Error(where + ": multiple_choice_letter record without options");
    const bool found = std::any_of(r.options.begin(), r.options.end(),
                                   [&](const Option& o) { return o.letter == r.gold_answer; });
    if (!found) throw Error(where + ": gold_answer '" + r.gold_answer + "' is not among the option letters");
  }
  r.question = inline_options(field("question"), r.options);
  return r;
}

inline Dataset parse_dataset(std::istream& in, std::string name, const std::string& source = "<stream>") {
  Dataset ds{std::move(name), {}};
  std::unordered_map<std::string, size_t> first_line;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(where + ": malformed JSON (" + e.what() + ")");
    }
    auto rec = record_from_json(j, where);
    auto [it, inserted] = first_line.emplace(rec.id, lineno);
    if (!inserted)
      throw Error(source + ": duplicate id '" + rec.id + "' on lines " + std::to_string(it->second) + " and " +
                  std::to_string(lineno));
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw Error(source + ": dataset has no records");
  return ds;
}

inline Dataset load_dataset(const std::string& path, std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  return parse_dataset(in, std::move(name), path);
}

inline std::string serialize_dataset(const Dataset& ds) {
  std::string out;
  for (const auto& r : ds.records) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace steerconf

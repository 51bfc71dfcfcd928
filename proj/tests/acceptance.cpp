// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "oracles/oracles.hpp"
#include "steerconf/steerconf.hpp"

using namespace steerconf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

SteeredResponseSet make_set(const std::vector<double>& conf, const std::vector<std::string>& answers) {
  std::vector<Elicitation> es;
  for (size_t i = 0; i < conf.size(); ++i)
    es.push_back({answers[i], conf[i], static_cast<int>(i) - 2, 0, true, ParseFailure::none, 1, ""});
  return SteeredResponseSet("q", 2, es);
}

const AnswerKeyFn kText = answer_key_fn(AnswerType::free_text);

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Outcome criterion1() {
  Outcome o;
  std::mt19937_64 rng(1);
  const std::vector<std::string> alphabet = {"A", "B", "C"};
  std::vector<oracle::Steered> sets(1000);
  for (auto& s : sets)
    for (int i = 0; i < 5; ++i) {
      s.conf.push_back(static_cast<double>(rng() % 21) * 0.05);
      s.answers.push_back(alphabet[rng() % 3]);
    }
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& s : sets) {
    const auto want = oracle::calibrate(s, 2);
    const auto got = calibrate(make_set(s.conf, s.answers), kText);
    for (auto [a, b] : {std::pair{got.mu_c, want.mu}, {got.sigma_c, want.sigma}, {got.kappa_conf, want.kappa_conf},
                        {got.kappa_ans, want.kappa_ans}, {got.c_final, want.c}})
      worst = std::max(worst, std::abs(a - b));
    o.require(got.selected_level == want.level, "selected level differs from oracle");
    o.require(got.degenerate == want.degenerate, "degenerate flag differs from oracle");
    o.require(got.selected_answer == s.answers[static_cast<size_t>(want.level + 2)], "selected answer differs");
  }
  const double t = seconds_since(t0);
  o.require(worst <= 1e-12, "numeric drift " + std::to_string(worst));
  o.require(t < 1.0, "runtime " + fmt(t) + " s");
  if (o.pass) o.detail = "1000 sets, max drift " + std::to_string(worst) + ", " + fmt(t) + " s";
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto r = calibrate(make_set({0.6, 0.7, 0.8, 0.9, 1.0}, {"A", "A", "B", "A", "C"}), kText);
  // expected values as stated; kappa_conf and c_final disagree with the closed form, see README
  const std::map<std::string, std::pair<double, double>> checks = {{"mu_c", {r.mu_c, 0.8}},
                                                                   {"sigma_c", {r.sigma_c, 0.1414214}},
                                                                   {"kappa_conf", {r.kappa_conf, 0.8497573}},
                                                                   {"kappa_ans", {r.kappa_ans, 0.6}},
                                                                   {"c_final", {r.c_final, 0.4078835}}};
  std::string misses;
  for (const auto& [name, v] : checks)
    if (std::abs(v.first - v.second) > 1e-6)
      misses += (misses.empty() ? "" : ", ") + name + " got " + fmt(v.first, 7) + " want " + fmt(v.second, 7);
  o.require(misses.empty(), misses + " (closed form 1/(1+sqrt(0.02)/0.8) = " +
                                fmt(1.0 / (1.0 + std::sqrt(0.02) / 0.8), 7) + ")");
  if (o.pass)
    o.detail = "mu=" + fmt(r.mu_c, 7) + " sigma=" + fmt(r.sigma_c, 7) + " kconf=" + fmt(r.kappa_conf, 7) +
               " kans=" + fmt(r.kappa_ans, 7) + " c=" + fmt(r.c_final, 7);
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> conf;
    for (int i = 0; i < 5; ++i) conf.push_back(static_cast<double>(rng() % 101) / 100.0);
    if (*std::min_element(conf.begin(), conf.end()) == *std::max_element(conf.begin(), conf.end())) conf[0] = 0.5, conf[1] = 0.6;
    const auto set = make_set(conf, {"a", "b", "c", "d", "e"});
    int prev = -3;
    for (int k = 0; k <= 100; ++k) {
      const int level = select_answer(set, k / 100.0).level;
      o.require(level >= prev, "selection not monotone in c_final");
      prev = level;
    }
    const double lo = *std::min_element(conf.begin(), conf.end());
    o.require(select_answer(set, lo).level == -2, "c_final = c_min must select the most cautious level");
    o.require(select_answer(set, lo - 0.05).level == -2, "c_final < c_min must select the most cautious level");
  }
  const auto flat = make_set({0.7, 0.7, 0.7, 0.7, 0.7}, {"a", "b", "c", "d", "e"});
  const auto sel = select_answer(flat, 0.3);
  o.require(sel.level == 0 && sel.degenerate && sel.answer == "c", "degenerate set must select level 0 with flag");
  if (o.pass) o.detail = "200 sets x 101 grid points monotone; boundary and degenerate clauses hold";
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::mt19937_64 rng(4);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const size_t n = 1 + rng() % 200;
    std::vector<EvalPair> p;
    std::vector<oracle::Pair> q;
    for (size_t i = 0; i < n; ++i) {
      const double c = t % 2 ? static_cast<double>(rng() % 1001) / 1000.0 : static_cast<double>(rng() % 21) / 20.0;
      const bool ok = rng() % 3 != 0;
      p.push_back({c, ok});
      q.push_back({c, ok});
    }
    worst = std::max(worst, std::abs(ece(p, 10) - oracle::ece(q, 10)));
    const auto a = auroc(p);
    const auto b = oracle::auroc(q);
    o.require(a.has_value() == b.has_value(), "AUROC definedness differs from oracle");
    if (a && b) worst = std::max(worst, std::abs(*a - *b));
  }
  const double t = seconds_since(t0);
  std::vector<EvalPair> fixture = {{0.9, true}, {0.8, false}, {0.7, true}};
  const double ap = *auprc(fixture);
  o.require(std::abs(ap - 0.8333) < 1e-4, "AUPRC fixture = " + fmt(ap));
  o.require(worst <= 1e-12, "metric drift " + std::to_string(worst));
  o.require(t < 5.0, "runtime " + fmt(t) + " s");
  if (o.pass) o.detail = "500 instances, max drift " + std::to_string(worst) + ", AUPRC fixture " + fmt(ap) + ", " + fmt(t) + " s";
  return o;
}

Outcome criterion5() {
  Outcome o;
  QuestionRecord rec{"q", "Which?\nOptions:\nA) a\nB) b", AnswerType::multiple_choice_letter, "B", {{"A", "a"}, {"B", "b"}}};
  int formats = 0, roundtrips = 0;
  for (Mode mode : {Mode::cot, Mode::plain})
    for (const auto& [level, prompt] : build_steering_set(rec, mode, 2)) {
      ++formats;
      o.require(prompt.find(kFormatAnchor) != std::string::npos, "template without format anchor");
      for (int pct = 0; pct <= 100; ++pct) {
        const auto e = parse_response(render_response("B", pct, mode), mode);
        o.require(e.valid && e.answer == "B" && e.confidence == pct / 100.0, "round trip failed at " + std::to_string(pct));
        ++roundtrips;
      }
    }
  const std::vector<std::pair<std::string, ParseFailure>> malformed = {
      {"I think the answer is Paris.", ParseFailure::anchor_missing},
      {"", ParseFailure::anchor_missing},
      {"Answer and Confidence: Paris, 80%", ParseFailure::anchor_missing},
      {"Answer & Confidence (0-100): Paris, 80%", ParseFailure::anchor_missing},
      {"Confidence (0-100): Paris, 80%", ParseFailure::anchor_missing},
      {"Answer and Confidence (0 - 100): Paris, 80%", ParseFailure::anchor_missing},
      {"Paris, 80%", ParseFailure::anchor_missing},
      {"Answer and Confidence (0-100): Paris", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100): Paris 80%", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100): Paris, ", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100): Paris, %", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100):", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100):\n\n", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100): Paris,\n80%", ParseFailure::percent_missing},
      {"Answer and Confidence (0-100): Paris, high%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, eighty", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 80-90%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 8 0%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, .5%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 1e2%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 0x50%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 80%%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, [Your confidence]%", ParseFailure::percent_not_numeric},
      {"Answer and Confidence (0-100): Paris, 101%", ParseFailure::percent_out_of_range},
      {"Answer and Confidence (0-100): Paris, 100.5%", ParseFailure::percent_out_of_range},
      {"Answer and Confidence (0-100): Paris, 250", ParseFailure::percent_out_of_range},
      {"Answer and Confidence (0-100): Paris, -5%", ParseFailure::percent_out_of_range},
      {"Answer and Confidence (0-100): , 80%", ParseFailure::answer_empty},
      {"Answer and Confidence (0-100): ``, 80%", ParseFailure::answer_empty},
      {"Answer and Confidence (0-100): ** **, 80%", ParseFailure::answer_empty},
  };
  for (const auto& [text, reason] : malformed) {
    const auto e = parse_response(text);
    o.require(!e.valid && e.reason == reason, "malformed case misclassified: " + text);
  }
  std::mt19937_64 rng(5);
  const std::string alphabet = "Answer and Confidence (0-100):,%.-`*_\"'\n 0123456789ABC\xC3\xA9\xFF";
  int fuzz = 0;
  for (; fuzz < 10000; ++fuzz) {
    std::string s = fuzz % 2 ? "" : "Answer and Confidence (0-100):";
    for (size_t k = rng() % 80; k > 0; --k) s += alphabet[rng() % alphabet.size()];
    try {
      const auto e = parse_response(s);
      o.require(!e.valid || (e.confidence >= 0.0 && e.confidence <= 1.0), "fuzz produced an out-of-range confidence");
    } catch (...) {
      o.require(false, "parse_response threw on fuzz input");
      break;
    }
  }
  o.require(formats == 10, "expected 10 template formats");
  if (o.pass)
    o.detail = std::to_string(formats) + " formats x 101 percents (" + std::to_string(roundtrips) + " round trips), " +
               std::to_string(malformed.size()) + " malformed cases, " + std::to_string(fuzz) + " fuzz strings";
  return o;
}

struct DemoRun {
  std::vector<CellReport> cells;
  std::vector<SteeringRow> steering;
  double seconds = 0.0;
};

DemoRun run_demo(const fs::path& dir) {
  DemoRun d;
  const auto t0 = Clock::now();
  auto cfg = write_demo(dir, 500, 42);
  Run run(cfg);
  cmd_elicit(run);
  cmd_aggregate(run);
  cmd_evaluate(run, {}, &d.cells);
  cmd_steering_report(run, {}, &d.steering);
  d.seconds = seconds_since(t0);
  return d;
}

const MetricsReport& cell(const DemoRun& d, Method m) {
  for (const auto& c : d.cells)
    if (c.method == m) return c.metrics;
  throw Error("missing cell");
}

Outcome criterion6(const DemoRun& d) {
  Outcome o;
  const auto& steer = cell(d, Method::steerconf);
  const auto& vanilla = cell(d, Method::vanilla);
  const double reduction = 1.0 - steer.ece / vanilla.ece;
  o.require(reduction >= 0.30, "ECE reduction " + fmt(reduction * 100, 1) + "% < 30%");
  o.require(steer.auroc && vanilla.auroc, "AUROC undefined");
  const double gain = steer.auroc && vanilla.auroc ? *steer.auroc - *vanilla.auroc : 0.0;
  o.require(gain >= 0.10, "AUROC gain " + fmt(gain) + " < 0.10");
  o.require(d.seconds < 30.0, "runtime " + fmt(d.seconds) + " s");
  o.detail = (o.pass ? "" : o.detail + "; ") + "ECE " + fmt(vanilla.ece) + " -> " + fmt(steer.ece) + " (-" +
             fmt(reduction * 100, 1) + "%), AUROC " + fmt(vanilla.auroc.value_or(-1)) + " -> " +
             fmt(steer.auroc.value_or(-1)) + ", " + fmt(d.seconds, 2) + " s";
  return o;
}

Outcome criterion7(const DemoRun& d) {
  Outcome o;
  for (const auto& r : d.steering) {
    if (r.level == -2)
      o.require(r.shift.mean_diff < 0 && r.shift.signed_wasserstein < 0 && r.shift.signed_js < 0,
                "very_cautious row is not negative");
    if (r.level == 2)
      o.require(r.shift.mean_diff >= 0 && r.shift.signed_wasserstein >= 0 && r.shift.signed_js >= 0,
                "very_confident row is negative");
  }
  o.require(d.steering.size() == 4, "expected 4 steering rows");
  if (o.pass)
    o.detail = "very_cautious mean " + fmt(d.steering.front().shift.mean_diff, 2) + " W " +
               fmt(d.steering.front().shift.signed_wasserstein, 2) + " JS " + fmt(d.steering.front().shift.signed_js, 2) +
               "; very_confident mean " + fmt(d.steering.back().shift.mean_diff, 2) + " W " +
               fmt(d.steering.back().shift.signed_wasserstein, 2) + " JS " + fmt(d.steering.back().shift.signed_js, 2);
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome criterion8(const fs::path& work) {
  Outcome o;
  const auto a = work / "determinism_a", b = work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string cli = STEERCONF_CLI;
  const auto run = [&](const fs::path& out) {
    return std::system((cli + " simulate-demo --out " + out.string() + " --n 500 --seed 42 >/dev/null 2>&1").c_str());
  };
  // same path both times: the second run goes into a fresh directory of the same name
  o.require(run(a) == 0, "first CLI run failed");
  fs::rename(a, b);
  o.require(run(a) == 0, "second CLI run failed");
  const auto first = snapshot(b), second = snapshot(a);
  o.require(!first.empty(), "no outputs");
  o.require(first.size() == second.size(), "file sets differ");
  size_t same = 0;
  for (const auto& [path, bytes] : first) {
    auto it = second.find(path);
    const bool eq = it != second.end() && it->second == bytes;
    o.require(eq, "differs: " + path);
    same += eq ? 1 : 0;
  }
  if (o.pass) o.detail = std::to_string(same) + " files byte-identical";
  fs::remove_all(a);
  fs::remove_all(b);
  return o;
}

}  // namespace

int main() {
  log::set_sink([](log::Level, std::string_view) {});
  const fs::path work = fs::temp_directory_path() / ("steerconf_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 aggregation oracle equivalence", criterion1},
      {"2 worked values", criterion2},
      {"3 selection rule properties", criterion3},
      {"4 metric oracles", criterion4},
      {"5 parser corpus", criterion5},
  };
  int failed = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  };
  for (const auto& [name, fn] : criteria) {
    try {
      report(name, fn());
    } catch (const std::exception& e) {
      report(name, {false, std::string("exception: ") + e.what()});
    }
  }
  try {
    const auto demo = run_demo(work / "demo");
    report("6 simulated calibration improvement", criterion6(demo));
    report("7 steering report direction", criterion7(demo));
  } catch (const std::exception& e) {
    report("6 simulated calibration improvement", {false, std::string("exception: ") + e.what()});
    report("7 steering report direction", {false, "not run"});
  }
  try {
    report("8 pipeline determinism", criterion8(work));
  } catch (const std::exception& e) {
    report("8 pipeline determinism", {false, std::string("exception: ") + e.what()});
  }
  fs::remove_all(work);
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}

#pragma once

// End-to-end run orchestration: elicit -> aggregate -> evaluate, plus the
// per-level steering report. Every stage reads and writes files under the
// run's output directory:
//
//   <out>/responses/cache.jsonl                  raw response cache
//   <out>/responses/<dataset>/<kind>.jsonl       parsed elicitations per question
//   <out>/results/<dataset>/<method>.jsonl       one graded result per question
//   <out>/reports/<dataset>/<method>/{metrics.json,metrics.csv,reliability.csv,histogram.csv}
//   <out>/reports/comparison.{csv,md}            methods x datasets (+ avg)
//   <out>/reports/steering/{steering_report.csv,steering_report.md,<dataset>_histograms.csv}

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerconf/aggregate.hpp"
#include "steerconf/backend.hpp"
#include "steerconf/baselines.hpp"
#include "steerconf/datasets.hpp"
#include "steerconf/error.hpp"
#include "steerconf/log.hpp"
#include "steerconf/metrics.hpp"
#include "steerconf/parse.hpp"
#include "steerconf/prompts.hpp"
#include "steerconf/simulator.hpp"

namespace steerconf {

namespace fs = std::filesystem;

enum class Method { steerconf, steerconf_majority, vanilla, self_random, misleading };

inline constexpr std::array<Method, 5> kAllMethods = {Method::steerconf, Method::steerconf_majority, Method::vanilla,
                                                      Method::self_random, Method::misleading};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::steerconf: return "steerconf";
    case Method::steerconf_majority: return "steerconf_majority";
    case Method::vanilla: return "vanilla";
    case Method::self_random: return "self_random";
    case Method::misleading: return "misleading";
  }
  return "vanilla";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (auto m : kAllMethods)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

/// Which elicitation file a method reads.
enum class ElicitKind { steering, vanilla, self_random, misleading };

inline std::string_view to_string(ElicitKind k) {
  switch (k) {
    case ElicitKind::steering: return "steering";
    case ElicitKind::vanilla: return "vanilla";
    case ElicitKind::self_random: return "self_random";
    case ElicitKind::misleading: return "misleading";
  }
  return "vanilla";
}

inline ElicitKind elicit_kind(Method m) {
  switch (m) {
    case Method::steerconf:
    case Method::steerconf_majority: return ElicitKind::steering;
    case Method::vanilla: return ElicitKind::vanilla;
    case Method::self_random: return ElicitKind::self_random;
    case Method::misleading: return ElicitKind::misleading;
  }
  return ElicitKind::vanilla;
}

struct DatasetSpec {
  std::string name;
  std::string path;
};

struct RunConfig {
  std::vector<DatasetSpec> datasets;
  BackendConfig backend;
  SimProfile sim_profile;
  double self_random_temperature = 0.7;
  Mode mode = Mode::plain;
  int depth = kShippedDepth;
  std::vector<Method> methods;
  int m = 5;
  int ece_bins = 10;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  double invalid_rate_threshold = 0.05;
  AggregationRule aggregation = AggregationRule::frequency_confidence;
  std::string template_dir;  // empty: shipped templates
  double js_log_base = std::exp(1.0);
  int batch_size = 256;  // requests per cache flush

  void validate() const {
    if (datasets.empty()) throw ConfigError("config needs at least one dataset");
    if (methods.empty()) throw ConfigError("config needs at least one method");
    std::set<std::string> names;
    for (const auto& d : datasets) {
      if (d.name.empty() || d.path.empty()) throw ConfigError("dataset entries need name and path");
      if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name: " + d.name);
    }
    if (depth < 1) throw ConfigError("levels must be >= 1");
    if (m < 1) throw ConfigError("m must be >= 1");
    if (ece_bins < 1) throw ConfigError("ece_bins must be >= 1");
    if (!(invalid_rate_threshold >= 0.0 && invalid_rate_threshold <= 1.0))
      throw ConfigError("invalid_rate_threshold must be in [0,1]");
    if (!(self_random_temperature >= 0.0)) throw ConfigError("self_random_temperature must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(js_log_base > 1.0)) throw ConfigError("js_log_base must be > 1");
    backend.validate();
    if (backend.kind == BackendKind::simulated) sim_profile.validate();
  }
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError(std::string("unknown field '") + k + "' in " + where);
  }
}

}  // namespace detail

/// Parses a run config. Relative dataset and output paths resolve against
/// `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j,
                         {"datasets", "backend", "mode", "levels", "methods", "m", "ece_bins", "output_dir", "seed",
                          "invalid_rate_threshold", "aggregation", "template_dir", "js_log_base", "batch_size",
                          "self_random_temperature"},
                         "config");
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
    return (base_dir / p).lexically_normal().string();
  };
  RunConfig c;
  if (!j.contains("datasets") || !j["datasets"].is_array()) throw ConfigError("config.datasets must be an array");
  for (const auto& d : j["datasets"]) {
    if (!d.is_object()) throw ConfigError("config.datasets entries must be objects");
    detail::reject_unknown(d, {"name", "path"}, "datasets entry");
    c.datasets.push_back({detail::get_or<std::string>(d, "name", ""), resolve(detail::get_or<std::string>(d, "path", ""))});
  }
  if (!j.contains("methods") || !j["methods"].is_array()) throw ConfigError("config.methods must be an array");
  for (const auto& m : j["methods"]) {
    auto parsed = m.is_string() ? parse_method(m.get<std::string>()) : std::nullopt;
    if (!parsed) throw ConfigError("unknown method: " + m.dump());
    c.methods.push_back(*parsed);
  }
  const auto mode = detail::get_or<std::string>(j, "mode", "plain");
  if (auto pm = parse_mode(mode)) c.mode = *pm;
  else throw ConfigError("mode must be 'cot' or 'plain'");
  c.depth = detail::get_or<int>(j, "levels", c.depth);
  c.m = detail::get_or<int>(j, "m", c.m);
  c.ece_bins = detail::get_or<int>(j, "ece_bins", c.ece_bins);
  c.output_dir = resolve(detail::get_or<std::string>(j, "output_dir", c.output_dir));
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.invalid_rate_threshold = detail::get_or<double>(j, "invalid_rate_threshold", c.invalid_rate_threshold);
  c.self_random_temperature = detail::get_or<double>(j, "self_random_temperature", c.self_random_temperature);
  c.template_dir = resolve(detail::get_or<std::string>(j, "template_dir", ""));
  c.js_log_base = detail::get_or<double>(j, "js_log_base", c.js_log_base);
  c.batch_size = detail::get_or<int>(j, "batch_size", c.batch_size);
  const auto agg = detail::get_or<std::string>(j, "aggregation", "frequency_confidence");
  if (agg == "frequency_confidence") c.aggregation = AggregationRule::frequency_confidence;
  else if (agg == "frequency") c.aggregation = AggregationRule::frequency;
  else throw ConfigError("aggregation must be 'frequency_confidence' or 'frequency'");

  const auto b = j.value("backend", nlohmann::json::object());
  if (!b.is_object()) throw ConfigError("config.backend must be an object");
  detail::reject_unknown(b,
                         {"kind", "endpoint_url", "model_id", "temperature", "max_retries", "parallelism",
                          "retry_backoff_ms", "profile"},
                         "backend");
  const auto kind = detail::get_or<std::string>(b, "kind", "simulated");
  if (kind == "http") c.backend.kind = BackendKind::http;
  else if (kind == "simulated") c.backend.kind = BackendKind::simulated;
  else throw ConfigError("backend.kind must be 'http' or 'simulated'");
  c.backend.endpoint_url = detail::get_or<std::string>(b, "endpoint_url", "");
  c.backend.model_id = detail::get_or<std::string>(b, "model_id", c.backend.model_id);
  c.backend.temperature = detail::get_or<double>(b, "temperature", c.backend.temperature);
  c.backend.max_retries = detail::get_or<int>(b, "max_retries", c.backend.max_retries);
  c.backend.parallelism = detail::get_or<int>(b, "parallelism", c.backend.parallelism);
  c.backend.retry_backoff_ms = detail::get_or<int>(b, "retry_backoff_ms", c.backend.retry_backoff_ms);
  c.backend.seed = c.seed;
  if (auto it = b.find("profile"); it != b.end()) {
    detail::reject_unknown(*it, {"p_correct", "base_confidence", "steering_shift", "noise_scale", "steering_flip_prob"},
                           "backend.profile");
    c.sim_profile = sim_profile_from_json(*it);
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : c.datasets) ds.push_back({{"name", d.name}, {"path", d.path}});
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : c.methods) methods.push_back(std::string(to_string(m)));
  nlohmann::json backend = {{"kind", c.backend.kind == BackendKind::http ? "http" : "simulated"},
                            {"model_id", c.backend.model_id},
                            {"temperature", c.backend.temperature},
                            {"max_retries", c.backend.max_retries},
                            {"parallelism", c.backend.parallelism},
                            {"retry_backoff_ms", c.backend.retry_backoff_ms}};
  if (c.backend.kind == BackendKind::http) backend["endpoint_url"] = c.backend.endpoint_url;
  else backend["profile"] = to_json(c.sim_profile);
  nlohmann::json j = {{"datasets", ds},
                      {"backend", backend},
                      {"mode", std::string(to_string(c.mode))},
                      {"levels", c.depth},
                      {"methods", methods},
                      {"m", c.m},
                      {"ece_bins", c.ece_bins},
                      {"output_dir", c.output_dir},
                      {"seed", c.seed},
                      {"invalid_rate_threshold", c.invalid_rate_threshold},
                      {"self_random_temperature", c.self_random_temperature},
                      {"aggregation", c.aggregation == AggregationRule::frequency ? "frequency" : "frequency_confidence"},
                      {"js_log_base", c.js_log_base},
                      {"batch_size", c.batch_size}};
  if (!c.template_dir.empty()) j["template_dir"] = c.template_dir;
  return j;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

/// Restricts a run to a subset of methods/datasets (CLI --method/--dataset).
struct RunFilter {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;

  bool keep_method(Method m) const {
    return methods.empty() || std::find(methods.begin(), methods.end(), to_string(m)) != methods.end();
  }
  bool keep_dataset(const std::string& d) const {
    return datasets.empty() || std::find(datasets.begin(), datasets.end(), d) != datasets.end();
  }
};

using TransportFactory = std::function<std::unique_ptr<Transport>(const BackendConfig&)>;

/// Exit status shared by all stages: 0 clean, 2 failures within threshold,
/// 1 failures above threshold or a hard error.
struct StageSummary {
  int exit_code = 0;
  std::size_t items = 0;
  std::size_t failures = 0;
  std::size_t transport_calls = 0;
  std::vector<std::string> written;  // output files, relative to output_dir
};

namespace detail {

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

inline std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fixed(const std::optional<double>& v, int digits = 6) {
  return v ? fixed(*v, digits) : std::string("undefined");
}

inline int exit_code_for(std::size_t failures, std::size_t items, double threshold) {
  if (failures == 0) return 0;
  const double rate = items == 0 ? 1.0 : static_cast<double>(failures) / static_cast<double>(items);
  return rate > threshold ? 1 : 2;
}

}  // namespace detail

/// Loaded datasets and the client for one run.
class Run {
 public:
  explicit Run(RunConfig config, TransportFactory http_factory = nullptr)
      : config_(std::move(config)), http_factory_(std::move(http_factory)) {
    config_.validate();
    for (const auto& d : config_.datasets) datasets_.push_back(load_dataset(d.path, d.name));
    if (!config_.template_dir.empty())
      templates_ = load_templates(config_.template_dir, config_.mode, config_.depth);
    else if (config_.depth != kShippedDepth)
      throw ConfigError("unsupported configuration: shipped templates cover levels=2 only; set template_dir");
  }

  const RunConfig& config() const { return config_; }
  const std::vector<Dataset>& datasets() const { return datasets_; }
  fs::path out() const { return config_.output_dir; }
  fs::path responses_path(const std::string& ds, ElicitKind k) const {
    return out() / "responses" / ds / (std::string(to_string(k)) + ".jsonl");
  }
  fs::path results_path(const std::string& ds, Method m) const {
    return out() / "results" / ds / (std::string(to_string(m)) + ".jsonl");
  }
  fs::path report_dir(const std::string& ds, Method m) const { return out() / "reports" / ds / std::string(to_string(m)); }
  fs::path cache_path() const { return out() / "responses" / "cache.jsonl"; }

  /// Lazily constructs the client so aggregate/evaluate never need a backend.
  Client& client() {
    if (!client_) {
      auto backend = config_.backend;
      backend.seed = config_.seed;
      std::unique_ptr<Transport> transport;
      if (backend.kind == BackendKind::simulated) {
        std::vector<const Dataset*> ptrs;
        for (const auto& d : datasets_) ptrs.push_back(&d);
        transport = std::make_unique<SimulatedTransport>(config_.sim_profile, backend.seed, ptrs);
      } else {
        if (!http_factory_) throw ConfigError("http backend is not available in this build");
        transport = http_factory_(backend);
      }
      client_ = std::make_unique<Client>(backend, std::move(transport), std::make_shared<ResponseCache>(cache_path()));
    }
    return *client_;
  }

  const TemplateSet* custom_templates() const { return templates_ ? &*templates_ : nullptr; }

  std::set<ElicitKind> kinds(const RunFilter& f) const {
    std::set<ElicitKind> ks;
    for (auto m : config_.methods)
      if (f.keep_method(m)) ks.insert(elicit_kind(m));
    return ks;
  }

 private:
  RunConfig config_;
  TransportFactory http_factory_;
  std::vector<Dataset> datasets_;
  std::optional<TemplateSet> templates_;
  std::unique_ptr<Client> client_;
};

namespace detail {

// Requests for one question; `levels` receives the level tag of each request.
inline std::vector<ElicitRequest> requests_for(Run& run, const QuestionRecord& r, ElicitKind kind,
                                               std::vector<int>& levels) {
  const auto& cfg = run.config();
  std::vector<ElicitRequest> reqs;
  levels.clear();
  switch (kind) {
    case ElicitKind::steering:
      for (auto& [level, prompt] : build_steering_set(r, cfg.mode, cfg.depth, run.custom_templates())) {
        reqs.push_back({std::move(prompt), 0, 1});
        levels.push_back(level.index);
      }
      break;
    case ElicitKind::vanilla:
      reqs.push_back({build_prompt(r, SteeringLevel::at(0, cfg.depth), cfg.mode, run.custom_templates()), 0, 1});
      levels.push_back(0);
      break;
    case ElicitKind::self_random:
      reqs = self_random_requests(r, cfg.m, cfg.mode);
      levels.assign(reqs.size(), 0);
      break;
    case ElicitKind::misleading:
      reqs = misleading_requests(r, cfg.m, cfg.mode);
      levels.assign(reqs.size(), 0);
      break;
  }
  return reqs;
}

}  // namespace detail

/// Fetches and parses every response needed by the configured methods.
/// Cache-aware: a rerun over a complete cache sends nothing.
inline StageSummary cmd_elicit(Run& run, const RunFilter& filter = {}) {
  StageSummary summary;
  auto& client = run.client();
  const auto& cfg = run.config();
  const size_t calls_before = client.transport_calls();
  const auto kinds = run.kinds(filter);
  if (kinds.count(ElicitKind::self_random) && cfg.self_random_temperature <= 0.0)
    log::warn("self_random_temperature is 0: self_random samples will be identical");

  for (const auto& ds : run.datasets()) {
    if (!filter.keep_dataset(ds.name)) continue;
    for (auto kind : kinds) {
      const double temperature =
          kind == ElicitKind::self_random ? cfg.self_random_temperature : cfg.backend.temperature;
      std::string content;
      const size_t per_batch_questions = std::max<size_t>(1, static_cast<size_t>(cfg.batch_size) / 5);
      for (size_t start = 0; start < ds.records.size(); start += per_batch_questions) {
        const size_t stop = std::min(ds.records.size(), start + per_batch_questions);
        std::vector<ElicitRequest> batch;
        std::vector<std::vector<int>> levels(stop - start);
        std::vector<size_t> offsets;
        for (size_t q = start; q < stop; ++q) {
          offsets.push_back(batch.size());
          auto reqs = detail::requests_for(run, ds.records[q], kind, levels[q - start]);
          batch.insert(batch.end(), std::make_move_iterator(reqs.begin()), std::make_move_iterator(reqs.end()));
        }
        offsets.push_back(batch.size());
        auto outcomes = elicit_batch(client, batch, cfg.mode, temperature);
        for (size_t q = start; q < stop; ++q) {
          const auto& rec = ds.records[q];
          nlohmann::json samples = nlohmann::json::array();
          bool failed = false;
          for (size_t k = offsets[q - start]; k < offsets[q - start + 1]; ++k) {
            auto e = outcomes[k].elicitation;
            e.level = levels[q - start][k - offsets[q - start]];
            if (kind == ElicitKind::self_random || kind == ElicitKind::misleading)
              e.sample_index = static_cast<int>(k - offsets[q - start]);
            auto j = to_json(e);
            if (outcomes[k].backend_failed()) j["error"] = outcomes[k].backend_error;
            failed = failed || !e.valid;
            samples.push_back(std::move(j));
          }
          if (failed) {
            ++summary.failures;
            log::warn(ds.name + "/" + std::string(to_string(kind)) + ": question '" + rec.id +
                      "' has invalid elicitations");
          }
          ++summary.items;
          nlohmann::json line = {{"question_id", rec.id}, {"kind", std::string(to_string(kind))}, {"samples", samples}};
          content += line.dump() + "\n";
        }
      }
      const auto path = run.responses_path(ds.name, kind);
      detail::write_file(path, content);
      summary.written.push_back(fs::relative(path, run.out()).string());
    }
  }
  summary.transport_calls = client.transport_calls() - calls_before;
  summary.exit_code = detail::exit_code_for(summary.failures, summary.items, cfg.invalid_rate_threshold);
  return summary;
}

namespace detail {

inline std::map<std::string, std::vector<Elicitation>> read_elicitations(const Run& run, const std::string& ds,
                                                                         ElicitKind kind, Method method) {
  const auto path = run.responses_path(ds, kind);
  if (!fs::exists(path))
    throw Error("missing elicitations for method '" + std::string(to_string(method)) + "' on dataset '" + ds +
                "': " + path.string() + " (run elicit first)");
  std::map<std::string, std::vector<Elicitation>> out;
  for (const auto& line : read_jsonl(path)) {
    auto& v = out[line.at("question_id").get<std::string>()];
    for (const auto& s : line.at("samples")) v.push_back(elicitation_from_json(s));
  }
  return out;
}

inline std::string first_invalid_reason(const std::vector<Elicitation>& es) {
  for (const auto& e : es)
    if (!e.valid) return "level " + std::to_string(e.level) + ": " + std::string(to_string(e.reason));
  return "";
}

}  // namespace detail

/// One graded result per question per method. Questions whose elicitations
/// stayed invalid are written with "excluded": true and skipped by metrics.
inline StageSummary cmd_aggregate(Run& run, const RunFilter& filter = {}) {
  StageSummary summary;
  const auto& cfg = run.config();
  for (const auto& ds : run.datasets()) {
    if (!filter.keep_dataset(ds.name)) continue;
    for (auto method : cfg.methods) {
      if (!filter.keep_method(method)) continue;
      const auto kind = elicit_kind(method);
      const auto elicited = detail::read_elicitations(run, ds.name, kind, method);
      std::string content;
      for (const auto& rec : ds.records) {
        ++summary.items;
        nlohmann::json line = {{"question_id", rec.id}, {"method", std::string(to_string(method))}};
        auto it = elicited.find(rec.id);
        if (it == elicited.end())
          throw Error("missing elicitations for question '" + rec.id + "' (method " + std::string(to_string(method)) +
                      ", dataset " + ds.name + ")");
        const auto& es = it->second;
        const auto key_of = answer_key_fn(rec.answer_type);
        std::optional<std::string> answer;
        double confidence = 0.0;
        std::string excluded_reason;

        switch (method) {
          case Method::steerconf:
          case Method::steerconf_majority: {
            if (const auto bad = detail::first_invalid_reason(es); !bad.empty()) {
              excluded_reason = bad;
              break;
            }
            const SteeredResponseSet set(rec.id, cfg.depth, es);
            const auto cal = calibrate(set, key_of);
            auto cal_json = to_json(cal);
            cal_json.erase("question_id");
            line["calibration"] = cal_json;
            if (method == Method::steerconf) {
              answer = cal.selected_answer;
              confidence = cal.c_final;
            } else {
              const auto maj = select_answer_majority(set, key_of);
              answer = maj.answer;
              confidence = maj.confidence;
            }
            break;
          }
          case Method::vanilla: {
            if (es.size() != 1 || !es[0].valid) {
              excluded_reason = es.empty() ? "no sample" : std::string(to_string(es[0].reason));
              break;
            }
            answer = es[0].answer;
            confidence = es[0].confidence;
            break;
          }
          case Method::self_random:
          case Method::misleading: {
            auto set = detail::finish_samples(rec, method == Method::self_random ? BaselineMethod::self_random
                                                                                 : BaselineMethod::misleading,
                                              es);
            if (!set) {
              excluded_reason = "more than half of the samples invalid";
              break;
            }
            const auto agg = consistency_aggregate(*set, key_of, cfg.aggregation);
            answer = agg.answer;
            confidence = agg.confidence;
            line["samples_used"] = set->samples.size();
            break;
          }
        }

        if (answer) {
          line["answer"] = *answer;
          line["confidence"] = confidence;
          line["correct"] = answers_equal(*answer, rec.gold_answer, rec.answer_type);
          line["excluded"] = false;
        } else {
          ++summary.failures;
          line["excluded"] = true;
          line["reason"] = excluded_reason;
        }
        content += line.dump() + "\n";
      }
      const auto path = run.results_path(ds.name, method);
      detail::write_file(path, content);
      summary.written.push_back(fs::relative(path, run.out()).string());
    }
  }
  summary.exit_code = detail::exit_code_for(summary.failures, summary.items, cfg.invalid_rate_threshold);
  return summary;
}

struct CellReport {
  std::string dataset;
  Method method;
  MetricsReport metrics;
  ConfidenceHistogram histogram;
};

namespace detail {

inline std::string metrics_csv(const MetricsReport& r) {
  std::string s = "metric,value\n";
  s += "n," + std::to_string(r.n) + "\n";
  s += "n_invalid," + std::to_string(r.n_invalid) + "\n";
  s += "invalid_rate," + fixed(r.invalid_rate) + "\n";
  s += "accuracy," + fixed(r.accuracy) + "\n";
  s += "ece," + fixed(r.ece) + "\n";
  s += "auroc," + fixed(r.auroc) + "\n";
  s += "pr_p," + fixed(r.pr_p) + "\n";
  s += "pr_n," + fixed(r.pr_n) + "\n";
  return s;
}

inline std::string reliability_csv(const MetricsReport& r) {
  std::string s = "bin_low,bin_high,count,mean_conf,accuracy\n";
  for (const auto& b : r.reliability_bins)
    s += fixed(b.bin_low) + "," + fixed(b.bin_high) + "," + std::to_string(b.count) + "," + fixed(b.mean_conf) + "," +
         fixed(b.accuracy) + "\n";
  return s;
}

inline std::string histogram_csv(const ConfidenceHistogram& h) {
  std::string s = "bin_low,bin_high,class,count\n";
  for (int b = 0; b < ConfidenceHistogram::kBins; ++b) {
    const auto lo = std::to_string(static_cast<int>(b * ConfidenceHistogram::kBinWidth));
    const auto hi = std::to_string(static_cast<int>((b + 1) * ConfidenceHistogram::kBinWidth));
    s += lo + "," + hi + ",correct," + std::to_string(h.correct[static_cast<size_t>(b)]) + "\n";
    s += lo + "," + hi + ",incorrect," + std::to_string(h.incorrect[static_cast<size_t>(b)]) + "\n";
  }
  return s;
}

using MetricGetter = std::function<std::optional<double>(const MetricsReport&)>;

inline const std::vector<std::pair<std::string, MetricGetter>>& table_metrics() {
  static const std::vector<std::pair<std::string, MetricGetter>> kMetrics = {
      {"ece", [](const MetricsReport& r) -> std::optional<double> { return r.ece; }},
      {"auroc", [](const MetricsReport& r) { return r.auroc; }},
      {"pr_p", [](const MetricsReport& r) { return r.pr_p; }},
      {"pr_n", [](const MetricsReport& r) { return r.pr_n; }},
      {"accuracy", [](const MetricsReport& r) -> std::optional<double> { return r.accuracy; }},
  };
  return kMetrics;
}

}  // namespace detail

/// Metrics per (dataset, method) plus the cross-method comparison table.
/// Undefined AUROC/AUPRC cells print "undefined"; the average column covers
/// the datasets where the metric is defined.
inline StageSummary cmd_evaluate(Run& run, const RunFilter& filter = {}, std::vector<CellReport>* cells_out = nullptr) {
  StageSummary summary;
  const auto& cfg = run.config();
  std::vector<CellReport> cells;
  std::vector<std::string> ds_names;
  std::vector<Method> methods;
  for (auto m : cfg.methods)
    if (filter.keep_method(m)) methods.push_back(m);

  for (const auto& ds : run.datasets()) {
    if (!filter.keep_dataset(ds.name)) continue;
    ds_names.push_back(ds.name);
    for (auto method : methods) {
      const auto path = run.results_path(ds.name, method);
      if (!fs::exists(path))
        throw Error("missing results for method '" + std::string(to_string(method)) + "' on dataset '" + ds.name +
                    "': " + path.string() + " (run aggregate first)");
      std::vector<EvalPair> pairs;
      std::size_t excluded = 0;
      for (const auto& line : detail::read_jsonl(path)) {
        if (line.at("excluded").get<bool>()) {
          ++excluded;
          continue;
        }
        pairs.push_back({line.at("confidence").get<double>(), line.at("correct").get<bool>()});
      }
      CellReport cell{ds.name, method, evaluate_pairs(pairs, cfg.ece_bins, excluded), confidence_histogram(pairs)};
      summary.items += pairs.size() + excluded;
      summary.failures += excluded;

      const auto dir = run.report_dir(ds.name, method);
      detail::write_file(dir / "metrics.json", to_json(cell.metrics).dump(2) + "\n");
      detail::write_file(dir / "metrics.csv", detail::metrics_csv(cell.metrics));
      detail::write_file(dir / "reliability.csv", detail::reliability_csv(cell.metrics));
      detail::write_file(dir / "histogram.csv", detail::histogram_csv(cell.histogram));
      for (const char* f : {"metrics.json", "metrics.csv", "reliability.csv", "histogram.csv"})
        summary.written.push_back(fs::relative(dir / f, run.out()).string());
      cells.push_back(std::move(cell));
    }
  }

  auto find = [&](const std::string& ds, Method m) -> const CellReport& {
    for (const auto& c : cells)
      if (c.dataset == ds && c.method == m) return c;
    throw Error("internal: missing cell");
  };

  std::string csv = "metric,method";
  for (const auto& d : ds_names) csv += "," + d;
  csv += ",avg\n";
  std::string md;
  for (const auto& [metric, get] : detail::table_metrics()) {
    md += "### " + metric + " (%)\n\n| method |";
    for (const auto& d : ds_names) md += " " + d + " |";
    md += " Avg |\n|---|";
    for (size_t i = 0; i <= ds_names.size(); ++i) md += "---|";
    md += "\n";
    for (auto m : methods) {
      csv += metric + "," + std::string(to_string(m));
      md += "| " + std::string(to_string(m)) + " |";
      double sum = 0.0;
      int defined = 0;
      for (const auto& d : ds_names) {
        const auto v = get(find(d, m).metrics);
        csv += "," + detail::fixed(v);
        md += " " + (v ? detail::fixed(*v * 100.0, 1) : std::string("undefined")) + " |";
        if (v) {
          sum += *v;
          ++defined;
        }
      }
      const std::optional<double> avg = defined ? std::optional<double>(sum / defined) : std::nullopt;
      csv += "," + detail::fixed(avg) + "\n";
      md += " " + (avg ? detail::fixed(*avg * 100.0, 1) : std::string("undefined")) + " |\n";
    }
    md += "\n";
  }
  detail::write_file(run.out() / "reports" / "comparison.csv", csv);
  detail::write_file(run.out() / "reports" / "comparison.md", md);
  summary.written.push_back("reports/comparison.csv");
  summary.written.push_back("reports/comparison.md");
  summary.exit_code = detail::exit_code_for(summary.failures, summary.items, cfg.invalid_rate_threshold);
  if (cells_out) *cells_out = std::move(cells);
  return summary;
}

struct SteeringRow {
  std::string dataset;
  int level = 0;
  std::string label;
  double level_mean = 0.0;    // percent
  double vanilla_mean = 0.0;  // percent
  DistributionShift shift;
};

/// Per-level confidence shift against the vanilla level, one row per
/// (non-vanilla level, dataset), grouped by level.
inline StageSummary cmd_steering_report(Run& run, const RunFilter& filter = {},
                                        std::vector<SteeringRow>* rows_out = nullptr) {
  StageSummary summary;
  const auto& cfg = run.config();
  std::vector<SteeringRow> rows;
  const ShiftOptions opts{cfg.js_log_base, 100.0};
  for (const auto& ds : run.datasets()) {
    if (!filter.keep_dataset(ds.name)) continue;
    const auto elicited = detail::read_elicitations(run, ds.name, ElicitKind::steering, Method::steerconf);
    std::map<int, ConfidenceHistogram> hist;
    for (int l = -cfg.depth; l <= cfg.depth; ++l) hist[l];
    for (const auto& rec : ds.records) {
      auto it = elicited.find(rec.id);
      if (it == elicited.end()) continue;
      for (const auto& e : it->second) {
        if (!e.valid) continue;
        hist[e.level].add(e.confidence, answers_equal(e.answer, rec.gold_answer, rec.answer_type));
      }
    }
    for (const auto& [l, h] : hist)
      if (h.total() == 0)
        throw Error("steering report: no valid elicitations for level " + std::to_string(l) + " on dataset " +
                    ds.name);

    std::string hcsv = "level,label,bin_low,bin_high,correct,incorrect\n";
    for (const auto& [l, h] : hist)
      for (int b = 0; b < ConfidenceHistogram::kBins; ++b)
        hcsv += std::to_string(l) + "," + level_label(l, cfg.depth) + "," + std::to_string(b * 5) + "," +
                std::to_string((b + 1) * 5) + "," + std::to_string(h.correct[static_cast<size_t>(b)]) + "," +
                std::to_string(h.incorrect[static_cast<size_t>(b)]) + "\n";
    const auto hpath = run.out() / "reports" / "steering" / (ds.name + "_histograms.csv");
    detail::write_file(hpath, hcsv);
    summary.written.push_back(fs::relative(hpath, run.out()).string());

    for (int l = -cfg.depth; l <= cfg.depth; ++l) {
      if (l == 0) continue;
      rows.push_back({ds.name, l, level_label(l, cfg.depth), hist[l].mean_percent(), hist[0].mean_percent(),
                      distribution_shift(hist[l], hist[0], opts)});
      ++summary.items;
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SteeringRow& a, const SteeringRow& b) { return a.level < b.level; });

  std::string csv = "level,label,dataset,mean_diff,signed_wasserstein,signed_js,wasserstein,js_div,level_mean,vanilla_mean\n";
  std::string md;
  int current = 0;
  for (const auto& r : rows) {
    csv += std::to_string(r.level) + "," + r.label + "," + r.dataset + "," + detail::fixed(r.shift.mean_diff, 4) + "," +
           detail::fixed(r.shift.signed_wasserstein, 4) + "," + detail::fixed(r.shift.signed_js, 4) + "," +
           detail::fixed(r.shift.wasserstein, 4) + "," + detail::fixed(r.shift.js_div, 4) + "," +
           detail::fixed(r.level_mean, 4) + "," + detail::fixed(r.vanilla_mean, 4) + "\n";
    if (md.empty() || r.level != current) {
      current = r.level;
      md += "\n### " + r.label + " vs vanilla\n\n| dataset | Mean | Was Dis | JS Div |\n|---|---|---|---|\n";
    }
    md += "| " + r.dataset + " | " + detail::fixed(r.shift.mean_diff, 2) + " | " +
          detail::fixed(r.shift.signed_wasserstein, 2) + " | " + detail::fixed(r.shift.signed_js, 2) + " |\n";
  }
  detail::write_file(run.out() / "reports" / "steering" / "steering_report.csv", csv);
  detail::write_file(run.out() / "reports" / "steering" / "steering_report.md", md);
  summary.written.push_back("reports/steering/steering_report.csv");
  summary.written.push_back("reports/steering/steering_report.md");
  if (rows_out) *rows_out = std::move(rows);
  return summary;
}

// ---------------------------------------------------------------------------
// Synthetic demo

/// Overconfident profile used by simulate-demo: vanilla confidence near 97%
/// on questions answered correctly half the time.
inline SimProfile demo_profile() {
  SimProfile p;
  p.p_correct = 0.5;
  p.base_confidence = 0.97;
  p.steering_shift = {{-2, -0.35}, {-1, -0.15}, {0, 0.0}, {1, 0.01}, {2, 0.02}};
  p.noise_scale = 0.05;
  p.steering_flip_prob = 0.1;
  return p;
}

/// Four-option multiple-choice items with seeded gold letters.
inline Dataset make_synthetic_dataset(std::size_t n, std::uint64_t seed, std::string name = "synthetic") {
  Dataset ds{std::move(name), {}};
  std::mt19937_64 rng(digest_seed(sha256("synthetic-dataset\x1e" + std::to_string(seed))));
  static constexpr std::array<const char*, 4> kLetters = {"A", "B", "C", "D"};
  for (std::size_t i = 0; i < n; ++i) {
    QuestionRecord r;
    r.id = "syn-" + std::to_string(i + 1);
    r.answer_type = AnswerType::multiple_choice_letter;
    for (const char* l : kLetters) r.options.push_back({l, "candidate " + std::string(l) + " for item " + std::to_string(i + 1)});
    r.gold_answer = kLetters[rng() % 4];
    r.question = inline_options("Synthetic item " + std::to_string(i + 1) + ": which candidate is the hidden label?",
                                r.options);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

/// Writes <out>/data/synthetic.jsonl and <out>/config.json for a simulated run
/// over all methods, and returns the config.
inline RunConfig write_demo(const fs::path& out, std::size_t n, std::uint64_t seed, Mode mode = Mode::plain) {
  const auto ds = make_synthetic_dataset(n, seed);
  detail::write_file(out / "data" / "synthetic.jsonl", serialize_dataset(ds));
  RunConfig c;
  c.datasets = {{"synthetic", "data/synthetic.jsonl"}};
  c.backend.kind = BackendKind::simulated;
  c.backend.model_id = "simulated-overconfident";
  c.backend.parallelism = 4;
  c.backend.retry_backoff_ms = 0;
  c.sim_profile = demo_profile();
  c.mode = mode;
  c.methods = {kAllMethods.begin(), kAllMethods.end()};
  c.output_dir = ".";
  c.seed = seed;
  detail::write_file(out / "config.json", to_json(c).dump(2) + "\n");
  return load_run_config(out / "config.json");
}

struct PipelineSummary {
  StageSummary elicit, aggregate, evaluate, steering;
  int exit_code() const {
    int worst = 0;
    for (int c : {elicit.exit_code, aggregate.exit_code, evaluate.exit_code, steering.exit_code}) {
      if (c == 1) return 1;
      worst = std::max(worst, c);
    }
    return worst;
  }
};

/// All four stages in order. The steering report runs only when a steering
/// method is configured.
inline PipelineSummary run_all(Run& run, const RunFilter& filter = {}) {
  PipelineSummary s;
  s.elicit = cmd_elicit(run, filter);
  s.aggregate = cmd_aggregate(run, filter);
  s.evaluate = cmd_evaluate(run, filter);
  if (run.kinds(filter).count(ElicitKind::steering)) s.steering = cmd_steering_report(run, filter);
  return s;
}

}  // namespace steerconf

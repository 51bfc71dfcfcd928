// steerconf command-line driver.
//
//   steerconf elicit          --config run.json [--method M]... [--dataset D]... [--seed S] [--out DIR]
//   steerconf aggregate       --config run.json [...]
//   steerconf evaluate        --config run.json [...]
//   steerconf steering-report --config run.json [...]
//   steerconf simulate-demo   --out DIR [--n 500] [--seed 42] [--mode plain|cot]
//
// Exit status: 0 clean, 2 some invalid items within the threshold, 1 error or
// invalid rate above the threshold.

#include <iostream>

#include <CLI11.hpp>

#include "steerconf/http_transport.hpp"
#include "steerconf/steerconf.hpp"

namespace {

using namespace steerconf;

struct Common {
  std::string config;
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--method", c.methods, "Restrict to these methods");
  cmd->add_option("--dataset", c.datasets, "Restrict to these datasets");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out", c.out, "Override the output directory");
}

Run make_run(const Common& c) {
  auto cfg = load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  for (const auto& m : c.methods) {
    const auto pm = parse_method(m);
    if (!pm) throw ConfigError("unknown method: " + m);
    if (std::find(cfg.methods.begin(), cfg.methods.end(), *pm) == cfg.methods.end())
      throw ConfigError("method '" + m + "' is not enabled in the config");
  }
  for (const auto& d : c.datasets) {
    if (std::none_of(cfg.datasets.begin(), cfg.datasets.end(), [&](const DatasetSpec& s) { return s.name == d; }))
      throw ConfigError("dataset '" + d + "' is not in the config");
  }
  return Run(std::move(cfg), [](const BackendConfig& b) { return std::make_unique<HttpTransport>(b); });
}

RunFilter filter_of(const Common& c) { return {c.methods, c.datasets}; }

void report(const char* stage, const StageSummary& s) {
  std::cout << stage << ": " << s.items << " items, " << s.failures << " invalid";
  if (s.transport_calls) std::cout << ", " << s.transport_calls << " backend calls";
  std::cout << "\n";
  for (const auto& w : s.written) std::cout << "  wrote " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steered confidence elicitation and calibration"};
  app.require_subcommand(1);

  Common elicit_opts, aggregate_opts, evaluate_opts, steering_opts;
  auto* elicit = app.add_subcommand("elicit", "Query the backend and parse responses");
  add_common(elicit, elicit_opts);
  auto* aggregate = app.add_subcommand("aggregate", "Turn elicitations into one graded answer per question");
  add_common(aggregate, aggregate_opts);
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics and the comparison table");
  add_common(evaluate, evaluate_opts);
  auto* steering = app.add_subcommand("steering-report", "Confidence shift of each steering level vs vanilla");
  add_common(steering, steering_opts);

  std::string demo_out;
  std::size_t demo_n = 500;
  std::uint64_t demo_seed = 42;
  std::string demo_mode = "plain";
  auto* demo = app.add_subcommand("simulate-demo", "Synthetic dataset + simulated backend, all stages");
  demo->add_option("--out", demo_out, "Output directory")->required();
  demo->add_option("--n", demo_n, "Number of synthetic questions")->check(CLI::PositiveNumber);
  demo->add_option("--seed", demo_seed, "Seed");
  demo->add_option("--mode", demo_mode, "Prompt mode")->check(CLI::IsMember({"plain", "cot"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (elicit->parsed()) {
      auto run = make_run(elicit_opts);
      const auto s = cmd_elicit(run, filter_of(elicit_opts));
      report("elicit", s);
      return s.exit_code;
    }
    if (aggregate->parsed()) {
      auto run = make_run(aggregate_opts);
      const auto s = cmd_aggregate(run, filter_of(aggregate_opts));
      report("aggregate", s);
      return s.exit_code;
    }
    if (evaluate->parsed()) {
      auto run = make_run(evaluate_opts);
      const auto s = cmd_evaluate(run, filter_of(evaluate_opts));
      report("evaluate", s);
      return s.exit_code;
    }
    if (steering->parsed()) {
      auto run = make_run(steering_opts);
      const auto s = cmd_steering_report(run, filter_of(steering_opts));
      report("steering-report", s);
      return s.exit_code;
    }
    if (demo->parsed()) {
      auto cfg = write_demo(demo_out, demo_n, demo_seed, *parse_mode(demo_mode));
      Run run(std::move(cfg));
      const auto s = run_all(run);
      report("elicit", s.elicit);
      report("aggregate", s.aggregate);
      report("evaluate", s.evaluate);
      report("steering-report", s.steering);
      return s.exit_code();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

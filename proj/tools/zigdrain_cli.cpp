#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "zigdrain/experiments.hpp"

namespace fs = std::filesystem;
using namespace zigdrain;

namespace {

fs::path default_out_root() {
  if (const char* env = std::getenv("ZIGDRAIN_OUT"); env && *env) return env;
  return "zigdrain_out";
}

TraceLog load_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return TraceLog::read_csv(is);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery-depletion attack simulator for secured 802.15.4 networks"};
  app.require_subcommand(1);

  std::string kind, scenario_path, seed_spec = "", out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSVs plus a summary");
  run->add_option("kind", kind, "Experiment kind")->required()->check([](const std::string& k) {
    try {
      experiment_kind_from(k);
      return std::string();
    } catch (const Error& e) {
      return std::string(e.what());
    }
  });
  run->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed_spec, "Seed, range a-b or list a,b,c (default: the scenario's seeds)");
  run->add_option("--out", out_dir, "Output directory (default: $ZIGDRAIN_OUT/<scenario>/<kind>)");

  std::string dir_a, dir_b, cmp_out;
  auto* compare = app.add_subcommand("compare", "Per-node throughput and drain variation between two runs");
  compare->add_option("baseline", dir_a, "Baseline run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("treatment", dir_b, "Treatment run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", cmp_out, "Write variation.csv here");

  std::string trace_path, baseline_path, loc_scenario, loc_seed = "1";
  auto* localize = app.add_subcommand("localize", "Estimate the attacker position from a trace");
  localize->add_option("--trace", trace_path, "Attacked trace CSV")->required()->check(CLI::ExistingFile);
  localize->add_option("--scenario", loc_scenario, "Scenario the trace was produced from")
      ->required()
      ->check(CLI::ExistingFile);
  localize->add_option("--baseline", baseline_path, "Attack-free trace CSV (default: simulate one)")
      ->check(CLI::ExistingFile);
  localize->add_option("--seed", loc_seed, "Seed for the simulated baseline");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
  validate->add_option("scenario", validate_path, "Scenario file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const Scenario s = parse_scenario(scenario_path);
      const auto seeds = seed_spec.empty() ? s.seeds : parse_seed_list(seed_spec);
      const fs::path out = out_dir.empty() ? default_out_root() / s.name / kind : fs::path(out_dir);
      const RunReport report = run_experiment(experiment_kind_from(kind), s, seeds, out, scenario_path);
      std::cout << report.summary << "outputs in " << out.string() << '\n';
      return report.ok ? 0 : 3;
    }
    if (*compare) {
      const auto rows = compare_runs(dir_a, dir_b);
      if (!cmp_out.empty()) {
        fs::create_directories(cmp_out);
        write_variation_csv(fs::path(cmp_out) / "variation.csv", rows);
      }
      std::cout << "node  dS%      dDrain%\n";
      for (const auto& r : rows)
        std::cout << r.node << "  " << csv_number(r.delta_s_pct) << "  " << csv_number(r.delta_drain_pct) << '\n';
      return 0;
    }
    if (*localize) {
      const Scenario s = parse_scenario(loc_scenario);
      const TraceLog attacked = load_trace(trace_path);
      TraceLog baseline;
      if (baseline_path.empty()) {
        Scenario quiet = s;
        quiet.attackers.clear();
        baseline = simulate(quiet, parse_seed_list(loc_seed).front()).trace;
      } else {
        baseline = load_trace(baseline_path);
      }
      const LocalizationRun r = localize_traces(s, baseline, attacked, shortest_path_routes(s.topology));
      std::cout << "suspects:";
      for (NodeId n : r.suspects) std::cout << ' ' << n;
      std::cout << '\n';
      if (!r.located) {
        std::cout << "no suspects; attacker not located\n";
        return 4;
      }
      std::cout << "group:";
      for (NodeId n : r.chosen) std::cout << ' ' << n;
      std::cout << "\nestimate: " << csv_number(r.estimate.x) << ", " << csv_number(r.estimate.y) << '\n';
      return 0;
    }
    if (*validate) {
      const Scenario s = parse_scenario(validate_path);
      std::cout << s.name << ": ok (" << s.topology.size() << " nodes, gateway " << s.topology.gateway << ", "
                << s.attackers.size() << " attackers)\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// rsv: run state verification scenarios from the command line.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "rsv/errors.hpp"
#include "rsv/orchestrator.hpp"

namespace {

int exit_code(rsv::RunOutcome o) {
  switch (o) {
    case rsv::RunOutcome::converged: return 0;
    case rsv::RunOutcome::attacker_isolated: return 2;
    case rsv::RunOutcome::exhausted: return 3;
  }
  return 3;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw rsv::ConfigError("expected a range like 1..7, got '" + text + "'");
  }
}

void print_summary(const rsv::RunReport& report) {
  std::printf("outcome: %s\n", rsv::to_string(report.outcome));
  for (const auto& ph : report.phases) {
    std::printf("phase %d regions [", ph.phase);
    for (std::size_t i = 0; i < ph.regions.size(); ++i) std::printf("%s%d", i ? " " : "", ph.regions[i]);
    std::printf("] %s after %d iterations (displacement %.3g, gap %.3g)", rsv::to_string(ph.outcome), ph.iterations,
                ph.final_displacement, ph.final_gap);
    if (ph.outcome == rsv::PhaseOutcome::verdict) std::printf(", verdict: region %d", ph.verdict_region);
    std::printf("\n");
  }
  if (!report.isolated.empty()) {
    std::printf("isolated:");
    for (int r : report.isolated) std::printf(" %d", r);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized state verification with attacker detection"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> attacker;
  std::string attack_kind;
  std::optional<int> max_iters;
  bool emit_traces = false;
  int threads = 0;

  auto* verify = app.add_subcommand("verify", "Run one scenario");
  verify->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  verify->add_option("--seed", seed, "Seed for measurement noise and attack draws");
  verify->add_option("--out", out_dir, "Output directory (defaults to the scenario's)");
  verify->add_option("--attacker", attacker, "Attacking region");
  verify->add_option("--attack-kind", attack_kind, "none, measurement, state_update or stealth");
  verify->add_option("--max-iters", max_iters, "Iteration cap per phase");
  verify->add_flag("--emit-traces", emit_traces, "Write per-iteration trace CSVs");
  verify->add_option("--threads", threads, "Worker threads per round");

  std::string attackers = "1..7";
  int seeds = 20;
  auto* sweep = app.add_subcommand("sweep", "Run every attacker over a range of seeds");
  sweep->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--attackers", attackers, "Attacker range, e.g. 1..7");
  sweep->add_option("--seeds", seeds, "Seeds per attacker (1..n)")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "Directory for the per-attacker trust-score files");

  std::string report_path;
  auto* analyze = app.add_subcommand("analyze", "Print the deviation table of a report");
  analyze->add_option("--report", report_path, "report.json from verify")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*analyze) {
      std::ifstream in(report_path);
      const auto j = nlohmann::json::parse(in);
      std::cout << "outcome: " << j.value("outcome", "unknown") << "\n" << rsv::format_deviation_table(j);
      return 0;
    }

    auto config = rsv::load_scenario(scenario_path);
    if (threads > 0) config.threads = threads;

    if (*verify) {
      if (seed) {
        config.measurement.seed = *seed;
        config.attack.seed = *seed;
      }
      if (attacker) config.attack.attacker = *attacker;
      if (!attack_kind.empty()) config.attack.kind = rsv::parse_attack_kind(attack_kind);
      if (attacker && attack_kind.empty() && !config.attack.active()) config.attack.kind = rsv::AttackKind::state_update;
      if (max_iters) config.admm.max_iterations = *max_iters;
      if (emit_traces) config.emit_traces = true;
      if (!out_dir.empty()) config.output_dir = out_dir;
      config.admm.validate();
      rsv::Scenario scenario(config);
      const auto report = rsv::run_verification(scenario);
      print_summary(report);
      if (!scenario.config.output_dir.empty()) {
        rsv::emit_outputs(scenario, report, scenario.config.output_dir);
        std::printf("outputs: %s\n", scenario.config.output_dir.string().c_str());
      }
      return exit_code(report.outcome);
    }

    // sweep
    const auto [first, last] = parse_range(attackers);
    if (first < 1 || last < first) throw rsv::ConfigError("bad attacker range " + attackers);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    int total = 0;
    int hits = 0;
    for (int j = first; j <= last; ++j) {
      int fired = 0;
      int correct = 0;
      std::string bars = "seed,region,pi\n";
      for (int s = 1; s <= seeds; ++s) {
        auto c = config;
        c.attack.attacker = j;
        c.attack.kind = rsv::AttackKind::state_update;
        c.attack.seed = static_cast<std::uint64_t>(s);
        c.measurement.seed = static_cast<std::uint64_t>(s);
        c.max_restarts = 0;
        rsv::Scenario scenario(c);
        const auto report = rsv::run_verification(scenario);
        const auto& ph = report.phases.front();
        if (ph.outcome == rsv::PhaseOutcome::verdict) {
          ++fired;
          if (ph.verdict_region == j) ++correct;
        }
        if (!ph.pi_history.empty())
          for (std::size_t i = 0; i < ph.regions.size(); ++i)
            bars += std::to_string(s) + ',' + std::to_string(ph.regions[i]) + ',' +
                    std::to_string(ph.pi_history.back()[i]) + '\n';
      }
      total += seeds;
      hits += correct;
      std::printf("attacker %d: verdict in %d/%d runs, correct in %d/%d\n", j, fired, seeds, correct, seeds);
      if (!out_dir.empty()) {
        std::ofstream f(std::filesystem::path(out_dir) / ("pi_attacker_" + std::to_string(j) + ".csv"));
        f << bars;
      }
    }
    std::printf("identified %d/%d\n", hits, total);
    return 0;
  } catch (const rsv::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const rsv::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "json error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

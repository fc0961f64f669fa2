#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "rsv/errors.hpp"
#include "rsv/orchestrator.hpp"
#include "support.hpp"

using namespace rsv;

namespace {

ScenarioConfig scenario(const std::string& name) { return load_scenario(test::data("scenarios/" + name + ".json")); }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rsv_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RSV_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("scenario files") {
  const auto cfg = scenario("golden_no_attack");
  CHECK(cfg.name == "golden_no_attack");
  CHECK(std::filesystem::exists(cfg.case_file));
  CHECK(std::filesystem::exists(cfg.region_map));
  CHECK(cfg.admm.c1 == 0.5);
  CHECK(cfg.measurement.noise_variance == 1e-4);

  const auto base = test::data("scenarios");
  auto j = nlohmann::json::parse(slurp(base / "golden_no_attack.json"));
  j["unexpected"] = 1;
  CHECK_THROWS_AS(parse_scenario(j, base), ConfigError);
  j.erase("unexpected");
  j["admm"]["c2"] = -1.0;
  CHECK_THROWS_AS(parse_scenario(j, base), ConfigError);
  j = nlohmann::json::parse(slurp(base / "golden_no_attack.json"));
  j["case_file"] = "../cases/missing.m";
  CHECK_THROWS_AS(parse_scenario(j, base), ConfigError);

  // the echo parses back to the same configuration
  const auto echo = scenario_to_json(cfg);
  const auto again = parse_scenario(nlohmann::json::parse(echo.dump()), base);
  CHECK(scenario_to_json(again) == echo);
}

TEST_CASE("scenario data") {
  auto cfg = scenario("golden_zero_noise");
  REQUIRE(cfg.measurement.noise_variance == 0.0);
  const Scenario clean(cfg);
  for (int g : clean.space.measured_indices()) CHECK(clean.data.measurements[0][g] == clean.data.truth[0][g]);

  cfg.measurement.noise_variance = 1.0;
  cfg.measurement.seed = 5;
  const Scenario a(cfg);
  const Scenario b(cfg);
  CHECK(a.data.measurements[0] == b.data.measurements[0]);
  cfg.measurement.seed = 6;
  const Scenario c(cfg);
  CHECK(a.data.measurements[0] != c.data.measurements[0]);
  CHECK(a.data.truth[0] == c.data.truth[0]);
}

TEST_CASE("two-bus run matches its centralized solution") {
  const Scenario sc(scenario("two_bus"));
  const auto report = run_verification(sc);
  CHECK(report.outcome == RunOutcome::converged);
  REQUIRE(report.phases.size() == 1);
  CHECK(report.phases[0].final_gap <= sc.config.admm.tolerance);
  const auto oracle =
      solve_centralized(sc.partition, sc.inputs_for_all(sc.partition), sc.config.admm, sc.space.dimension());
  CHECK((report.stitched[0] - oracle.x[0]).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("no-attack feeder run") {
  const Scenario sc(scenario("golden_no_attack"));
  const auto report = run_verification(sc);
  CHECK(report.outcome == RunOutcome::converged);
  REQUIRE(report.phases.size() == 1);
  const auto& ph = report.phases[0];
  CHECK(ph.termination == "state");
  CHECK(ph.final_displacement <= 1e-3);
  CHECK(ph.final_gap <= 1e-3);
  CHECK(report.components == std::vector<std::vector<int>>{{1, 2, 3, 4, 5, 6, 7}});

  // regions 1 and 2 agree on the injections they share
  const auto& v1 = sc.partition.view(1);
  const auto& v2 = sc.partition.view(2);
  for (int bus : {42, 43, 54, 73}) {
    const int g = sc.space.bus_var(sc.bus_index(bus), VarKind::p);
    CHECK(std::abs(ph.x.at(1)[0][v1.local_index(g)] - ph.x.at(2)[0][v2.local_index(g)]) <= 1e-3);
  }

  const auto audit = audit_phase(ph);
  CHECK(audit.discrepancies.empty());
  CHECK(audit.messages_checked == ph.messages.size());
  CHECK(audit.messages_checked > 0);
  CHECK(audit.trust_rounds_checked == ph.pi_history.size());

  // the latest trust score on the global ledger is the π detection used
  const auto* e = ph.ledgers->global().read_latest(PayloadKind::trust_score, kSystemAuthor);
  REQUIRE(e != nullptr);
  const auto [k, pi] = decode_trust(e->payload);
  CHECK(k == ph.iterations);
  CHECK(pi == ph.pi_history.back());
}

TEST_CASE("runs are deterministic and an idle attack changes nothing") {
  auto cfg = scenario("golden_attack_1");
  cfg.emit_traces = true;
  const Scenario a(cfg);
  const Scenario b(cfg);
  const auto ra = run_verification(a);
  const auto rb = run_verification(b);
  REQUIRE(ra.phases.size() == rb.phases.size());
  for (std::size_t i = 0; i < ra.phases.size(); ++i) {
    CHECK(ra.phases[i].trace_csv == rb.phases[i].trace_csv);
    CHECK(ra.phases[i].pair_csv == rb.phases[i].pair_csv);
  }
  auto ja = report_to_json(a, ra);
  auto jb = report_to_json(b, rb);
  ja.erase("wall_clock_seconds");
  jb.erase("wall_clock_seconds");
  CHECK(ja.dump() == jb.dump());

  auto plain = scenario("golden_no_attack");
  plain.emit_traces = true;
  auto idle = plain;
  idle.attack.attacker = 3;
  idle.attack.kind = AttackKind::none;
  idle.attack.seed = 99;
  const auto rp = run_verification(Scenario(plain));
  const auto ri = run_verification(Scenario(idle));
  CHECK(rp.phases[0].trace_csv == ri.phases[0].trace_csv);
}

TEST_CASE("isolating region 1 restarts without it") {
  const Scenario sc(scenario("golden_attack_1"));
  const auto report = run_verification(sc);
  CHECK(report.outcome == RunOutcome::attacker_isolated);
  CHECK(report.isolated == std::vector<int>{1});
  REQUIRE(report.phases.size() == 2);
  CHECK(report.phases[0].outcome == PhaseOutcome::verdict);
  CHECK(report.phases[0].verdict_region == 1);
  const auto& restart = report.phases[1];
  CHECK(restart.outcome == PhaseOutcome::converged);
  CHECK(restart.regions == std::vector<int>{2, 3, 4, 5, 6, 7});
  // nothing from region 1 survives into the restart
  CHECK(restart.ledgers->locals().count(1) == 0);
  for (const auto& [key, ledger] : restart.ledgers->channels()) {
    CHECK(key.first != 1);
    CHECK(key.second != 1);
  }
  for (const auto& m : restart.messages) CHECK(m.from != 1);
  for (const auto& e : restart.ledgers->global().entries()) CHECK(e.author != 1);
  CHECK(audit_phase(report.phases[0]).discrepancies.empty());
  CHECK(audit_phase(restart).discrepancies.empty());

  // a bus is verified exactly when some surviving region holds its injection
  int dropped = 0;
  for (const auto& row : report.deviations) {
    const int g = sc.space.bus_var(sc.bus_index(row.bus), VarKind::p);
    bool held = false;
    for (int r : restart.regions) held = held || sc.partition.view(r).local_index(g) >= 0;
    CHECK(row.available == held);
    if (!held) {
      CHECK(row.region == 1);
      ++dropped;
    }
  }
  CHECK(dropped > 0);
}

TEST_CASE("deviation table") {
  SUBCASE("schedule equals truth") {
    const Scenario sc(scenario("golden_zero_noise"));
    const auto report = run_verification(sc);
    REQUIRE(report.outcome == RunOutcome::converged);
    for (const auto& row : report.deviations) {
      CHECK(row.available);
      CHECK(std::abs(row.deviation) < 1e-6);
    }
  }
  SUBCASE("one prosumer deviates") {
    const Scenario sc(scenario("golden_deviation"));
    REQUIRE(sc.config.truth_deviation.at(42) == 0.05);
    const auto report = run_verification(sc);
    REQUIRE(report.outcome == RunOutcome::converged);
    const auto& top = report.deviations.front();
    CHECK(top.bus == 42);
    CHECK(top.deviation < 0.0);
    CHECK(std::abs(top.deviation) > 2.0 * std::abs(report.deviations[1].deviation));
    const auto oracle =
        solve_centralized(sc.partition, sc.inputs_for_all(sc.partition), sc.config.admm, sc.space.dimension());
    const int g = sc.space.bus_var(sc.bus_index(42), VarKind::p);
    CHECK(top.deviation == doctest::Approx(top.scheduled - oracle.x[0][g]).epsilon(1e-3));
    for (std::size_t i = 1; i < report.deviations.size(); ++i)
      CHECK(std::abs(report.deviations[i - 1].deviation) >= std::abs(report.deviations[i].deviation));
  }
  SUBCASE("unconverged runs report nothing") {
    auto cfg = scenario("golden_no_attack");
    cfg.admm.max_iterations = 3;
    const Scenario sc(cfg);
    const auto report = run_verification(sc);
    CHECK(report.outcome == RunOutcome::exhausted);
    for (const auto& row : report.deviations) CHECK_FALSE(row.available);
  }
}

TEST_CASE("outputs") {
  auto cfg = scenario("two_bus");
  cfg.emit_traces = true;
  const Scenario sc(cfg);
  const auto report = run_verification(sc);
  const auto dir = scratch("outputs");
  emit_outputs(sc, report, dir);
  for (const char* f : {"report.json", "pi_history.csv", "pi_final.csv", "trace_phase0.csv", "pairs_phase0.csv"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(std::filesystem::exists(dir / "ledgers" / "phase0" / "GL.jsonl"));
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j.at("outcome") == "converged");
  CHECK(j.at("config").at("name") == "two_bus");
  CHECK(j.at("deviations").size() == 1);
  const auto table = format_deviation_table(j);
  CHECK(table.find("bus") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const auto out = scratch("cli");
  const std::string sc = test::data("scenarios/two_bus.json").string();
  CHECK(run_cli("verify --scenario " + sc + " --out " + out.string()) == 0);
  CHECK(std::filesystem::exists(out / "report.json"));
  CHECK(run_cli("analyze --report " + (out / "report.json").string()) == 0);
  CHECK(run_cli("verify --scenario " + sc + " --max-iters 1 --out " + out.string()) == 3);
  CHECK(run_cli("verify --scenario " + test::data("scenarios/golden_attack_1.json").string() + " --out " +
                out.string()) == 2);
  CHECK(run_cli("verify --scenario " + sc + " --attack-kind loud") == 1);
  CHECK(run_cli("verify --scenario /nonexistent.json") == 1);
  CHECK(run_cli("frobnicate") == 1);
  std::filesystem::remove_all(out);
}

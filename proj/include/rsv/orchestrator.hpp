#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsv/admm.hpp"
#include "rsv/adversary.hpp"
#include "rsv/constraints.hpp"
#include "rsv/detection.hpp"
#include "rsv/ledger.hpp"
#include "rsv/network.hpp"
#include "rsv/partition.hpp"
#include "rsv/power_flow.hpp"
#include "rsv/variables.hpp"

namespace rsv {

struct MeasurementConfig {
  MeasurementPolicy policy;
  double noise_variance = 1e-4;
  std::uint64_t seed = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path case_file;
  std::filesystem::path region_map;
  AdmmConfig admm;
  DetectionConfig detection;
  MeasurementConfig measurement;
  AttackSpec attack;
  std::map<int, double> schedule_override;  // bus id -> 𝔭*
  std::map<int, double> truth_deviation;    // bus id -> offset of the true injection from 𝔭*
  std::optional<int> max_restarts;          // default N - 1
  std::filesystem::path output_dir;
  // Stop as soon as π settles even without a verdict.
  bool stop_on_settled_trust = false;
  bool warm_start = false;
  int threads = 1;
  bool emit_traces = false;
};

/// Paths inside the file are resolved against the file's directory.
ScenarioConfig parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::ordered_json scenario_to_json(const ScenarioConfig& config);

struct ScenarioData {
  PowerFlowSolution truth_flow;
  std::vector<Eigen::VectorXd> truth;         // per t, global
  std::vector<Eigen::VectorXd> measurements;  // per t, global; only measured entries are meaningful
  Eigen::VectorXd schedule;                   // 𝔭* per bus
};

ScenarioData generate_scenario_data(const GridNetwork& net, const SystemVariableSpace& space,
                                    const ScenarioConfig& config);

/// Everything derived from a scenario before any iteration happens.
struct Scenario {
  explicit Scenario(ScenarioConfig cfg);

  ScenarioConfig config;
  GridNetwork net;
  SystemVariableSpace space;
  ConstraintMatrix H;
  RegionAssignment assignment;
  Partition partition;
  ScenarioData data;

  /// What region `view.id` uploads to its local ledger (attacks included).
  RegionInputs inputs_for(const RegionView& view) const;
  std::map<int, RegionInputs> inputs_for_all(const Partition& part) const;
  int bus_index(int source_id) const;
};

enum class PhaseOutcome { converged, verdict, exhausted };
const char* to_string(PhaseOutcome o);

struct MessageRecord {
  int k = 0;
  int from = 0;
  int to = 0;
  SharedSlice slice;
};

struct PhaseResult {
  int phase = 0;
  std::vector<int> regions;
  PhaseOutcome outcome = PhaseOutcome::exhausted;
  std::string termination;  // which test ended the phase
  int iterations = 0;
  int verdict_region = 0;
  bool damped = false;
  double final_displacement = 0.0;
  double final_gap = 0.0;
  std::vector<std::vector<double>> pi_history;  // per round, aligned with `regions`
  std::vector<double> displacement_history;
  std::vector<double> gap_history;
  std::map<int, std::vector<Eigen::VectorXd>> x;  // final local iterates per region and t
  std::vector<MessageRecord> messages;            // every slice a region consumed
  std::map<std::pair<int, int>, double> disagreement;
  std::string trace_csv;
  std::string pair_csv;
  std::shared_ptr<LedgerSet> ledgers;
};

struct DeviationRow {
  int bus = 0;  // source id
  int region = 0;
  double scheduled = 0.0;
  double verified = 0.0;
  double deviation = 0.0;  // 𝔭* − p
  bool available = false;
};

enum class RunOutcome { converged, attacker_isolated, exhausted };
const char* to_string(RunOutcome o);

struct RunReport {
  RunOutcome outcome = RunOutcome::exhausted;
  std::vector<int> isolated;
  std::vector<PhaseResult> phases;
  std::vector<std::vector<int>> components;  // surviving components at the end
  std::vector<Eigen::VectorXd> stitched;     // per t, NaN where no converged region holds the variable
  std::vector<DeviationRow> deviations;
  double wall_clock_seconds = 0.0;
  nlohmann::ordered_json config_echo;
};

/// Partition after removing `isolated`, restricted to one component.
Partition surviving_partition(const Scenario& scenario, const std::vector<int>& isolated,
                              const std::vector<int>& component);

PhaseResult run_phase(const Scenario& scenario, const Partition& part, int phase, bool attack_live,
                      const PhaseResult* warm = nullptr);
RunReport run_verification(const Scenario& scenario);

std::vector<DeviationRow> compute_deviations(const Scenario& scenario, const RunReport& report);

/// Average of each variable over the converged regions holding it.
std::vector<Eigen::VectorXd> stitch(const Scenario& scenario, const std::vector<const PhaseResult*>& phases);

nlohmann::ordered_json report_to_json(const Scenario& scenario, const RunReport& report);
void emit_outputs(const Scenario& scenario, const RunReport& report, const std::filesystem::path& dir);
std::string format_deviation_table(const nlohmann::json& report);

struct AuditResult {
  std::size_t messages_checked = 0;
  std::size_t trust_rounds_checked = 0;
  std::vector<std::string> discrepancies;
};

/// Replays every ledger of a phase and reconstructs the messages and trust
/// scores the phase actually used.
AuditResult audit_phase(const PhaseResult& phase);

// Ledger payload codecs.
std::vector<std::uint8_t> encode_inputs(const RegionInputs& in);
RegionInputs decode_inputs(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_state(int k, const std::vector<Eigen::VectorXd>& x);
std::vector<std::uint8_t> encode_slice(int k, int from, int to, const SharedSlice& slice);
MessageRecord decode_slice(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_disagreement(int k, int i, int j, double d);
std::vector<std::uint8_t> encode_trust(int k, const std::vector<int>& regions, const Eigen::VectorXd& pi);
std::pair<int, std::vector<double>> decode_trust(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_verdict(int k, const Verdict& v);

}  // namespace rsv

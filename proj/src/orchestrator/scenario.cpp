#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "rsv/errors.hpp"
#include "rsv/orchestrator.hpp"

namespace rsv {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::map<int, double> read_bus_map(const json& obj, const char* key) {
  std::map<int, double> out;
  if (!obj.contains(key) || obj.at(key).is_null()) return out;
  const auto& m = obj.at(key);
  if (!m.is_object()) throw ConfigError(std::string(key) + " must map bus ids to values");
  for (const auto& [k, v] : m.items()) {
    int bus = 0;
    try {
      std::size_t used = 0;
      bus = std::stoi(k, &used);
      if (used != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ConfigError(std::string(key) + ": '" + k + "' is not a bus id");
    }
    if (!v.is_number()) throw ConfigError(std::string(key) + ": value for bus " + k + " is not a number");
    out[bus] = v.get<double>();
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"name", "case_file", "region_map", "admm", "detection", "measurement", "attack",
              "schedule_override", "truth_deviation", "max_restarts", "output_dir",
              "stop_on_settled_trust", "warm_start", "threads", "emit_traces"},
             "scenario");
  ScenarioConfig c;
  read(j, "name", c.name);
  std::string path;
  if (!j.contains("case_file")) throw ConfigError("scenario needs case_file");
  if (!j.contains("region_map")) throw ConfigError("scenario needs region_map");
  read(j, "case_file", path);
  c.case_file = base_dir / path;
  read(j, "region_map", path);
  c.region_map = base_dir / path;
  for (const auto& p : {c.case_file, c.region_map})
    if (!std::filesystem::exists(p)) throw ConfigError("referenced file does not exist: " + p.string());

  if (j.contains("admm")) {
    const auto& a = j.at("admm");
    check_keys(a,
               {"c1", "c2", "tolerance", "max_iterations", "horizon", "unweighted_schedule_update", "canonical_dual",
                "ridge", "start"},
               "admm");
    read(a, "c1", c.admm.c1);
    read(a, "c2", c.admm.c2);
    read(a, "tolerance", c.admm.tolerance);
    read(a, "max_iterations", c.admm.max_iterations);
    read(a, "horizon", c.admm.horizon);
    read(a, "unweighted_schedule_update", c.admm.unweighted_schedule_update);
    read(a, "canonical_dual", c.admm.canonical_dual);
    read(a, "ridge", c.admm.ridge);
    std::string start = "flat";
    read(a, "start", start);
    if (start == "flat") c.admm.start = StartPolicy::flat;
    else if (start == "schedule_seeded") c.admm.start = StartPolicy::schedule_seeded;
    else throw ConfigError("admm.start must be 'flat' or 'schedule_seeded'");
  }
  c.admm.validate();

  if (j.contains("detection")) {
    const auto& d = j.at("detection");
    check_keys(d,
               {"alpha", "pi_tolerance", "beta", "beta_overrides", "normalization_guard", "min_disagreement",
                "damping"},
               "detection");
    if (d.contains("alpha")) {
      const auto& al = d.at("alpha");
      if (al.is_string() && al.get<std::string>() == "harmonic") {
        c.detection.alpha_schedule = DetectionConfig::Alpha::harmonic;
      } else if (al.is_number()) {
        c.detection.alpha_schedule = DetectionConfig::Alpha::constant;
        c.detection.alpha_constant = al.get<double>();
      } else {
        throw ConfigError("detection.alpha must be 'harmonic' or a number");
      }
    }
    read(d, "pi_tolerance", c.detection.pi_tolerance);
    read(d, "beta", c.detection.beta);
    for (const auto& [region, b] : read_bus_map(d, "beta_overrides")) c.detection.beta_overrides[region] = b;
    read(d, "normalization_guard", c.detection.normalization_guard);
    read(d, "min_disagreement", c.detection.min_disagreement);
    read(d, "damping", c.detection.damping);
  }
  c.detection.validate();

  if (j.contains("measurement")) {
    const auto& m = j.at("measurement");
    check_keys(m, {"policy", "noise_variance", "seed"}, "measurement");
    if (m.contains("policy")) {
      const auto& p = m.at("policy");
      if (p.is_array()) {
        c.measurement.policy = MeasurementPolicy::explicit_list(p.get<std::vector<std::string>>());
      } else if (p == "all") {
        c.measurement.policy = MeasurementPolicy::all();
      } else if (p == "injections_only") {
        c.measurement.policy = MeasurementPolicy::injections_only();
      } else {
        throw ConfigError("measurement.policy must be 'all', 'injections_only' or a list of names");
      }
    }
    read(m, "noise_variance", c.measurement.noise_variance);
    read(m, "seed", c.measurement.seed);
    if (!(c.measurement.noise_variance >= 0.0)) throw ConfigError("noise_variance must be >= 0");
  }

  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    check_keys(a,
               {"attacker", "kind", "rho", "perturbations", "seed", "start_iteration", "corrupt_own_state",
                "magnitude", "victim"},
               "attack");
    std::string kind = "none";
    read(a, "kind", kind);
    c.attack.kind = parse_attack_kind(kind);
    read(a, "attacker", c.attack.attacker);
    read(a, "rho", c.attack.rho);
    read(a, "seed", c.attack.seed);
    read(a, "start_iteration", c.attack.start_iteration);
    read(a, "corrupt_own_state", c.attack.corrupt_own_state);
    read(a, "magnitude", c.attack.magnitude);
    read(a, "victim", c.attack.victim);
    if (a.contains("perturbations")) {
      const auto& p = a.at("perturbations");
      if (!p.is_object()) throw ConfigError("attack.perturbations must map variable names to offsets");
      for (const auto& [name, v] : p.items()) c.attack.perturbations.emplace_back(name, v.get<double>());
    }
  }

  c.schedule_override = read_bus_map(j, "schedule_override");
  c.truth_deviation = read_bus_map(j, "truth_deviation");
  if (j.contains("max_restarts") && !j.at("max_restarts").is_null()) {
    c.max_restarts = j.at("max_restarts").get<int>();
    if (*c.max_restarts < 0) throw ConfigError("max_restarts must be >= 0");
  }
  if (j.contains("output_dir")) c.output_dir = base_dir / j.at("output_dir").get<std::string>();
  read(j, "stop_on_settled_trust", c.stop_on_settled_trust);
  read(j, "warm_start", c.warm_start);
  read(j, "threads", c.threads);
  read(j, "emit_traces", c.emit_traces);
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto c = parse_scenario(j, path.parent_path());
  return c;
}

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["case_file"] = c.case_file.string();
  j["region_map"] = c.region_map.string();
  j["admm"] = {{"c1", c.admm.c1},
               {"c2", c.admm.c2},
               {"tolerance", c.admm.tolerance},
               {"max_iterations", c.admm.max_iterations},
               {"horizon", c.admm.horizon},
               {"unweighted_schedule_update", c.admm.unweighted_schedule_update},
               {"canonical_dual", c.admm.canonical_dual},
               {"ridge", c.admm.ridge},
               {"start", c.admm.start == StartPolicy::flat ? "flat" : "schedule_seeded"}};
  nlohmann::ordered_json det;
  if (c.detection.alpha_schedule == DetectionConfig::Alpha::harmonic) det["alpha"] = "harmonic";
  else det["alpha"] = c.detection.alpha_constant;
  det["pi_tolerance"] = c.detection.pi_tolerance;
  det["beta"] = c.detection.beta;
  nlohmann::ordered_json bo = nlohmann::ordered_json::object();
  for (const auto& [r, b] : c.detection.beta_overrides) bo[std::to_string(r)] = b;
  det["beta_overrides"] = bo;
  det["normalization_guard"] = c.detection.normalization_guard;
  det["min_disagreement"] = c.detection.min_disagreement;
  det["damping"] = c.detection.damping;
  j["detection"] = det;
  nlohmann::ordered_json meas;
  switch (c.measurement.policy.kind) {
    case MeasurementPolicy::Kind::all: meas["policy"] = "all"; break;
    case MeasurementPolicy::Kind::injections_only: meas["policy"] = "injections_only"; break;
    case MeasurementPolicy::Kind::explicit_list: meas["policy"] = c.measurement.policy.names; break;
  }
  meas["noise_variance"] = c.measurement.noise_variance;
  meas["seed"] = c.measurement.seed;
  j["measurement"] = meas;
  nlohmann::ordered_json atk;
  atk["attacker"] = c.attack.attacker;
  atk["kind"] = to_string(c.attack.kind);
  atk["rho"] = c.attack.rho;
  nlohmann::ordered_json pert = nlohmann::ordered_json::object();
  for (const auto& [name, v] : c.attack.perturbations) pert[name] = v;
  atk["perturbations"] = pert;
  atk["seed"] = c.attack.seed;
  atk["start_iteration"] = c.attack.start_iteration;
  atk["corrupt_own_state"] = c.attack.corrupt_own_state;
  atk["magnitude"] = c.attack.magnitude;
  atk["victim"] = c.attack.victim;
  j["attack"] = atk;
  auto bus_map = [](const std::map<int, double>& m) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [b, v] : m) o[std::to_string(b)] = v;
    return o;
  };
  j["schedule_override"] = bus_map(c.schedule_override);
  j["truth_deviation"] = bus_map(c.truth_deviation);
  j["max_restarts"] = c.max_restarts ? nlohmann::ordered_json(*c.max_restarts) : nlohmann::ordered_json();
  j["output_dir"] = c.output_dir.string();
  j["stop_on_settled_trust"] = c.stop_on_settled_trust;
  j["warm_start"] = c.warm_start;
  j["threads"] = c.threads;
  j["emit_traces"] = c.emit_traces;
  return j;
}

namespace {

std::map<int, int> source_index(const GridNetwork& net) {
  std::map<int, int> out;
  for (const auto& b : net.buses()) out[b.source_id] = b.id - 1;
  return out;
}

int lookup_bus(const std::map<int, int>& index, int source_id, const char* what) {
  auto it = index.find(source_id);
  if (it == index.end()) throw ConfigError(std::string(what) + " names unknown bus " + std::to_string(source_id));
  return it->second;
}

}  // namespace

ScenarioData generate_scenario_data(const GridNetwork& net, const SystemVariableSpace& space,
                                    const ScenarioConfig& config) {
  const auto nb = static_cast<Eigen::Index>(net.bus_count());
  const auto index = source_index(net);
  ScenarioData d;
  d.schedule.resize(nb);
  Eigen::VectorXd q(nb);
  for (const auto& b : net.buses()) {
    d.schedule[b.id - 1] = b.is_substation ? 0.0 : b.scheduled_p;
    q[b.id - 1] = b.scheduled_q;
  }
  for (const auto& [bus, v] : config.schedule_override) d.schedule[lookup_bus(index, bus, "schedule_override")] = v;
  Eigen::VectorXd p = d.schedule;
  for (const auto& [bus, v] : config.truth_deviation) p[lookup_bus(index, bus, "truth_deviation")] += v;

  d.truth_flow = solve_power_flow(net, p, q);
  const Eigen::VectorXd x = d.truth_flow.to_system_vector(space);
  const std::size_t T = config.admm.horizon_size();
  d.truth.assign(T, x);

  std::mt19937_64 rng(config.measurement.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(config.measurement.noise_variance);
  const auto measured = space.measured_indices();
  for (std::size_t t = 0; t < T; ++t) {
    Eigen::VectorXd s = x;
    if (sd > 0.0)
      for (int g : measured) s[g] += sd * normal(rng);
    d.measurements.push_back(std::move(s));
  }
  return d;
}

Scenario::Scenario(ScenarioConfig cfg)
    : config(std::move(cfg)),
      net(load_case(config.case_file.string())),
      space(net, config.measurement.policy),
      H(assemble_constraints(net, space)),
      assignment(assign_regions(net, load_region_mapping(config.region_map.string()))),
      partition(build_region_views(net, space, H, assignment)),
      data(generate_scenario_data(net, space, config)) {
  config.attack.validate(partition, space);
  for (const auto& [r, _] : config.detection.beta_overrides)
    if (!partition.graph.contains(r)) throw ConfigError("beta override for unknown region " + std::to_string(r));
}

int Scenario::bus_index(int source_id) const { return lookup_bus(source_index(net), source_id, "lookup"); }

RegionInputs Scenario::inputs_for(const RegionView& view) const {
  RegionInputs in;
  for (std::size_t t = 0; t < data.measurements.size(); ++t) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(view.measured.size()));
    for (std::size_t a = 0; a < view.measured.size(); ++a)
      s[static_cast<Eigen::Index>(a)] = data.measurements[t][view.variables[view.measured[a]]];
    if (config.attack.kind == AttackKind::measurement && config.attack.attacker == view.id)
      s = perturb_measurements(s, view, space, config.attack);
    Eigen::VectorXd p(static_cast<Eigen::Index>(view.scheduled_buses.size()));
    for (std::size_t k = 0; k < view.scheduled_buses.size(); ++k)
      p[static_cast<Eigen::Index>(k)] = data.schedule[view.scheduled_buses[k]];
    in.measurements.push_back(std::move(s));
    in.schedule.push_back(std::move(p));
  }
  return in;
}

std::map<int, RegionInputs> Scenario::inputs_for_all(const Partition& part) const {
  std::map<int, RegionInputs> out;
  for (const auto& v : part.views) out.emplace(v.id, inputs_for(v));
  return out;
}

}  // namespace rsv

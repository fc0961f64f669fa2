#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rsv/errors.hpp"
#include "rsv/orchestrator.hpp"

namespace rsv {

namespace {

void put_vector(PayloadWriter& w, const Eigen::VectorXd& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  w.f64s(v.data(), static_cast<std::size_t>(v.size()));
}

Eigen::VectorXd get_vector(PayloadReader& r) {
  const auto n = r.u32();
  const auto vals = r.f64s(n);
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(n));
}

void finish(const PayloadReader& r) {
  if (!r.done()) throw ParseError(0, "payload has trailing bytes");
}

}  // namespace

std::vector<std::uint8_t> encode_inputs(const RegionInputs& in) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(in.measurements.size()));
  for (std::size_t t = 0; t < in.measurements.size(); ++t) {
    put_vector(w, in.measurements[t]);
    put_vector(w, in.schedule.at(t));
  }
  return w.take();
}

RegionInputs decode_inputs(const std::vector<std::uint8_t>& bytes) {
  PayloadReader r(bytes);
  RegionInputs in;
  const auto T = r.u32();
  for (std::uint32_t t = 0; t < T; ++t) {
    in.measurements.push_back(get_vector(r));
    in.schedule.push_back(get_vector(r));
  }
  finish(r);
  return in;
}

std::vector<std::uint8_t> encode_state(int k, const std::vector<Eigen::VectorXd>& x) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(k)).u32(static_cast<std::uint32_t>(x.size()));
  for (const auto& v : x) put_vector(w, v);
  return w.take();
}

std::vector<std::uint8_t> encode_slice(int k, int from, int to, const SharedSlice& slice) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(k)).i32(from).i32(to).u32(static_cast<std::uint32_t>(slice.size()));
  for (const auto& v : slice) put_vector(w, v);
  return w.take();
}

MessageRecord decode_slice(const std::vector<std::uint8_t>& bytes) {
  PayloadReader r(bytes);
  MessageRecord m;
  m.k = static_cast<int>(r.u32());
  m.from = r.i32();
  m.to = r.i32();
  const auto T = r.u32();
  for (std::uint32_t t = 0; t < T; ++t) m.slice.push_back(get_vector(r));
  finish(r);
  return m;
}

std::vector<std::uint8_t> encode_disagreement(int k, int i, int j, double d) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(k)).i32(i).i32(j).f64(d);
  return w.take();
}

std::vector<std::uint8_t> encode_trust(int k, const std::vector<int>& regions, const Eigen::VectorXd& pi) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(k)).u32(static_cast<std::uint32_t>(regions.size()));
  for (std::size_t i = 0; i < regions.size(); ++i) w.i32(regions[i]).f64(pi[static_cast<Eigen::Index>(i)]);
  return w.take();
}

std::pair<int, std::vector<double>> decode_trust(const std::vector<std::uint8_t>& bytes) {
  PayloadReader r(bytes);
  const int k = static_cast<int>(r.u32());
  const auto n = r.u32();
  std::vector<double> pi;
  for (std::uint32_t i = 0; i < n; ++i) {
    r.i32();
    pi.push_back(r.f64());
  }
  finish(r);
  return {k, pi};
}

std::vector<std::uint8_t> encode_verdict(int k, const Verdict& v) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(k)).u8(static_cast<std::uint8_t>(v.kind)).i32(v.region);
  return w.take();
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
}

}  // namespace

nlohmann::ordered_json report_to_json(const Scenario& scenario, const RunReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["outcome"] = to_string(report.outcome);
  j["isolated"] = report.isolated;
  j["components"] = report.components;
  ordered_json phases = ordered_json::array();
  for (const auto& ph : report.phases) {
    ordered_json p;
    p["phase"] = ph.phase;
    p["regions"] = ph.regions;
    p["outcome"] = to_string(ph.outcome);
    p["termination"] = ph.termination;
    p["iterations"] = ph.iterations;
    p["verdict_region"] = ph.outcome == PhaseOutcome::verdict ? ordered_json(ph.verdict_region) : ordered_json();
    p["damped_fallback"] = ph.damped;
    p["final_displacement"] = ph.final_displacement;
    p["final_gap"] = ph.final_gap;
    p["final_pi"] = ph.pi_history.empty() ? ordered_json::array() : ordered_json(ph.pi_history.back());
    p["pi_history"] = ph.pi_history;
    phases.push_back(std::move(p));
  }
  j["phases"] = phases;
  ordered_json dev = ordered_json::array();
  for (const auto& r : report.deviations) {
    dev.push_back({{"bus", r.bus},
                   {"region", r.region},
                   {"scheduled", r.scheduled},
                   {"verified", r.available ? ordered_json(r.verified) : ordered_json()},
                   {"deviation", r.available ? ordered_json(r.deviation) : ordered_json()},
                   {"available", r.available}});
  }
  j["deviations"] = dev;
  ordered_json stitched = ordered_json::array();
  for (std::size_t t = 0; t < report.stitched.size(); ++t) {
    ordered_json vals = ordered_json::object();
    for (int g = 0; g < scenario.space.dimension(); ++g)
      vals[scenario.space.name(g)] = number_or_null(report.stitched[t][g]);
    stitched.push_back({{"t", scenario.config.admm.horizon.at(t)}, {"values", vals}});
  }
  j["stitched"] = stitched;
  j["wall_clock_seconds"] = report.wall_clock_seconds;
  j["metadata"] = {{"ledger_hash", "SHA-256"}, {"payload_encoding", "little-endian binary64"}};
  j["config"] = report.config_echo;
  return j;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void emit_outputs(const Scenario& scenario, const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "report.json", report_to_json(scenario, report).dump(2) + "\n");

  std::string pi_rows = "phase,k,region,pi\n";
  std::string final_rows = "phase,region,pi\n";
  for (const auto& ph : report.phases) {
    char buf[64];
    for (std::size_t k = 0; k < ph.pi_history.size(); ++k) {
      for (std::size_t i = 0; i < ph.regions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", ph.pi_history[k][i]);
        pi_rows += std::to_string(ph.phase) + ',' + std::to_string(k + 1) + ',' + std::to_string(ph.regions[i]) +
                   ',' + buf + '\n';
      }
    }
    if (!ph.pi_history.empty()) {
      for (std::size_t i = 0; i < ph.regions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", ph.pi_history.back()[i]);
        final_rows += std::to_string(ph.phase) + ',' + std::to_string(ph.regions[i]) + ',' + buf + '\n';
      }
    }
    const std::string tag = "phase" + std::to_string(ph.phase);
    if (scenario.config.emit_traces) {
      write_file(dir / ("trace_" + tag + ".csv"), "k,region,t,var_name,value\n" + ph.trace_csv);
      write_file(dir / ("pairs_" + tag + ".csv"), "k,region,neighbor,t,var_name,own,received\n" + ph.pair_csv);
    }
    if (ph.ledgers) {
      const auto ldir = dir / "ledgers" / tag;
      std::filesystem::create_directories(ldir, ec);
      if (ec) throw Error("cannot create " + ldir.string() + ": " + ec.message());
      for (const Ledger* l : ph.ledgers->all()) {
        std::ostringstream out;
        dump_jsonl(*l, out);
        write_file(ldir / (l->name() + ".jsonl"), out.str());
      }
    }
  }
  write_file(dir / "pi_history.csv", pi_rows);
  write_file(dir / "pi_final.csv", final_rows);
}

std::string format_deviation_table(const nlohmann::json& report) {
  if (!report.contains("deviations")) throw ConfigError("report has no deviation table");
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%6s %6s %12s %12s %12s\n", "bus", "region", "scheduled", "verified", "deviation");
  out << buf;
  for (const auto& r : report.at("deviations")) {
    if (r.at("available").get<bool>()) {
      std::snprintf(buf, sizeof buf, "%6d %6d %12.6f %12.6f %12.6f\n", r.at("bus").get<int>(),
                    r.at("region").get<int>(), r.at("scheduled").get<double>(), r.at("verified").get<double>(),
                    r.at("deviation").get<double>());
    } else {
      std::snprintf(buf, sizeof buf, "%6d %6d %12.6f %12s %12s\n", r.at("bus").get<int>(), r.at("region").get<int>(),
                    r.at("scheduled").get<double>(), "n/a", "n/a");
    }
    out << buf;
  }
  return out.str();
}

}  // namespace rsv

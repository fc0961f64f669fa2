#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

#include "rsv/errors.hpp"
#include "rsv/orchestrator.hpp"

namespace rsv {

const char* to_string(PhaseOutcome o) {
  switch (o) {
    case PhaseOutcome::converged: return "converged";
    case PhaseOutcome::verdict: return "verdict";
    case PhaseOutcome::exhausted: return "exhausted";
  }
  return "exhausted";
}

const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::converged: return "converged";
    case RunOutcome::attacker_isolated: return "attacker_isolated";
    case RunOutcome::exhausted: return "exhausted";
  }
  return "exhausted";
}

Partition surviving_partition(const Scenario& scenario, const std::vector<int>& isolated,
                              const std::vector<int>& component) {
  Partition part = scenario.partition;
  for (int r : isolated)
    if (part.graph.contains(r)) part = remove_region(part, r).partition;
  return restrict_to(part, component);
}

namespace {

void append_row(std::string& out, int k, int region, int t, const std::string& name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out += std::to_string(k);
  out += ',';
  out += std::to_string(region);
  out += ',';
  out += std::to_string(t);
  out += ',';
  out += name;
  out += ',';
  out += buf;
  out += '\n';
}

void append_pair_row(std::string& out, int k, int region, int neighbor, int t, const std::string& name, double own,
                     double received) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g", own, received);
  out += std::to_string(k) + ',' + std::to_string(region) + ',' + std::to_string(neighbor) + ',' +
         std::to_string(t) + ',' + name + ',' + buf + '\n';
}

// Union of a region's shared positions, ascending.
std::vector<int> shared_support(const RegionView& v) {
  std::vector<int> out;
  for (const auto& s : v.shared) out.insert(out.end(), s.local.begin(), s.local.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double slice_gap(const SharedSlice& a, const SharedSlice& b) {
  double g = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[t].size()) g = std::max(g, (a[t] - b[t]).cwiseAbs().maxCoeff());
  return g;
}

}  // namespace

PhaseResult run_phase(const Scenario& scenario, const Partition& part, int phase, bool attack_live,
                      const PhaseResult* warm) {
  const auto& cfg = scenario.config;
  const AdmmConfig& ac = cfg.admm;
  const AttackSpec& atk = cfg.attack;
  const bool live = attack_live && atk.active() && part.graph.contains(atk.attacker);
  const std::size_t n = part.views.size();
  const std::size_t T = ac.horizon_size();

  PhaseResult res;
  res.phase = phase;
  res.regions = part.regions();
  res.ledgers = std::make_shared<LedgerSet>(part.graph);
  LedgerSet& L = *res.ledgers;

  // Every region uploads its measurements and schedule to LL_i.
  for (const auto& v : part.views) L.local(v.id).append(v.id, PayloadKind::measurements, encode_inputs(scenario.inputs_for(v)));

  std::vector<std::unique_ptr<RegionAdmm>> solvers(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto& v = part.views[i];
    const auto* e = L.local_for(v.id, v.id).read_latest(PayloadKind::measurements, v.id);
    solvers[i] = std::make_unique<RegionAdmm>(v, ac, decode_inputs(e->payload));
  });

  // Stealth directions are fixed for the whole phase.
  std::map<int, Eigen::VectorXd> stealth;
  if (live && atk.kind == AttackKind::stealth) {
    for (int victim : part.graph.neighbors(atk.attacker)) {
      if (atk.victim != 0 && victim != atk.attacker && victim != atk.victim) continue;
      const auto report = stealth_feasibility(part.view(victim), atk.attacker);
      const auto a = craft_stealth_attack(report, atk.magnitude, atk.seed ^ static_cast<std::uint64_t>(victim));
      if (a.feasible) stealth[victim] = a.vector;
    }
  }

  std::vector<std::vector<int>> support(n);
  for (std::size_t i = 0; i < n; ++i) support[i] = shared_support(part.views[i]);

  auto record_states = [&](int k) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Eigen::VectorXd> xs;
      for (std::size_t t = 0; t < T; ++t) xs.push_back(solvers[i]->x(t));
      L.local(part.views[i].id).append(part.views[i].id, PayloadKind::admm_state, encode_state(k, xs));
    }
  };

  auto publish = [&](int k) {
    for (std::size_t i = 0; i < n; ++i) {
      const int from = part.views[i].id;
      for (const auto& blk : part.views[i].shared) {
        SharedSlice msg = solvers[i]->extract_shared(blk.neighbor);
        if (live && from == atk.attacker && atk.fires_at(k)) {
          if (atk.kind == AttackKind::state_update && !atk.corrupt_own_state) {
            msg = perturb_outgoing_state(msg, atk, k, blk.neighbor);
          } else if (atk.kind == AttackKind::stealth) {
            auto it = stealth.find(blk.neighbor);
            if (it != stealth.end())
              for (auto& m : msg) m += it->second;
          }
        }
        L.channel(from, blk.neighbor).append(from, PayloadKind::shared_slice, encode_slice(k, from, blk.neighbor, msg));
      }
    }
  };

  auto collect = [&](int k) {
    std::vector<Inbox> inboxes(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int to = part.views[i].id;
      for (const auto& blk : part.views[i].shared) {
        const auto* e = L.channel_for(to, blk.neighbor, to).read_latest(PayloadKind::shared_slice, blk.neighbor);
        auto rec = decode_slice(e->payload);
        if (rec.k != k || rec.from != blk.neighbor || rec.to != to)
          throw StructuralError("channel " + std::to_string(blk.neighbor) + "->" + std::to_string(to) +
                                " holds a stale message");
        inboxes[i][blk.neighbor] = rec.slice;
        res.messages.push_back(std::move(rec));
      }
    }
    return inboxes;
  };

  auto trace = [&](int k, const std::vector<Inbox>& inboxes) {
    if (!cfg.emit_traces) return;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = part.views[i];
      for (std::size_t t = 0; t < T; ++t) {
        const int tt = ac.horizon[t];
        append_row(res.trace_csv, k, v.id, tt, "x_sum", solvers[i]->x(t).sum());
        append_row(res.trace_csv, k, v.id, tt, "psi_sum", solvers[i]->psi(t).sum());
        append_row(res.trace_csv, k, v.id, tt, "upsilon_sum", solvers[i]->upsilon(t).sum());
        for (int loc : support[i])
          append_row(res.trace_csv, k, v.id, tt, scenario.space.name(v.variables[loc]), solvers[i]->x(t)[loc]);
        for (const auto& blk : v.shared) {
          const auto& got = inboxes[i].at(blk.neighbor)[t];
          for (std::size_t s = 0; s < blk.local.size(); ++s)
            append_pair_row(res.pair_csv, k, v.id, blk.neighbor, tt, scenario.space.name(blk.global[s]),
                            solvers[i]->x(t)[blk.local[s]], got[static_cast<Eigen::Index>(s)]);
        }
      }
    }
  };

  // Steps 2-4: x₀, one exchange, ψ₀ and υ₀.
  for (std::size_t i = 0; i < n; ++i) {
    solvers[i]->set_start();
    if (warm) {
      auto it = warm->x.find(part.views[i].id);
      if (it != warm->x.end())
        for (std::size_t t = 0; t < T; ++t) solvers[i]->set_state(t, it->second.at(t));
    }
  }
  record_states(0);
  publish(0);
  {
    auto inboxes = collect(0);
    for (std::size_t i = 0; i < n; ++i) solvers[i]->complete_initialization(inboxes[i]);
    trace(0, inboxes);
  }

  std::optional<TrustState> trust;
  if (part.graph.edge_count() > 0) trust.emplace(part.graph, cfg.detection);

  res.outcome = PhaseOutcome::exhausted;
  res.termination = "iteration_cap";
  for (int k = 1; k <= ac.max_iterations; ++k) {
    res.iterations = k;
    parallel_for(n, cfg.threads, [&](std::size_t i) { solvers[i]->x_update(); });
    if (live && atk.kind == AttackKind::state_update && atk.corrupt_own_state && atk.fires_at(k)) {
      for (std::size_t i = 0; i < n; ++i) {
        if (part.views[i].id != atk.attacker) continue;
        for (std::size_t t = 0; t < T; ++t)
          solvers[i]->offset_state(t, support[i],
                                   state_attack_vector(static_cast<Eigen::Index>(support[i].size()), atk, k, 0, t));
      }
    }
    double disp = 0.0;
    for (const auto& s : solvers) disp = std::max(disp, s->displacement());
    record_states(k);
    publish(k);
    auto inboxes = collect(k);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      solvers[i]->psi_update(inboxes[i]);
      solvers[i]->upsilon_update();
    });

    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [j, msg] : inboxes[i]) gap = std::max(gap, slice_gap(solvers[i]->extract_shared(j), msg));
    res.displacement_history.push_back(disp);
    res.gap_history.push_back(gap);
    res.final_displacement = disp;
    res.final_gap = gap;
    trace(k, inboxes);

    // Detection through GL.
    Verdict verdict;
    if (trust) {
      for (std::size_t i = 0; i < n; ++i) {
        const int id = part.views[i].id;
        for (const auto& [j, msg] : inboxes[i]) {
          trust->update(id, j, solvers[i]->extract_shared(j), msg, k);
          L.global().append(id, PayloadKind::disagreement, encode_disagreement(k, id, j, trust->disagreement(id, j)));
        }
      }
      trust->refresh();
      L.global().append(kSystemAuthor, PayloadKind::trust_score, encode_trust(k, trust->regions(), trust->pi()));
      res.pi_history.emplace_back(trust->pi().data(), trust->pi().data() + trust->pi().size());
      res.damped = res.damped || trust->damped();
      verdict = check_verdict(*trust);
      if (verdict.kind == VerdictKind::attacker)
        L.global().append(kSystemAuthor, PayloadKind::verdict, encode_verdict(k, verdict));
    }

    // State convergence wins over a same-round verdict.
    if (disp <= ac.tolerance && gap <= ac.tolerance) {
      res.outcome = PhaseOutcome::converged;
      res.termination = "state";
      break;
    }
    if (verdict.kind == VerdictKind::attacker) {
      res.outcome = PhaseOutcome::verdict;
      res.termination = "verdict";
      res.verdict_region = verdict.region;
      break;
    }
    if (cfg.stop_on_settled_trust && verdict.kind == VerdictKind::none) {
      res.outcome = PhaseOutcome::converged;
      res.termination = "trust_scores_settled";
      break;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& xs = res.x[part.views[i].id];
    for (std::size_t t = 0; t < T; ++t) xs.push_back(solvers[i]->x(t));
  }
  if (trust) res.disagreement = trust->disagreements();
  return res;
}

std::vector<Eigen::VectorXd> stitch(const Scenario& scenario, const std::vector<const PhaseResult*>& phases) {
  const int m = scenario.space.dimension();
  const std::size_t T = scenario.config.admm.horizon_size();
  std::vector<Eigen::VectorXd> sum(T, Eigen::VectorXd::Zero(m));
  Eigen::VectorXd count = Eigen::VectorXd::Zero(m);
  for (const auto* ph : phases) {
    for (const auto& [region, xs] : ph->x) {
      const auto& v = scenario.partition.view(region);
      for (int k = 0; k < v.dimension(); ++k) {
        count[v.variables[k]] += 1.0;
        for (std::size_t t = 0; t < T; ++t) sum[t][v.variables[k]] += xs[t][k];
      }
    }
  }
  for (std::size_t t = 0; t < T; ++t)
    for (int g = 0; g < m; ++g)
      sum[t][g] = count[g] > 0.0 ? sum[t][g] / count[g] : std::numeric_limits<double>::quiet_NaN();
  return sum;
}

RunReport run_verification(const Scenario& scenario) {
  const auto started = std::chrono::steady_clock::now();
  const auto& cfg = scenario.config;
  RunReport report;
  report.config_echo = scenario_to_json(cfg);
  const int N = static_cast<int>(scenario.partition.views.size());
  const int max_restarts = cfg.max_restarts.value_or(std::max(0, N - 1));

  struct Work {
    std::vector<int> component;
    int warm_from = -1;  // index into report.phases
  };
  std::deque<Work> queue{{scenario.partition.graph.nodes(), -1}};
  std::vector<std::size_t> final_phases;
  bool exhausted = false;

  while (!queue.empty()) {
    Work w = std::move(queue.front());
    queue.pop_front();
    const Partition part = surviving_partition(scenario, report.isolated, w.component);
    const PhaseResult* warm = (cfg.warm_start && w.warm_from >= 0) ? &report.phases[w.warm_from] : nullptr;
    PhaseResult res = run_phase(scenario, part, static_cast<int>(report.phases.size()), true, warm);
    report.phases.push_back(std::move(res));
    const std::size_t idx = report.phases.size() - 1;
    const auto& ph = report.phases[idx];

    if (ph.outcome == PhaseOutcome::verdict) {
      if (static_cast<int>(report.isolated.size()) >= max_restarts || part.views.size() <= 1) {
        exhausted = true;
        final_phases.push_back(idx);
        continue;
      }
      report.isolated.push_back(ph.verdict_region);
      auto removed = remove_region(part, ph.verdict_region);
      for (auto& comp : removed.components) queue.push_back({std::move(comp), static_cast<int>(idx)});
      continue;
    }
    if (ph.outcome == PhaseOutcome::exhausted) exhausted = true;
    final_phases.push_back(idx);
  }

  std::vector<const PhaseResult*> converged;
  for (auto idx : final_phases) {
    const auto& ph = report.phases[idx];
    report.components.push_back(ph.regions);
    if (ph.outcome == PhaseOutcome::converged) converged.push_back(&ph);
  }
  std::sort(report.components.begin(), report.components.end());
  report.stitched = stitch(scenario, converged);
  report.deviations = compute_deviations(scenario, report);
  if (exhausted) report.outcome = RunOutcome::exhausted;
  else if (!report.isolated.empty()) report.outcome = RunOutcome::attacker_isolated;
  else report.outcome = RunOutcome::converged;
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<DeviationRow> compute_deviations(const Scenario& scenario, const RunReport& report) {
  std::vector<DeviationRow> rows;
  const auto& net = scenario.net;
  for (const auto& bus : net.buses()) {
    if (bus.is_substation) continue;
    const int b = bus.id - 1;
    DeviationRow r;
    r.bus = bus.source_id;
    r.region = scenario.assignment.region_of_bus[b];
    r.scheduled = scenario.data.schedule[b];
    if (!report.stitched.empty()) {
      const double p = report.stitched.front()[scenario.space.bus_var(b, VarKind::p)];
      if (std::isfinite(p)) {
        r.available = true;
        r.verified = p;
        r.deviation = r.scheduled - p;
      }
    }
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const DeviationRow& a, const DeviationRow& b) {
    if (a.available != b.available) return a.available;
    return std::abs(a.deviation) > std::abs(b.deviation);
  });
  return rows;
}

AuditResult audit_phase(const PhaseResult& phase) {
  AuditResult out;
  if (!phase.ledgers) {
    out.discrepancies.push_back("phase " + std::to_string(phase.phase) + " kept no ledgers");
    return out;
  }
  if (auto bad = phase.ledgers->verify_all())
    out.discrepancies.push_back(bad->first + " breaks at entry " + std::to_string(bad->second));

  // Messages, per channel and in order.
  std::map<std::pair<int, int>, std::vector<const MessageRecord*>> used;
  for (const auto& m : phase.messages) used[{m.from, m.to}].push_back(&m);
  for (const auto& [key, ledger] : phase.ledgers->channels()) {
    const auto& want = used[key];
    std::size_t pos = 0;
    for (const auto& e : ledger.entries()) {
      if (e.author != key.first) {
        out.discrepancies.push_back(ledger.name() + " entry " + std::to_string(e.sequence) + " has foreign author");
        continue;
      }
      const auto rec = decode_slice(e.payload);
      if (pos >= want.size()) {
        out.discrepancies.push_back(ledger.name() + " holds a message nobody consumed");
        continue;
      }
      const auto& w = *want[pos++];
      bool same = rec.k == w.k && rec.from == w.from && rec.to == w.to && rec.slice.size() == w.slice.size();
      for (std::size_t t = 0; same && t < rec.slice.size(); ++t)
        same = rec.slice[t].size() == w.slice[t].size() &&
               std::equal(rec.slice[t].data(), rec.slice[t].data() + rec.slice[t].size(), w.slice[t].data());
      if (!same) out.discrepancies.push_back(ledger.name() + " entry " + std::to_string(e.sequence) + " differs");
      ++out.messages_checked;
    }
    if (pos != want.size()) out.discrepancies.push_back(ledger.name() + " is missing consumed messages");
  }

  std::size_t round = 0;
  for (const auto& e : phase.ledgers->global().entries()) {
    if (e.kind != PayloadKind::trust_score) continue;
    const auto [k, pi] = decode_trust(e.payload);
    if (round >= phase.pi_history.size() || pi != phase.pi_history[round] || k != static_cast<int>(round) + 1)
      out.discrepancies.push_back("GL trust score for round " + std::to_string(k) + " differs");
    ++round;
    ++out.trust_rounds_checked;
  }
  if (round != phase.pi_history.size()) out.discrepancies.push_back("GL is missing trust scores");
  return out;
}

}  // namespace rsv

#include "rsv/network.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "rsv/errors.hpp"

namespace rsv {

GridNetwork::GridNetwork(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva)
    : base_mva_(base_mva) {
  if (buses.empty()) throw TopologyError("network has no buses");
  if (!(base_mva > 0.0)) throw TopologyError("base_mva must be positive");

  std::sort(buses.begin(), buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  std::map<int, int> renumber;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (!renumber.emplace(buses[i].id, static_cast<int>(i) + 1).second)
      throw TopologyError("duplicate bus id " + std::to_string(buses[i].id));
    if (buses[i].source_id == 0) buses[i].source_id = buses[i].id;
    buses[i].id = static_cast<int>(i) + 1;
  }

  int substations = 0;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].is_substation) {
      ++substations;
      substation_ = static_cast<int>(i);
    }
  }
  if (substations != 1)
    throw TopologyError("expected exactly one substation, found " + std::to_string(substations));

  const std::size_t n = buses.size();
  if (branches.size() != n - 1)
    throw RadialityError("radial network needs |E| = |B| - 1 = " + std::to_string(n - 1) +
                         " branches, found " + std::to_string(branches.size()));

  std::sort(branches.begin(), branches.end(),
            [](const Branch& a, const Branch& b) { return a.id < b.id; });
  std::vector<std::vector<std::pair<int, int>>> adjacency(n);  // (neighbor, branch)
  for (std::size_t l = 0; l < branches.size(); ++l) {
    auto& br = branches[l];
    if (l > 0 && br.id == branches[l - 1].id)
      throw TopologyError("duplicate branch id " + std::to_string(br.id));
    br.id = static_cast<int>(l) + 1;
    auto f = renumber.find(br.from_bus);
    auto t = renumber.find(br.to_bus);
    if (f == renumber.end() || t == renumber.end())
      throw TopologyError("branch " + std::to_string(br.id) + " references an unknown bus");
    if (f->second == t->second)
      throw RadialityError("branch " + std::to_string(br.id) + " is a self-loop");
    br.from_bus = f->second;
    br.to_bus = t->second;
    if (std::abs(br.impedance) == 0.0 && !br.zero_impedance)
      throw TopologyError("branch " + std::to_string(br.id) +
                          " has zero impedance but is not flagged as a splitting edge");
    adjacency[br.from_bus - 1].emplace_back(br.to_bus - 1, static_cast<int>(l));
    adjacency[br.to_bus - 1].emplace_back(br.from_bus - 1, static_cast<int>(l));
  }

  // Breadth-first from the substation orients every branch downstream.
  incoming_.assign(n, -1);
  outgoing_.assign(n, {});
  std::vector<bool> seen(n, false);
  std::vector<int> queue{substation_};
  seen[substation_] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    for (auto [v, l] : adjacency[u]) {
      if (incoming_[u] == l) continue;
      if (seen[v]) throw RadialityError("branch set contains a cycle");
      seen[v] = true;
      auto& br = branches[l];
      if (br.from_bus - 1 != u) std::swap(br.from_bus, br.to_bus);
      incoming_[v] = l;
      outgoing_[u].push_back(l);
      order_.push_back(l);
      queue.push_back(v);
    }
  }
  if (queue.size() != n) throw RadialityError("branch graph is not connected");
  for (auto& out : outgoing_) std::sort(out.begin(), out.end());

  buses_ = std::move(buses);
  branches_ = std::move(branches);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != ',') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

double number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(line, "expected a number, got '" + std::string(tok) + "'");
  return v;
}

int integer(std::string_view tok, std::size_t line) {
  const double v = number(tok, line);
  if (v != static_cast<double>(static_cast<int>(v)))
    throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
  return static_cast<int>(v);
}

std::vector<std::pair<std::size_t, std::string_view>> numbered_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    out.emplace_back(++lineno, text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

GridNetwork parse_matpower(std::string_view text) {
  double base_mva = 0.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  enum class Block { none, bus, branch, other } block = Block::none;

  for (auto [lineno, raw] : numbered_lines(text)) {
    std::string_view line = raw.substr(0, raw.find('%'));
    line = trim(line);
    if (line.empty()) continue;

    if (block == Block::none) {
      if (line.rfind("mpc.", 0) != 0) continue;  // "function mpc = ..." and friends
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto name = trim(line.substr(4, eq - 4));
      auto rhs = trim(line.substr(eq + 1));
      if (name == "baseMVA") {
        if (!rhs.empty() && rhs.back() == ';') rhs.remove_suffix(1);
        base_mva = number(trim(rhs), lineno);
        continue;
      }
      if (rhs.empty() || rhs.front() != '[') continue;
      block = name == "bus" ? Block::bus : name == "branch" ? Block::branch : Block::other;
      line = trim(rhs.substr(1));
      if (line.empty()) continue;
    }

    bool closes = false;
    if (const auto close = line.find(']'); close != std::string_view::npos) {
      closes = true;
      line = trim(line.substr(0, close));
    }
    if (!line.empty() && line.back() == ';') line = trim(line.substr(0, line.size() - 1));
    if (!line.empty() && block != Block::other) {
      const auto tok = tokens(line);
      if (tok.size() < 4)
        throw ParseError(lineno, "row needs at least 4 columns, found " + std::to_string(tok.size()));
      if (block == Block::bus) {
        Bus b;
        b.id = integer(tok[0], lineno);
        const int type = integer(tok[1], lineno);
        b.is_substation = type == 3;
        b.scheduled_p = -number(tok[2], lineno);
        b.scheduled_q = -number(tok[3], lineno);
        buses.push_back(b);
      } else {
        Branch br;
        br.id = static_cast<int>(branches.size()) + 1;
        br.from_bus = integer(tok[0], lineno);
        br.to_bus = integer(tok[1], lineno);
        br.impedance = {number(tok[2], lineno), number(tok[3], lineno)};
        branches.push_back(br);
      }
    }
    if (closes) block = Block::none;
  }
  if (block != Block::none) throw ParseError(0, "unterminated matrix");
  if (base_mva <= 0.0) throw ParseError(0, "missing or non-positive mpc.baseMVA");
  if (buses.empty()) throw ParseError(0, "missing mpc.bus");
  // Case files carry MW; the model works in per-unit.
  for (auto& b : buses) {
    b.scheduled_p /= base_mva;
    b.scheduled_q /= base_mva;
  }
  return GridNetwork(std::move(buses), std::move(branches), base_mva);
}

GridNetwork parse_native(std::string_view text) {
  double base_mva = 1.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  enum class Section { none, buses, branches } section = Section::none;

  for (auto [lineno, raw] : numbered_lines(text)) {
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line == "[buses]") {
      section = Section::buses;
      continue;
    }
    if (line == "[branches]") {
      section = Section::branches;
      continue;
    }
    if (line.front() == '[') throw ParseError(lineno, "unknown section " + std::string(line));
    const auto tok = tokens(line);
    switch (section) {
      case Section::none:
        if (tok.size() == 2 && tok[0] == "base_mva") {
          base_mva = number(tok[1], lineno);
          break;
        }
        throw ParseError(lineno, "data outside of a section");
      case Section::buses: {
        if (tok.size() != 4) throw ParseError(lineno, "bus row needs 4 columns");
        Bus b;
        b.id = integer(tok[0], lineno);
        const int sub = integer(tok[1], lineno);
        if (sub != 0 && sub != 1) throw ParseError(lineno, "is_substation must be 0 or 1");
        b.is_substation = sub == 1;
        b.scheduled_p = number(tok[2], lineno);
        b.scheduled_q = number(tok[3], lineno);
        buses.push_back(b);
        break;
      }
      case Section::branches: {
        if (tok.size() != 5 && !(tok.size() == 6 && tok[5] == "split"))
          throw ParseError(lineno, "branch row needs 5 columns (optional trailing 'split')");
        Branch br;
        br.id = integer(tok[0], lineno);
        br.from_bus = integer(tok[1], lineno);
        br.to_bus = integer(tok[2], lineno);
        br.impedance = {number(tok[3], lineno), number(tok[4], lineno)};
        br.zero_impedance = tok.size() == 6;
        branches.push_back(br);
        break;
      }
    }
  }
  return GridNetwork(std::move(buses), std::move(branches), base_mva);
}

}  // namespace

GridNetwork parse_case(std::string_view text) {
  if (text.find("mpc.") != std::string_view::npos) return parse_matpower(text);
  return parse_native(text);
}

GridNetwork load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open case file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

}  // namespace rsv

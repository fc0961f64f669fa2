#include "rsv/partition.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "rsv/errors.hpp"

namespace rsv {

std::vector<int> RegionAssignment::buses_in(int region) const {
  std::vector<int> out;
  for (std::size_t b = 0; b < region_of_bus.size(); ++b)
    if (region_of_bus[b] == region) out.push_back(static_cast<int>(b));
  return out;
}

std::map<int, int> parse_region_mapping(std::string_view text) {
  std::map<int, int> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    line = line.substr(0, line.find('#'));
    std::istringstream in{std::string(line)};
    long long bus = 0;
    long long region = 0;
    if (!(in >> bus)) {
      std::string rest;
      in.clear();
      if (in >> rest) throw ParseError(lineno, "expected 'bus_id region_id'");
      continue;
    }
    std::string extra;
    if (!(in >> region) || (in >> extra))
      throw ParseError(lineno, "expected 'bus_id region_id'");
    if (region < 1) throw ParseError(lineno, "region ids start at 1");
    if (!out.emplace(static_cast<int>(bus), static_cast<int>(region)).second)
      throw ParseError(lineno, "bus " + std::to_string(bus) + " mapped twice");
  }
  return out;
}

std::map<int, int> load_region_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open region mapping " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_region_mapping(buf.str());
}

RegionAssignment assign_regions(const GridNetwork& net, const std::map<int, int>& bus_to_region) {
  RegionAssignment a;
  a.region_of_bus.assign(net.bus_count(), 0);
  for (const auto& bus : net.buses()) {
    auto it = bus_to_region.find(bus.id);
    if (it == bus_to_region.end())
      throw TopologyError("bus " + std::to_string(bus.id) + " is not assigned to a region");
    a.region_of_bus[bus.id - 1] = it->second;
    a.region_count = std::max(a.region_count, it->second);
  }
  for (const auto& [bus, region] : bus_to_region) {
    if (bus < 1 || static_cast<std::size_t>(bus) > net.bus_count())
      throw TopologyError("region mapping names unknown bus " + std::to_string(bus));
  }
  std::vector<int> count(a.region_count + 1, 0);
  for (int r : a.region_of_bus) ++count[r];
  for (int r = 1; r <= a.region_count; ++r)
    if (count[r] == 0) throw TopologyError("region " + std::to_string(r) + " is empty");
  return a;
}

CommunicationGraph::CommunicationGraph(const std::vector<int>& nodes) {
  for (int n : nodes) adjacency_[n];
}

void CommunicationGraph::add_edge(int a, int b) {
  if (a == b) throw StructuralError("self-loop on region " + std::to_string(a));
  auto& na = adjacency_.at(a);
  auto& nb = adjacency_.at(b);
  if (std::find(na.begin(), na.end(), b) != na.end()) return;
  na.insert(std::upper_bound(na.begin(), na.end(), b), b);
  nb.insert(std::upper_bound(nb.begin(), nb.end(), a), a);
}

void CommunicationGraph::remove_node(int r) {
  auto it = adjacency_.find(r);
  if (it == adjacency_.end()) throw IndexError("region " + std::to_string(r) + " not in graph");
  for (int n : it->second) {
    auto& adj = adjacency_.at(n);
    adj.erase(std::remove(adj.begin(), adj.end(), r), adj.end());
  }
  adjacency_.erase(it);
}

std::vector<int> CommunicationGraph::nodes() const {
  std::vector<int> out;
  for (const auto& [n, _] : adjacency_) out.push_back(n);
  return out;
}

const std::vector<int>& CommunicationGraph::neighbors(int r) const {
  auto it = adjacency_.find(r);
  if (it == adjacency_.end()) throw IndexError("region " + std::to_string(r) + " not in graph");
  return it->second;
}

bool CommunicationGraph::has_edge(int a, int b) const {
  auto it = adjacency_.find(a);
  return it != adjacency_.end() && std::binary_search(it->second.begin(), it->second.end(), b);
}

std::size_t CommunicationGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& [_, adj] : adjacency_) twice += adj.size();
  return twice / 2;
}

std::vector<std::vector<int>> CommunicationGraph::components() const {
  std::vector<std::vector<int>> out;
  std::set<int> seen;
  for (const auto& [start, _] : adjacency_) {
    if (seen.count(start)) continue;
    std::vector<int> comp{start};
    seen.insert(start);
    for (std::size_t h = 0; h < comp.size(); ++h) {
      for (int n : adjacency_.at(comp[h])) {
        if (seen.insert(n).second) comp.push_back(n);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

CommunicationGraph CommunicationGraph::subgraph(const std::vector<int>& keep) const {
  CommunicationGraph g(keep);
  for (int a : keep)
    for (int b : neighbors(a))
      if (a < b && g.contains(b)) g.add_edge(a, b);
  return g;
}

bool is_cut_vertex(const CommunicationGraph& graph, int r) {
  if (!graph.contains(r)) throw IndexError("region " + std::to_string(r) + " not in graph");
  const auto before = graph.components().size();
  auto reduced = graph;
  reduced.remove_node(r);
  return reduced.components().size() > before;
}

int RegionView::local_index(int global) const {
  auto it = std::lower_bound(variables.begin(), variables.end(), global);
  if (it == variables.end() || *it != global) return -1;
  return static_cast<int>(it - variables.begin());
}

const SharedBlock& RegionView::shared_with(int neighbor) const {
  for (const auto& s : shared)
    if (s.neighbor == neighbor) return s;
  throw IndexError("region " + std::to_string(neighbor) + " is not a neighbor of region " +
                   std::to_string(id));
}

bool RegionView::is_neighbor(int j) const {
  return std::any_of(shared.begin(), shared.end(),
                     [j](const SharedBlock& s) { return s.neighbor == j; });
}

Eigen::VectorXd RegionView::select(const Eigen::VectorXd& global) const {
  Eigen::VectorXd out(dimension());
  for (int k = 0; k < dimension(); ++k) out[k] = global[variables[k]];
  return out;
}

Eigen::VectorXd RegionView::select_measured(const Eigen::VectorXd& local) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(measured.size()));
  for (std::size_t k = 0; k < measured.size(); ++k) out[k] = local[measured[k]];
  return out;
}

const RegionView& Partition::view(int region) const {
  for (const auto& v : views)
    if (v.id == region) return v;
  throw IndexError("region " + std::to_string(region) + " not in partition");
}

std::vector<int> Partition::regions() const {
  std::vector<int> out;
  for (const auto& v : views) out.push_back(v.id);
  return out;
}

namespace {

void refresh_degrees(RegionView& v) {
  v.degree = Eigen::VectorXd::Zero(v.dimension());
  for (const auto& s : v.shared)
    for (int k : s.local) v.degree[k] += 1.0;
  v.degree_pinv = v.degree.unaryExpr([](double d) { return d != 0.0 ? 1.0 / d : 0.0; });
}

void link_neighbors(std::vector<RegionView>& views, CommunicationGraph& graph) {
  for (auto& v : views) v.shared.clear();
  for (std::size_t a = 0; a < views.size(); ++a) {
    for (std::size_t b = a + 1; b < views.size(); ++b) {
      std::vector<int> common;
      std::set_intersection(views[a].variables.begin(), views[a].variables.end(),
                            views[b].variables.begin(), views[b].variables.end(),
                            std::back_inserter(common));
      if (common.empty()) continue;
      graph.add_edge(views[a].id, views[b].id);
      for (auto [self, other] : {std::pair{a, b}, std::pair{b, a}}) {
        SharedBlock blk;
        blk.neighbor = views[other].id;
        blk.global = common;
        for (int g : common) blk.local.push_back(views[self].local_index(g));
        views[self].shared.push_back(std::move(blk));
      }
    }
  }
  for (auto& v : views) {
    std::sort(v.shared.begin(), v.shared.end(),
              [](const SharedBlock& x, const SharedBlock& y) { return x.neighbor < y.neighbor; });
    refresh_degrees(v);
  }
}

}  // namespace

Partition build_region_views(const GridNetwork& net, const SystemVariableSpace& space,
                             const ConstraintMatrix& H, const RegionAssignment& assignment) {
  if (assignment.region_of_bus.size() != net.bus_count())
    throw DimensionError("assignment does not match the network");
  if (H.col_count() != space.dimension())
    throw DimensionError("constraint matrix does not match the variable space");

  Partition out;
  std::vector<int> ids;
  for (int r = 1; r <= assignment.region_count; ++r) ids.push_back(r);
  out.graph = CommunicationGraph(ids);

  for (int r : ids) {
    RegionView v;
    v.id = r;
    v.owned_buses = assignment.buses_in(r);
    std::set<int> buses(v.owned_buses.begin(), v.owned_buses.end());
    std::vector<int> branches;
    for (const auto& br : net.branches()) {
      const int fr = br.from_bus - 1;
      const int to = br.to_bus - 1;
      if (assignment.region_of_bus[fr] == r || assignment.region_of_bus[to] == r) {
        branches.push_back(br.id - 1);
        buses.insert(fr);
        buses.insert(to);
      }
    }
    for (int b : buses)
      for (auto k : {VarKind::p, VarKind::q, VarKind::v2}) v.variables.push_back(space.bus_var(b, k));
    for (int l : branches)
      for (auto k : {VarKind::P, VarKind::Q, VarKind::c2, VarKind::aux})
        v.variables.push_back(space.branch_var(l, k));
    std::sort(v.variables.begin(), v.variables.end());

    for (int k = 0; k < v.dimension(); ++k) {
      if (space.measured(v.variables[k])) v.measured.push_back(k);
      if (space.describe(v.variables[k]).kind == VarKind::v2) v.voltages.push_back(k);
    }
    for (int b : v.owned_buses) {
      if (b == net.substation()) continue;
      v.scheduled.push_back(v.local_index(space.bus_var(b, VarKind::p)));
      v.scheduled_buses.push_back(b);
    }

    // H⁽ⁱ⁾: rows whose whole support lies inside the local list.
    std::vector<std::vector<std::pair<int, double>>> local_rows;
    for (Eigen::Index row = 0; row < H.H.rows(); ++row) {
      std::vector<std::pair<int, double>> entries;
      bool inside = true;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(H.H, row); it; ++it) {
        const int k = v.local_index(static_cast<int>(it.col()));
        if (k < 0) {
          inside = false;
          break;
        }
        entries.emplace_back(k, it.value());
      }
      if (!inside) continue;
      v.constraint_rows.push_back(static_cast<int>(row));
      local_rows.push_back(std::move(entries));
    }
    v.H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(local_rows.size()), v.dimension());
    for (std::size_t i = 0; i < local_rows.size(); ++i)
      for (auto [k, val] : local_rows[i]) v.H(static_cast<Eigen::Index>(i), k) = val;

    out.views.push_back(std::move(v));
  }
  link_neighbors(out.views, out.graph);
  return out;
}

RemovalResult remove_region(const Partition& partition, int r) {
  if (!partition.graph.contains(r)) throw IndexError("region " + std::to_string(r) + " not in partition");
  if (partition.views.size() <= 1) throw StructuralError("cannot remove the last region");
  RemovalResult out;
  out.partition.graph = partition.graph;
  out.partition.graph.remove_node(r);
  for (const auto& v : partition.views) {
    if (v.id == r) continue;
    RegionView copy = v;
    copy.shared.erase(std::remove_if(copy.shared.begin(), copy.shared.end(),
                                     [r](const SharedBlock& s) { return s.neighbor == r; }),
                      copy.shared.end());
    refresh_degrees(copy);
    out.partition.views.push_back(std::move(copy));
  }
  out.components = out.partition.graph.components();
  return out;
}

Partition restrict_to(const Partition& partition, const std::vector<int>& regions) {
  Partition out;
  out.graph = partition.graph.subgraph(regions);
  for (const auto& v : partition.views) {
    if (!out.graph.contains(v.id)) continue;
    for (const auto& s : v.shared)
      if (!out.graph.contains(s.neighbor))
        throw StructuralError("region set is not closed under adjacency");
    out.views.push_back(v);
  }
  return out;
}

}  // namespace rsv

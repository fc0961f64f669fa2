#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rsv/constraints.hpp"
#include "rsv/network.hpp"
#include "rsv/variables.hpp"

namespace rsv {

struct RegionAssignment {
  int region_count = 0;
  std::vector<int> region_of_bus;  // indexed by 0-based bus, values 1..N

  std::vector<int> buses_in(int region) const;
};

/// `bus_id region_id` pairs, `#` comments.
std::map<int, int> parse_region_mapping(std::string_view text);
std::map<int, int> load_region_mapping(const std::string& path);

/// Validates that every bus is mapped and that regions 1..N are all non-empty.
RegionAssignment assign_regions(const GridNetwork& net, const std::map<int, int>& bus_to_region);

/// Simple undirected graph over region ids.
class CommunicationGraph {
 public:
  CommunicationGraph() = default;
  explicit CommunicationGraph(const std::vector<int>& nodes);

  void add_edge(int a, int b);
  void remove_node(int r);

  std::vector<int> nodes() const;
  const std::vector<int>& neighbors(int r) const;
  bool contains(int r) const { return adjacency_.count(r) != 0; }
  bool has_edge(int a, int b) const;
  std::size_t node_count() const { return adjacency_.size(); }
  std::size_t edge_count() const;

  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<int>> components() const;
  CommunicationGraph subgraph(const std::vector<int>& keep) const;

 private:
  std::map<int, std::vector<int>> adjacency_;
};

bool is_cut_vertex(const CommunicationGraph& graph, int r);

/// Variables region i holds in common with one neighbor j. Both sides list
/// the same global indices in ascending order, so S_ij x⁽ⁱ⁾ and S_ji x⁽ʲ⁾ line up.
struct SharedBlock {
  int neighbor = 0;
  std::vector<int> local;   // positions inside x⁽ⁱ⁾
  std::vector<int> global;  // positions inside x
};

struct RegionView {
  int id = 0;
  std::vector<int> owned_buses;      // 0-based bus indices in ℬ_i
  std::vector<int> variables;        // S⁽ⁱ⁾ as ascending global indices
  std::vector<int> measured;         // S_a⁽ⁱ⁾ as local indices
  std::vector<int> scheduled;        // S_p⁽ⁱ⁾ as local indices (p of owned, non-substation buses)
  std::vector<int> scheduled_buses;  // bus index for each entry of `scheduled`
  std::vector<int> voltages;         // local indices of v² variables
  std::vector<int> constraint_rows;  // rows of H that make up H⁽ⁱ⁾
  Eigen::MatrixXd H;                 // H⁽ⁱ⁾, |constraint_rows| x m_i
  std::vector<SharedBlock> shared;   // one per neighbor, ascending neighbor id
  Eigen::VectorXd degree;            // diag D⁽ⁱ⁾
  Eigen::VectorXd degree_pinv;       // diag D̄⁽ⁱ⁾

  int dimension() const { return static_cast<int>(variables.size()); }
  /// Local position of a global variable, -1 when region i does not hold it.
  int local_index(int global) const;
  const SharedBlock& shared_with(int neighbor) const;
  bool is_neighbor(int j) const;

  Eigen::VectorXd select(const Eigen::VectorXd& global) const;
  Eigen::VectorXd select_measured(const Eigen::VectorXd& local) const;
};

struct Partition {
  std::vector<RegionView> views;  // ascending region id
  CommunicationGraph graph;

  const RegionView& view(int region) const;
  std::vector<int> regions() const;
};

Partition build_region_views(const GridNetwork& net, const SystemVariableSpace& space,
                             const ConstraintMatrix& H, const RegionAssignment& assignment);

struct RemovalResult {
  Partition partition;
  std::vector<std::vector<int>> components;
};

/// Drops region r, its edges and every shared block pointing at it; D and D̄
/// are recomputed from what remains.
RemovalResult remove_region(const Partition& partition, int r);

/// Keeps only the listed regions (which must be closed under adjacency, as a
/// connected component is).
Partition restrict_to(const Partition& partition, const std::vector<int>& regions);

}  // namespace rsv

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsv/network.hpp"

namespace rsv {

enum class VarKind : std::uint8_t {
  p,    // bus active injection
  q,    // bus reactive injection
  v2,   // squared bus voltage magnitude
  P,    // branch active flow
  Q,    // branch reactive flow
  c2,   // squared branch current magnitude
  aux,  // x'_l, the relaxed (P²+Q²)/c² term
};

struct VariableId {
  VarKind kind;
  int element;  // 0-based bus index for p/q/v2, branch index otherwise

  bool is_bus() const noexcept { return kind <= VarKind::v2; }
  bool operator==(const VariableId&) const = default;
};

struct MeasurementPolicy {
  enum class Kind { all, injections_only, explicit_list };
  Kind kind = Kind::all;
  std::vector<std::string> names;  // explicit_list only, e.g. "p_2", "v2_2", "c2_1"

  static MeasurementPolicy all() { return {}; }
  static MeasurementPolicy injections_only() { return {Kind::injections_only, {}}; }
  static MeasurementPolicy explicit_list(std::vector<std::string> names) {
    return {Kind::explicit_list, std::move(names)};
  }
};

/// Global indexing of the system vector x. Buses come first (p, q, v2 per bus
/// in id order), then branches (P, Q, c2, aux per branch in id order).
class SystemVariableSpace {
 public:
  SystemVariableSpace(const GridNetwork& net, const MeasurementPolicy& policy);

  int dimension() const noexcept { return dimension_; }
  std::size_t bus_count() const noexcept { return buses_; }
  std::size_t branch_count() const noexcept { return branches_; }

  int index(VarKind kind, int element) const;
  int bus_var(int bus, VarKind kind) const { return index(kind, bus); }
  int branch_var(int branch, VarKind kind) const { return index(kind, branch); }
  VariableId describe(int index) const;

  /// Names use 1-based ids: p_42, v2_42, P_41, c2_41, aux_41.
  std::string name(int index) const;
  int parse_name(const std::string& name) const;

  bool measured(int index) const { return measured_.at(index); }
  const std::vector<bool>& measured_mask() const noexcept { return measured_; }
  std::vector<int> measured_indices() const;

 private:
  std::size_t buses_;
  std::size_t branches_;
  int dimension_;
  std::vector<bool> measured_;
};

}  // namespace rsv

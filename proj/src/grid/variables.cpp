#include "rsv/variables.hpp"

#include <array>
#include <charconv>

#include "rsv/errors.hpp"

namespace rsv {

namespace {

constexpr std::array<const char*, 7> kPrefix{"p", "q", "v2", "P", "Q", "c2", "aux"};

}  // namespace

SystemVariableSpace::SystemVariableSpace(const GridNetwork& net, const MeasurementPolicy& policy)
    : buses_(net.bus_count()),
      branches_(net.branch_count()),
      dimension_(static_cast<int>(3 * buses_ + 4 * branches_)),
      measured_(dimension_, false) {
  switch (policy.kind) {
    case MeasurementPolicy::Kind::all:
      measured_.assign(dimension_, true);
      break;
    case MeasurementPolicy::Kind::injections_only:
      for (std::size_t i = 0; i < 3 * buses_; ++i) measured_[i] = true;
      break;
    case MeasurementPolicy::Kind::explicit_list:
      for (const auto& n : policy.names) measured_[parse_name(n)] = true;
      break;
  }
}

int SystemVariableSpace::index(VarKind kind, int element) const {
  const int k = static_cast<int>(kind);
  if (k <= 2) {
    if (element < 0 || static_cast<std::size_t>(element) >= buses_)
      throw IndexError("bus index " + std::to_string(element) + " out of range");
    return 3 * element + k;
  }
  if (element < 0 || static_cast<std::size_t>(element) >= branches_)
    throw IndexError("branch index " + std::to_string(element) + " out of range");
  return static_cast<int>(3 * buses_) + 4 * element + (k - 3);
}

VariableId SystemVariableSpace::describe(int index) const {
  if (index < 0 || index >= dimension_)
    throw IndexError("variable index " + std::to_string(index) + " out of range");
  const int bus_block = static_cast<int>(3 * buses_);
  if (index < bus_block) return {static_cast<VarKind>(index % 3), index / 3};
  const int off = index - bus_block;
  return {static_cast<VarKind>(3 + off % 4), off / 4};
}

std::string SystemVariableSpace::name(int index) const {
  const auto id = describe(index);
  return std::string(kPrefix[static_cast<int>(id.kind)]) + "_" + std::to_string(id.element + 1);
}

int SystemVariableSpace::parse_name(const std::string& name) const {
  const auto us = name.rfind('_');
  if (us == std::string::npos) throw IndexError("unknown variable '" + name + "'");
  const auto prefix = name.substr(0, us);
  int element = 0;
  const char* b = name.data() + us + 1;
  const char* e = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(b, e, element);
  if (ec != std::errc() || ptr != e || b == e) throw IndexError("unknown variable '" + name + "'");
  for (std::size_t k = 0; k < kPrefix.size(); ++k) {
    if (prefix == kPrefix[k]) {
      try {
        return index(static_cast<VarKind>(k), element - 1);
      } catch (const IndexError&) {
        throw IndexError("unknown variable '" + name + "'");
      }
    }
  }
  throw IndexError("unknown variable '" + name + "'");
}

std::vector<int> SystemVariableSpace::measured_indices() const {
  std::vector<int> out;
  for (int i = 0; i < dimension_; ++i)
    if (measured_[i]) out.push_back(i);
  return out;
}

}  // namespace rsv

#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

namespace rsv {

struct Bus {
  int id = 0;  // 1..|B| after normalization
  bool is_substation = false;
  double scheduled_p = 0.0;  // per-unit injection, loads negative
  double scheduled_q = 0.0;
  int source_id = 0;  // id as written in the case file
};

struct Branch {
  int id = 0;  // 1..|E|, file order
  int from_bus = 0;
  int to_bus = 0;
  std::complex<double> impedance;
  bool zero_impedance = false;  // explicit prosumer-splitting edge
};

/// Radial feeder rooted at its substation. Construction validates the tree
/// and orients every branch away from the substation; instances are
/// immutable afterwards.
class GridNetwork {
 public:
  GridNetwork(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva);

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  double base_mva() const noexcept { return base_mva_; }

  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::size_t branch_count() const noexcept { return branches_.size(); }

  // Indices below are 0-based positions (bus id - 1, branch id - 1).
  int substation() const noexcept { return substation_; }
  /// to⁻¹(b): the branch feeding bus b, or -1 for the substation.
  int incoming_branch(int bus) const { return incoming_.at(bus); }
  /// fr⁻¹(b): branches leaving bus b.
  const std::vector<int>& outgoing_branches(int bus) const { return outgoing_.at(bus); }
  /// Branches ordered so that every branch precedes the ones below it.
  const std::vector<int>& branch_order() const noexcept { return order_; }

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  double base_mva_;
  int substation_ = -1;
  std::vector<int> incoming_;
  std::vector<std::vector<int>> outgoing_;
  std::vector<int> order_;
};

/// Accepts the MATPOWER subset (mpc.baseMVA / mpc.bus / mpc.branch) or the
/// native `[buses]` / `[branches]` format; the format is sniffed from the text.
GridNetwork parse_case(std::string_view text);
GridNetwork load_case(const std::string& path);

}  // namespace rsv

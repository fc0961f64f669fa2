#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rsv/partition.hpp"

namespace rsv {

enum class PayloadKind : std::uint8_t {
  measurements = 0,
  admm_state = 1,
  shared_slice = 2,
  disagreement = 3,
  trust_score = 4,
  verdict = 5,
};

const char* to_string(PayloadKind kind);

/// Author id of the trust aggregator; regions are 1..N.
inline constexpr int kSystemAuthor = 0;

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of the empty string, the prev_hash of every first entry.
const Digest& genesis_digest();
Digest entry_digest(const Digest& prev, int author, PayloadKind kind, const std::vector<std::uint8_t>& payload);

struct LedgerEntry {
  std::uint64_t sequence = 0;
  int author = 0;
  PayloadKind kind = PayloadKind::measurements;
  std::vector<std::uint8_t> payload;
  Digest prev_hash{};
  Digest entry_hash{};
};

struct ChainCheck {
  bool intact = true;
  std::optional<std::size_t> first_bad;
};

ChainCheck verify_chain(const std::vector<LedgerEntry>& entries);

/// Append-only hash-chained log with a fixed writer/reader/kind policy.
class Ledger {
 public:
  Ledger(std::string name, std::vector<int> writers, std::vector<int> readers, std::vector<PayloadKind> kinds);

  const std::string& name() const { return name_; }
  const LedgerEntry& append(int author, PayloadKind kind, std::vector<std::uint8_t> payload);
  /// Most recent entry of `kind`, optionally from one author.
  const LedgerEntry* read_latest(PayloadKind kind, std::optional<int> author = std::nullopt) const;
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool may_write(int author) const;
  bool may_read(int reader) const;
  ChainCheck verify() const { return verify_chain(entries_); }

 private:
  std::string name_;
  std::vector<int> writers_;
  std::vector<int> readers_;  // empty: readable by everyone
  std::vector<PayloadKind> kinds_;
  std::vector<LedgerEntry> entries_;
};

/// LL_i per region, GL, and one private channel GL_ij per ordered neighbor pair.
class LedgerSet {
 public:
  explicit LedgerSet(const CommunicationGraph& graph);

  Ledger& local(int region);
  Ledger& global() { return global_; }
  Ledger& channel(int from, int to);

  /// Reader-checked access; throws AccessViolation outside the access rule.
  const Ledger& local_for(int reader, int region) const;
  const Ledger& global_for(int reader) const;
  const Ledger& channel_for(int reader, int from, int to) const;

  const std::map<int, Ledger>& locals() const { return locals_; }
  const std::map<std::pair<int, int>, Ledger>& channels() const { return channels_; }
  const Ledger& global() const { return global_; }

  std::vector<const Ledger*> all() const;
  /// First broken ledger, if any.
  std::optional<std::pair<std::string, std::size_t>> verify_all() const;

 private:
  std::map<int, Ledger> locals_;
  Ledger global_;
  std::map<std::pair<int, int>, Ledger> channels_;
};

std::string to_hex(const Digest& d);
std::string to_base64(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_base64(const std::string& text);

/// One JSON object per line: sequence, author, kind, payload (base64), prev_hash, entry_hash (hex).
void dump_jsonl(const Ledger& ledger, std::ostream& out);

/// Little-endian fixed-width encoding used for every payload.
class PayloadWriter {
 public:
  PayloadWriter& u8(std::uint8_t v);
  PayloadWriter& u32(std::uint32_t v);
  PayloadWriter& i32(std::int32_t v);
  PayloadWriter& u64(std::uint64_t v);
  PayloadWriter& f64(double v);
  PayloadWriter& f64s(const double* data, std::size_t n);
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class PayloadReader {
 public:
  explicit PayloadReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::int32_t i32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64s(std::size_t n);
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace rsv

#include "rsv/ledger.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <json.hpp>

#include "rsv/errors.hpp"

namespace rsv {

const char* to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::measurements: return "measurements";
    case PayloadKind::admm_state: return "admm_state";
    case PayloadKind::shared_slice: return "shared_slice";
    case PayloadKind::disagreement: return "disagreement";
    case PayloadKind::trust_score: return "trust_score";
    case PayloadKind::verdict: return "verdict";
  }
  return "unknown";
}

namespace {

Digest sha256(const std::vector<std::uint8_t>& data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw Error("SHA-256 failed");
  return out;
}

}  // namespace

const Digest& genesis_digest() {
  static const Digest g = sha256({});
  return g;
}

Digest entry_digest(const Digest& prev, int author, PayloadKind kind, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> buf(prev.begin(), prev.end());
  PayloadWriter w;
  w.i32(author).u8(static_cast<std::uint8_t>(kind));
  auto head = w.take();
  buf.insert(buf.end(), head.begin(), head.end());
  buf.insert(buf.end(), payload.begin(), payload.end());
  return sha256(buf);
}

ChainCheck verify_chain(const std::vector<LedgerEntry>& entries) {
  Digest prev = genesis_digest();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.sequence != i || e.prev_hash != prev ||
        e.entry_hash != entry_digest(e.prev_hash, e.author, e.kind, e.payload))
      return {false, i};
    prev = e.entry_hash;
  }
  return {};
}

Ledger::Ledger(std::string name, std::vector<int> writers, std::vector<int> readers, std::vector<PayloadKind> kinds)
    : name_(std::move(name)), writers_(std::move(writers)), readers_(std::move(readers)), kinds_(std::move(kinds)) {}

bool Ledger::may_write(int author) const {
  return std::find(writers_.begin(), writers_.end(), author) != writers_.end();
}

bool Ledger::may_read(int reader) const {
  return readers_.empty() || std::find(readers_.begin(), readers_.end(), reader) != readers_.end();
}

const LedgerEntry& Ledger::append(int author, PayloadKind kind, std::vector<std::uint8_t> payload) {
  if (!may_write(author))
    throw AccessViolation("author " + std::to_string(author) + " may not write to " + name_);
  if (std::find(kinds_.begin(), kinds_.end(), kind) == kinds_.end())
    throw AccessViolation(std::string(to_string(kind)) + " entries do not belong in " + name_);
  LedgerEntry e;
  e.sequence = entries_.size();
  e.author = author;
  e.kind = kind;
  e.payload = std::move(payload);
  e.prev_hash = entries_.empty() ? genesis_digest() : entries_.back().entry_hash;
  e.entry_hash = entry_digest(e.prev_hash, e.author, e.kind, e.payload);
  entries_.push_back(std::move(e));
  return entries_.back();
}

const LedgerEntry* Ledger::read_latest(PayloadKind kind, std::optional<int> author) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->kind == kind && (!author || it->author == *author)) return &*it;
  return nullptr;
}

namespace {

std::vector<int> global_writers(const CommunicationGraph& graph) {
  std::vector<int> w{kSystemAuthor};
  for (int i : graph.nodes()) w.push_back(i);
  return w;
}

}  // namespace

LedgerSet::LedgerSet(const CommunicationGraph& graph)
    : global_("GL", global_writers(graph), {},
              {PayloadKind::disagreement, PayloadKind::trust_score, PayloadKind::verdict}) {
  for (int i : graph.nodes()) {
    locals_.emplace(i, Ledger("LL_" + std::to_string(i), {i}, {i},
                              {PayloadKind::measurements, PayloadKind::admm_state}));
    for (int j : graph.neighbors(i)) {
      channels_.emplace(std::pair{i, j},
                        Ledger("GL_" + std::to_string(i) + "_" + std::to_string(j), {i}, {i, j},
                               {PayloadKind::shared_slice}));
    }
  }
}

Ledger& LedgerSet::local(int region) {
  auto it = locals_.find(region);
  if (it == locals_.end()) throw IndexError("no local ledger for region " + std::to_string(region));
  return it->second;
}

Ledger& LedgerSet::channel(int from, int to) {
  auto it = channels_.find({from, to});
  if (it == channels_.end())
    throw IndexError("no channel from region " + std::to_string(from) + " to region " + std::to_string(to));
  return it->second;
}

const Ledger& LedgerSet::local_for(int reader, int region) const {
  auto it = locals_.find(region);
  if (it == locals_.end()) throw IndexError("no local ledger for region " + std::to_string(region));
  if (!it->second.may_read(reader))
    throw AccessViolation("region " + std::to_string(reader) + " may not read " + it->second.name());
  return it->second;
}

const Ledger& LedgerSet::global_for(int reader) const {
  if (!global_.may_read(reader)) throw AccessViolation("region " + std::to_string(reader) + " may not read GL");
  return global_;
}

const Ledger& LedgerSet::channel_for(int reader, int from, int to) const {
  auto it = channels_.find({from, to});
  if (it == channels_.end())
    throw IndexError("no channel from region " + std::to_string(from) + " to region " + std::to_string(to));
  if (!it->second.may_read(reader))
    throw AccessViolation("region " + std::to_string(reader) + " may not read " + it->second.name());
  return it->second;
}

std::vector<const Ledger*> LedgerSet::all() const {
  std::vector<const Ledger*> out;
  for (const auto& [_, l] : locals_) out.push_back(&l);
  out.push_back(&global_);
  for (const auto& [_, l] : channels_) out.push_back(&l);
  return out;
}

std::optional<std::pair<std::string, std::size_t>> LedgerSet::verify_all() const {
  for (const Ledger* l : all()) {
    auto c = l->verify();
    if (!c.intact) return std::pair{l->name(), *c.first_bad};
  }
  return std::nullopt;
}

std::string to_hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : d) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::string to_base64(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> from_base64(const std::string& text) {
  if (text.size() % 4 != 0) throw ParseError(0, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError(0, "invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

void dump_jsonl(const Ledger& ledger, std::ostream& out) {
  for (const auto& e : ledger.entries()) {
    nlohmann::ordered_json j;
    j["ledger"] = ledger.name();
    j["sequence"] = e.sequence;
    j["author"] = e.author;
    j["kind"] = to_string(e.kind);
    j["payload"] = to_base64(e.payload);
    j["prev_hash"] = to_hex(e.prev_hash);
    j["entry_hash"] = to_hex(e.entry_hash);
    out << j.dump() << '\n';
  }
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

PayloadWriter& PayloadWriter::u8(std::uint8_t v) {
  bytes_.push_back(v);
  return *this;
}
PayloadWriter& PayloadWriter::u32(std::uint32_t v) {
  put_le(bytes_, v);
  return *this;
}
PayloadWriter& PayloadWriter::i32(std::int32_t v) {
  put_le(bytes_, static_cast<std::uint32_t>(v));
  return *this;
}
PayloadWriter& PayloadWriter::u64(std::uint64_t v) {
  put_le(bytes_, v);
  return *this;
}
PayloadWriter& PayloadWriter::f64(double v) {
  put_le(bytes_, std::bit_cast<std::uint64_t>(v));
  return *this;
}
PayloadWriter& PayloadWriter::f64s(const double* data, std::size_t n) {
  bytes_.reserve(bytes_.size() + 8 * n);
  for (std::size_t i = 0; i < n; ++i) f64(data[i]);
  return *this;
}

void PayloadReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw ParseError(0, "payload truncated");
}

std::uint8_t PayloadReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint64_t PayloadReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint32_t PayloadReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::int32_t PayloadReader::i32() { return static_cast<std::int32_t>(u32()); }

double PayloadReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<double> PayloadReader::f64s(std::size_t n) {
  need(8 * n);
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

}  // namespace rsv

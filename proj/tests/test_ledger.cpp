#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include <json.hpp>

#include "rsv/errors.hpp"
#include "rsv/ledger.hpp"

using namespace rsv;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

CommunicationGraph triangle_plus() {
  CommunicationGraph g({1, 2, 3, 4});
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  g.add_edge(1, 3);
  g.add_edge(3, 4);
  return g;
}

}  // namespace

TEST_CASE("digests match an independent SHA-256") {
  CHECK(to_hex(genesis_digest()) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Ledger l("test", {0, 3}, {}, {PayloadKind::shared_slice, PayloadKind::trust_score});
  const auto& e0 = l.append(3, PayloadKind::shared_slice, bytes("abc"));
  CHECK(e0.sequence == 0);
  CHECK(e0.prev_hash == genesis_digest());
  CHECK(to_hex(e0.entry_hash) == "9adf429e39bed89c5ac282682f212e8c090bfb03039b63b0c76a40c833139a60");
  const auto& e1 = l.append(kSystemAuthor, PayloadKind::trust_score, {});
  CHECK(e1.prev_hash == l.entries()[0].entry_hash);
  CHECK(to_hex(e1.entry_hash) == "d95bb495b275d447a3e9557b5657838d9a22f8375c6715d408290bb361dfb4bc");
}

TEST_CASE("access rules") {
  LedgerSet set(triangle_plus());
  CHECK_NOTHROW(set.local(2).append(2, PayloadKind::measurements, bytes("s")));
  CHECK_THROWS_AS(set.local(2).append(3, PayloadKind::measurements, bytes("s")), AccessViolation);
  CHECK_THROWS_AS(set.local(2).append(2, PayloadKind::verdict, {}), AccessViolation);
  CHECK_NOTHROW(set.local_for(2, 2));
  CHECK_THROWS_AS(set.local_for(3, 2), AccessViolation);

  CHECK_NOTHROW(set.global().append(kSystemAuthor, PayloadKind::trust_score, {}));
  CHECK_NOTHROW(set.global().append(4, PayloadKind::disagreement, {}));
  CHECK_THROWS_AS(set.global().append(2, PayloadKind::measurements, {}), AccessViolation);
  for (int r : {1, 2, 3, 4}) CHECK_NOTHROW(set.global_for(r));

  CHECK_NOTHROW(set.channel(1, 2).append(1, PayloadKind::shared_slice, bytes("x")));
  CHECK_THROWS_AS(set.channel(1, 2).append(2, PayloadKind::shared_slice, bytes("x")), AccessViolation);
  CHECK_NOTHROW(set.channel_for(1, 1, 2));
  CHECK_NOTHROW(set.channel_for(2, 1, 2));
  CHECK_THROWS_AS(set.channel_for(3, 1, 2), AccessViolation);
  CHECK_THROWS(set.channel(1, 4));  // not neighbors

  CHECK(set.locals().size() == 4);
  CHECK(set.channels().size() == 8);
  CHECK(set.all().size() == 4 + 1 + 8);
}

TEST_CASE("long chains verify and tampering is located") {
  Ledger l("LL_1", {1}, {1}, {PayloadKind::admm_state});
  for (int i = 0; i < 1000; ++i) {
    PayloadWriter w;
    w.u32(static_cast<std::uint32_t>(i)).f64(i * 0.5);
    l.append(1, PayloadKind::admm_state, w.take());
  }
  CHECK(l.size() == 1000);
  CHECK(l.verify().intact);

  auto entries = l.entries();
  entries[5].payload[0] ^= 0x01;
  const auto bad = verify_chain(entries);
  CHECK_FALSE(bad.intact);
  REQUIRE(bad.first_bad.has_value());
  CHECK(*bad.first_bad == 5);

  auto relinked = l.entries();
  relinked[7].prev_hash[0] ^= 0x80;
  CHECK(*verify_chain(relinked).first_bad == 7);

  auto truncated = l.entries();
  truncated.pop_back();
  CHECK(verify_chain(truncated).intact);
  CHECK(verify_chain({}).intact);
}

TEST_CASE("read_latest") {
  Ledger l("GL_12", {1}, {1, 2}, {PayloadKind::shared_slice});
  CHECK(l.read_latest(PayloadKind::shared_slice) == nullptr);
  l.append(1, PayloadKind::shared_slice, bytes("first"));
  l.append(1, PayloadKind::shared_slice, bytes("second"));
  const auto* e = l.read_latest(PayloadKind::shared_slice);
  REQUIRE(e != nullptr);
  CHECK(e->payload == bytes("second"));
  CHECK(l.read_latest(PayloadKind::shared_slice, 2) == nullptr);
  CHECK(l.read_latest(PayloadKind::verdict) == nullptr);

  Ledger g("GL", {0, 1, 2}, {}, {PayloadKind::disagreement});
  g.append(1, PayloadKind::disagreement, bytes("a"));
  g.append(2, PayloadKind::disagreement, bytes("b"));
  CHECK(g.read_latest(PayloadKind::disagreement, 1)->payload == bytes("a"));
  CHECK(g.read_latest(PayloadKind::disagreement)->payload == bytes("b"));
}

TEST_CASE("payload encoding is fixed little-endian") {
  PayloadWriter w;
  w.u8(7).u32(0x01020304u).i32(-2).u64(1).f64(1.5);
  const auto b = w.take();
  const std::vector<std::uint8_t> expect = {0x07, 0x04, 0x03, 0x02, 0x01, 0xfe, 0xff, 0xff, 0xff, 0x01, 0x00,
                                            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                            0x00, 0xf8, 0x3f};
  CHECK(b == expect);

  PayloadReader r(b);
  CHECK(r.u8() == 7);
  CHECK(r.u32() == 0x01020304u);
  CHECK(r.i32() == -2);
  CHECK(r.u64() == 1);
  CHECK(r.f64() == 1.5);
  CHECK(r.done());
  CHECK_THROWS_AS(r.u8(), ParseError);

  const double vals[] = {0.1, -0.0, 1e300};
  PayloadWriter w2;
  w2.f64s(vals, 3);
  const auto b2 = w2.take();
  PayloadReader r2(b2);
  const auto back = r2.f64s(3);
  for (int i = 0; i < 3; ++i) CHECK(std::memcmp(&back[static_cast<std::size_t>(i)], &vals[i], sizeof(double)) == 0);
}

TEST_CASE("base64") {
  CHECK(to_base64({0, 255, 16, 32, 7}) == "AP8QIAc=");
  CHECK(to_base64({}).empty());
  for (std::size_t n = 0; n < 20; ++n) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(i * 37 + 11);
    CHECK(from_base64(to_base64(v)) == v);
  }
  CHECK_THROWS_AS(from_base64("A!B="), ParseError);
}

TEST_CASE("jsonl export") {
  Ledger l("LL_3", {3}, {3}, {PayloadKind::measurements});
  l.append(3, PayloadKind::measurements, bytes("hello"));
  l.append(3, PayloadKind::measurements, bytes("world"));
  std::ostringstream out;
  dump_jsonl(l, out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto& e = l.entries()[n];
    CHECK(j.at("ledger") == "LL_3");
    CHECK(j.at("sequence") == n);
    CHECK(j.at("author") == 3);
    CHECK(j.at("kind") == "measurements");
    CHECK(from_base64(j.at("payload").get<std::string>()) == e.payload);
    CHECK(j.at("prev_hash") == to_hex(e.prev_hash));
    CHECK(j.at("entry_hash") == to_hex(e.entry_hash));
    ++n;
  }
  CHECK(n == 2);
}

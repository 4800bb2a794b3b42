// Copyright 2026 The ctinet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <map>

#include "ctinet/crypto.hpp"
#include "ctinet/simnet.hpp"
#include "test_net.hpp"

using namespace ctinet;
using ctinet::test::error_of;
using ctinet::test::TestNet;
using json = nlohmann::json;

namespace {

using Scores = std::array<std::uint32_t, 3>;

/// Client-side work around a TestNet: sealing, verdict key release, opening
/// delivered keys.
struct Flow {
  TestNet& t;
  std::map<std::string, Bytes> plain;

  json metadata(const std::string& label, TlpLevel tlp = TlpLevel::Green) const {
    return sim::SimNetwork::default_metadata(label, tlp);
  }

  std::string submit(const AccountId& c, const std::string& label,
                     TlpLevel tlp = TlpLevel::Green,
                     std::optional<std::string> channel = std::nullopt,
                     std::optional<Bytes> text = std::nullopt) {
    const Bytes p = text.value_or(to_bytes("CTI " + label + " indicators"));
    const SubmitResult r = t.net->submit_cti(c, metadata(label, tlp), cti_fingerprint(p), channel);
    plain[r.submission_id] = p;
    return r.submission_id;
  }

  void attach(const std::string& sid) {
    const CtiPackage pkg = *t.net->exchange().package(sid);
    std::array<PublicKey, 3> pubs;
    for (std::size_t i = 0; i < 3; ++i) {
      pubs[i] = t.net->registry().public_key_of(pkg.slots[i].verifier);
    }
    const EnvelopeSet env =
        seal(plain.at(sid), pubs, t.net->exchange().escrow_public_key(), t.rng, t.net->store());
    t.net->attach_envelope(pkg.contributor, sid, env);
  }

  std::array<AccountId, 3> assign_and_attach(const std::string& sid) {
    const auto v = t.net->assign_verifiers(sid);
    attach(sid);
    return v;
  }

  VerdictInput verdict_input(const std::string& sid, const AccountId& v, Scores s,
                             bool dup = false) {
    const CtiPackage pkg = *t.net->exchange().package(sid);
    VerdictInput in{v, sid, s[0], s[1], s[2], dup, to_bytes("report by " + v), std::nullopt};
    const auto slot = pkg.slot_of(v);
    if (slot && pkg.slots[*slot].sealed) {
      const SymmetricKey kv =
          unwrap_key(pkg.envelope->wrapped_verifier_keys[*slot], t.keys.at(v).secret_key);
      CHECK(decrypt_object(kv, t.net->store().get(pkg.envelope->verifier_copies[*slot])) ==
            plain.at(sid));
      in.key_release = wrap_key(kv, t.net->exchange().escrow_public_key(), t.rng);
    }
    return in;
  }

  void verdict(const std::string& sid, const AccountId& v, Scores s, bool dup = false) {
    t.net->submit_verdict(verdict_input(sid, v, s, dup));
  }

  void verdicts(const std::string& sid, const std::array<Scores, 3>& s,
                std::array<bool, 3> dup = {false, false, false}) {
    const CtiPackage pkg = *t.net->exchange().package(sid);
    for (std::size_t i = 0; i < 3; ++i) verdict(sid, pkg.slots[i].verifier, s[i], dup[i]);
  }

  Bytes open(const AccountId& consumer, const Delivery& d) {
    const SymmetricKey k = unwrap_key(WrappedKey::from_hex(d.key_blob), t.keys.at(consumer).secret_key);
    return decrypt_object(k, t.net->store().get(d.ciphertext));
  }
};

struct World {
  TestNet t;
  Flow f{t, {}};
  AccountId alice, bob, carol;
  std::vector<AccountId> v;

  explicit World(std::size_t verifiers = 3, std::uint64_t seed = 1) : t(seed) {
    alice = t.onboard("alice", {Role::Contributor});
    bob = t.onboard("bob", {Role::Consumer});
    carol = t.onboard("carol", {Role::Consumer});
    for (std::size_t i = 0; i < verifiers; ++i) {
      v.push_back(t.onboard("v" + std::to_string(i), {Role::Verifier}));
    }
  }

  std::string accepted(const std::string& label, TlpLevel tlp = TlpLevel::Green,
                       std::optional<std::string> channel = std::nullopt) {
    const std::string sid = f.submit(alice, label, tlp, channel);
    f.assign_and_attach(sid);
    f.verdicts(sid, {Scores{4, 4, 4}, Scores{4, 4, 4}, Scores{4, 4, 4}});
    REQUIRE(t.net->finalize_verification(sid).outcome == CtiStatus::Accepted);
    return sid;
  }
};

std::uint32_t balance(const TestNet& t, const AccountId& a) {
  return t.account(a).discount_balance;
}

}  // namespace

TEST_CASE("submit_cti") {
  World w;
  const std::string sid = w.f.submit(w.alice, "s1");
  const auto pkg = *w.t.net->exchange().package(sid);
  CHECK(pkg.status == CtiStatus::Submitted);
  const auto txs = w.t.net->ledger().transactions(std::string(kNetworkChannel));
  const auto& tx = txs.back();
  CHECK(tx.kind == TxKind::SubmitCti);
  CHECK(tx.timestamp > 0);
  CHECK_FALSE(tx.body["metadata"].contains("created_at"));
  CHECK(pkg.metadata["created_at"] == tx.timestamp);

  json md = w.f.metadata("x");
  md["anonymized"] = false;
  CHECK(error_of([&] { w.t.net->submit_cti(w.alice, md, cti_fingerprint(to_bytes("x"))); }) ==
        ErrorCode::NotAnonymized);
  md = w.f.metadata("x");
  md.erase("industry");
  CHECK(error_of([&] { w.t.net->submit_cti(w.alice, md, cti_fingerprint(to_bytes("x"))); }) ==
        ErrorCode::SchemaViolation);
  md = w.f.metadata("x");
  md["created_at"] = 5;
  CHECK(error_of([&] { w.t.net->submit_cti(w.alice, md, cti_fingerprint(to_bytes("x"))); }) ==
        ErrorCode::SchemaViolation);

  w.t.advance_days(31);
  w.t.net->tick();
  CHECK(error_of([&] { w.f.submit(w.alice, "late"); }) == ErrorCode::NotActive);
}

TEST_CASE("envelope contents must be in the store") {
  World w;
  const std::string sid = w.f.submit(w.alice, "s1");
  w.t.net->assign_verifiers(sid);
  const CtiPackage pkg = *w.t.net->exchange().package(sid);
  std::array<PublicKey, 3> pubs;
  for (std::size_t i = 0; i < 3; ++i) pubs[i] = w.t.net->registry().public_key_of(pkg.slots[i].verifier);
  ContentStore elsewhere;
  const EnvelopeSet env = seal(to_bytes("CTI s1 indicators"), pubs,
                               w.t.net->exchange().escrow_public_key(), w.t.rng, elsewhere);
  CHECK(error_of([&] { w.t.net->attach_envelope(w.alice, sid, env); }) ==
        ErrorCode::DanglingContent);
}

TEST_CASE("assign_verifiers") {
  SUBCASE("exactly three eligible") {
    World w(3);
    const auto chosen = w.t.net->assign_verifiers(w.f.submit(w.alice, "s1"));
    CHECK(std::set<AccountId>(chosen.begin(), chosen.end()) ==
          std::set<AccountId>(w.v.begin(), w.v.end()));
  }
  SUBCASE("two eligible") {
    World w(2);
    const std::string sid = w.f.submit(w.alice, "s1");
    CHECK(error_of([&] { w.t.net->assign_verifiers(sid); }) == ErrorCode::InsufficientVerifiers);
  }
  SUBCASE("twice") {
    World w(3);
    const std::string sid = w.f.submit(w.alice, "s1");
    w.t.net->assign_verifiers(sid);
    CHECK(error_of([&] { w.t.net->assign_verifiers(sid); }) == ErrorCode::WrongState);
  }
}

TEST_CASE("a contributor who is also a verifier never verifies their own CTI") {
  World w(3);
  const AccountId both = w.t.onboard("dual", {Role::Contributor, Role::Verifier});
  CHECK(w.t.net->registry().verifier_pool().size() == 4);
  for (int i = 0; i < 1000; ++i) {
    const std::string sid =
        w.f.submit(both, "own" + std::to_string(i), TlpLevel::Green, std::nullopt,
                   to_bytes("self-authored CTI #" + std::to_string(i)));
    const auto chosen = w.t.net->assign_verifiers(sid);
    CHECK(std::find(chosen.begin(), chosen.end(), both) == chosen.end());
  }
}

TEST_CASE("submit_verdict") {
  World w(4);
  const std::string sid = w.f.submit(w.alice, "s1");
  const auto chosen = w.f.assign_and_attach(sid);
  const AccountId outsider =
      *std::find_if(w.v.begin(), w.v.end(), [&](const AccountId& a) {
        return std::find(chosen.begin(), chosen.end(), a) == chosen.end();
      });
  CHECK(error_of([&] { w.f.verdict(sid, outsider, {5, 4, 4}); }) == ErrorCode::NotAssigned);
  CHECK(error_of([&] { w.f.verdict(sid, chosen[0], {6, 4, 4}); }) == ErrorCode::ScoreOutOfRange);
  CHECK(error_of([&] { w.f.verdict(sid, chosen[0], {0, 4, 4}); }) == ErrorCode::ScoreOutOfRange);
  w.f.verdict(sid, chosen[0], {5, 4, 4});
  CHECK(error_of([&] { w.f.verdict(sid, chosen[0], {5, 4, 4}); }) == ErrorCode::DuplicateVerdict);

  // A release that does not open the verifier's copy is refused.
  VerdictInput bad = w.f.verdict_input(sid, chosen[1], {4, 4, 4});
  bad.key_release = wrap_key(SymmetricKey::generate(w.t.rng), w.t.net->exchange().escrow_public_key(), w.t.rng);
  CHECK(error_of([&] { w.t.net->submit_verdict(bad); }) == ErrorCode::DecryptAuthFailure);
  VerdictInput none = w.f.verdict_input(sid, chosen[1], {4, 4, 4});
  none.key_release.reset();
  CHECK(error_of([&] { w.t.net->submit_verdict(none); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("quality decision and discounts") {
  SUBCASE("means 4, 4, 2: accepted") {
    World w;
    const std::string sid = w.f.submit(w.alice, "s1");
    w.f.assign_and_attach(sid);
    CHECK(error_of([&] { w.t.net->finalize_verification(sid); }) == ErrorCode::VerdictsIncomplete);
    w.f.verdicts(sid, {Scores{4, 4, 4}, Scores{5, 4, 3}, Scores{2, 2, 2}});
    const QualityDecision d = w.t.net->finalize_verification(sid);
    CHECK(d.outcome == CtiStatus::Accepted);
    CHECK(d.passes == std::vector<bool>{true, true, false});
    CHECK(balance(w.t, w.alice) == 10);
    for (const auto& v : w.v) CHECK(balance(w.t, v) == 2);
    CHECK(w.t.net->exchange().is_listed(sid));
    CHECK(error_of([&] { w.t.net->finalize_verification(sid); }) == ErrorCode::WrongState);
  }
  SUBCASE("means 2, 2, 5: rejected") {
    World w;
    const std::string sid = w.f.submit(w.alice, "s1");
    w.f.assign_and_attach(sid);
    w.f.verdicts(sid, {Scores{2, 2, 2}, Scores{1, 2, 3}, Scores{5, 5, 5}});
    CHECK(w.t.net->finalize_verification(sid).outcome == CtiStatus::Rejected);
    CHECK(balance(w.t, w.alice) == 0);
    for (const auto& v : w.v) CHECK(balance(w.t, v) == 2);
    CHECK_FALSE(w.t.net->exchange().is_listed(sid));
  }
  SUBCASE("two duplicate flags") {
    World w;
    const std::string sid = w.f.submit(w.alice, "s1");
    w.f.assign_and_attach(sid);
    w.f.verdicts(sid, {Scores{5, 5, 5}, Scores{5, 5, 5}, Scores{5, 5, 5}}, {true, false, true});
    CHECK(w.t.net->finalize_verification(sid).outcome == CtiStatus::Duplicate);
    CHECK(balance(w.t, w.alice) == 0);
    for (const auto& v : w.v) CHECK(balance(w.t, v) == 2);
  }
  SUBCASE("boundary: mean exactly 3.5 passes") {
    ExchangeParams p;
    VerdictRecord at{"a", 0, 4, 4, 3, false, "", "", 0};   // 11/3 > 3.5
    VerdictRecord low{"b", 1, 4, 3, 3, false, "", "", 0};  // 10/3 < 3.5
    CHECK(decide({at, at, low}, p).passes == std::vector<bool>{true, true, false});
    p.pass_mean_milli = 3334;
    CHECK(decide({low}, p).passes == std::vector<bool>{false});
    p.pass_mean_milli = 3333;
    CHECK(decide({low}, p).passes == std::vector<bool>{true});
  }
}

TEST_CASE("discount cap and redemption") {
  World w;
  for (int i = 0; i < 7; ++i) w.accepted("s" + std::to_string(i));
  CHECK(balance(w.t, w.alice) == 50);
  CHECK(w.t.net->registry().amount_due(w.alice, FeeKind::Subscription) == 5000);
  w.t.net->pay_fee(w.alice, FeeKind::Subscription, 5000);
  CHECK(balance(w.t, w.alice) == 0);
  CHECK(balance(w.t, w.v[0]) == 14);
  CHECK(w.t.net->registry().amount_due(w.v[0], FeeKind::Subscription) == 8600);
}

TEST_CASE("automatic duplicate detection by fingerprint") {
  World w;
  const std::string first = w.accepted("s1");
  const Bytes same = w.f.plain.at(first);
  const SubmitResult r =
      w.t.net->submit_cti(w.alice, w.f.metadata("again"), cti_fingerprint(same));
  CHECK(r.status == CtiStatus::Duplicate);
  CHECK(error_of([&] { w.t.net->assign_verifiers(r.submission_id); }) == ErrorCode::WrongState);
  CHECK(cti_fingerprint(same) != crypto::sha256_hex(to_string(same)));
}

TEST_CASE("marketplace") {
  World w;
  const std::string energy = w.accepted("e1");
  json md = w.f.metadata("w1", TlpLevel::White);
  md["industry"] = "water";
  const Bytes p = to_bytes("water CTI");
  const std::string water = w.t.net->submit_cti(w.alice, md, cti_fingerprint(p)).submission_id;
  w.f.plain[water] = p;
  w.f.assign_and_attach(water);
  w.f.verdicts(water, {Scores{4, 4, 4}, Scores{4, 4, 4}, Scores{4, 4, 4}});
  w.t.net->finalize_verification(water);

  auto ids = [](const std::vector<Listing>& ls) {
    std::set<std::string> out;
    for (const auto& l : ls) out.insert(l.submission_id);
    return out;
  };
  const auto& ex = w.t.net->exchange();
  CHECK(ids(ex.list_marketplace(w.bob, ListingFilter::from_map({{"industry", "energy"}}))) ==
        std::set<std::string>{energy});
  CHECK(ids(ex.list_marketplace(w.bob, {})) == std::set<std::string>{energy, water});
  CHECK(ids(ex.list_marketplace(std::nullopt, {})) == std::set<std::string>{water});
  CHECK(ids(ex.list_marketplace(std::nullopt, {}, std::string(kPublicChannel))) ==
        std::set<std::string>{water});
  CHECK(error_of([&] { ListingFilter::from_map({{"vendor", "x"}}); }) == ErrorCode::SchemaViolation);
  for (const auto& l : ex.list_marketplace(w.bob, {})) {
    const std::string dumped = l.to_json().dump();
    CHECK(dumped.find("key") == std::string::npos);
  }

  w.t.advance_days(31);
  w.t.net->tick();
  CHECK(error_of([&] { ex.list_marketplace(w.bob, {}, std::string(kNetworkChannel)); }) ==
        ErrorCode::AccessDenied);
  CHECK(error_of([&] { ex.list_marketplace(w.bob, {}); }) == ErrorCode::AccessDenied);
  CHECK(ids(ex.list_marketplace(w.bob, {}, std::string(kPublicChannel))) ==
        std::set<std::string>{water});
}

TEST_CASE("orders, key delivery and fallback") {
  World w;
  const std::string sid = w.accepted("s1");
  const std::string oid = w.t.net->place_order(w.bob, sid);
  CHECK(w.t.net->exchange().order(oid)->state == OrderState::Placed);
  CHECK(error_of([&] { w.t.net->confirm_decryption(w.bob, oid, true, 4); }) == ErrorCode::WrongState);

  const Delivery d0 = w.t.net->deliver_key(w.bob, oid);
  CHECK(d0.source == "consumer");
  CHECK(w.f.open(w.bob, d0) == w.f.plain.at(sid));
  CHECK(error_of([&] { w.t.net->deliver_key(w.bob, oid); }) == ErrorCode::WrongState);
  CHECK(error_of([&] { w.f.open(w.carol, d0); }) == ErrorCode::UnwrapAuthFailure);

  CHECK(w.t.net->confirm_decryption(w.bob, oid, false, std::nullopt) == OrderState::Failed);
  const Delivery d1 = w.t.net->deliver_key(w.bob, oid);
  CHECK(d1.source == "verifier");
  CHECK(d1.slot == 1);
  CHECK(w.f.open(w.bob, d1) == w.f.plain.at(sid));
  w.t.net->confirm_decryption(w.bob, oid, false, std::nullopt);
  w.f.open(w.bob, w.t.net->deliver_key(w.bob, oid));
  w.t.net->confirm_decryption(w.bob, oid, false, std::nullopt);
  const Delivery d3 = w.t.net->deliver_key(w.bob, oid);
  CHECK(d3.slot == 3);
  CHECK(w.f.open(w.bob, d3) == w.f.plain.at(sid));
  w.t.net->confirm_decryption(w.bob, oid, false, std::nullopt);
  CHECK(error_of([&] { w.t.net->deliver_key(w.bob, oid); }) == ErrorCode::NoKeysRemaining);
  CHECK(w.t.net->exchange().order(oid)->deliveries.size() == 4);
}

TEST_CASE("confirm_decryption") {
  World w;
  const std::string sid = w.accepted("s1");
  const std::string oid = w.t.net->place_order(w.bob, sid);
  w.t.net->deliver_key(w.bob, oid);
  CHECK(error_of([&] { w.t.net->confirm_decryption(w.bob, oid, true, std::nullopt); }) ==
        ErrorCode::MissingRating);
  CHECK(error_of([&] { w.t.net->confirm_decryption(w.carol, oid, true, 4); }) ==
        ErrorCode::AccessDenied);
  CHECK(error_of([&] { w.t.net->confirm_decryption(w.bob, oid, true, 6); }) ==
        ErrorCode::ScoreOutOfRange);
  CHECK(w.t.net->confirm_decryption(w.bob, oid, true, 4) == OrderState::Confirmed);
  CHECK(w.t.net->exchange().order(oid)->rating == 4u);
}

TEST_CASE("place_order preconditions") {
  World w;
  const std::string rejected = w.f.submit(w.alice, "bad");
  w.f.assign_and_attach(rejected);
  w.f.verdicts(rejected, {Scores{1, 1, 1}, Scores{1, 1, 1}, Scores{1, 1, 1}});
  w.t.net->finalize_verification(rejected);
  CHECK(error_of([&] { w.t.net->place_order(w.bob, rejected); }) == ErrorCode::NotListed);

  const std::string red = w.t.net->create_channel(w.alice, TlpLevel::Amber,
                                                  {w.alice, w.v[0], w.v[1], w.v[2]});
  const std::string private_sid = w.accepted("p1", TlpLevel::Amber, red);
  CHECK(error_of([&] { w.t.net->place_order(w.bob, private_sid); }) == ErrorCode::AccessDenied);

  const std::string ok = w.accepted("s2");
  w.t.advance_days(31);
  w.t.net->tick();
  CHECK(error_of([&] { w.t.net->place_order(w.bob, ok); }) == ErrorCode::NotActive);
}

TEST_CASE("crosscheck arithmetic") {
  ExchangeParams p;
  auto verdicts_with_means = [](std::initializer_list<std::uint32_t> means) {
    std::vector<VerdictRecord> out;
    for (auto m : means) out.push_back(VerdictRecord{"v", 0, m, m, m, false, "", "", 0});
    return out;
  };
  const CrossCheck ok = compare_ratings({4, 4, 3}, verdicts_with_means({4, 4, 4}), p);
  CHECK_FALSE(ok.discrepancy);
  CHECK(ok.gap_milli == 333);
  const CrossCheck bad = compare_ratings({1, 1, 2}, verdicts_with_means({5, 5, 5}), p);
  CHECK(bad.discrepancy);
  CHECK(bad.gap_milli == 3667);
  CHECK(error_of([&] { compare_ratings({4, 4}, verdicts_with_means({4, 4, 4}), p); }) ==
        ErrorCode::InsufficientRatings);
  // Exactly at the threshold is not a discrepancy.
  const CrossCheck edge = compare_ratings({2, 2, 2}, verdicts_with_means({5, 3, 2}), p);
  CHECK(edge.gap_milli == 1333);
  CHECK_FALSE(compare_ratings({1, 1, 1}, verdicts_with_means({3, 2, 2}), p).discrepancy);
  CHECK(compare_ratings({1, 1, 1}, verdicts_with_means({3, 3, 2}), p).discrepancy);
}

TEST_CASE("crosscheck on chain") {
  World w;
  const AccountId dave = w.t.onboard("dave", {Role::Consumer});
  const std::string sid = w.f.submit(w.alice, "s1");
  w.f.assign_and_attach(sid);
  w.f.verdicts(sid, {Scores{5, 5, 5}, Scores{5, 5, 5}, Scores{5, 5, 5}});
  w.t.net->finalize_verification(sid);
  const std::uint32_t ratings[] = {1, 1, 2};
  const AccountId consumers[] = {w.bob, w.carol, dave};
  for (int i = 0; i < 3; ++i) {
    if (i == 2) {
      CHECK(error_of([&] { w.t.net->crosscheck_ratings(sid); }) == ErrorCode::InsufficientRatings);
    }
    const std::string oid = w.t.net->place_order(consumers[i], sid);
    w.t.net->deliver_key(consumers[i], oid);
    w.t.net->confirm_decryption(consumers[i], oid, true, ratings[i]);
  }
  const CrossCheck c = w.t.net->crosscheck_ratings(sid);
  CHECK(c.discrepancy);
  CHECK(w.t.net->exchange().to_json().dump().find("crosscheck") != std::string::npos);
}

TEST_CASE("report_to_authority") {
  World w;
  const AccountId op = w.alice;
  auto sealed_report = [&](const std::string& text) {
    Rng r = w.t.rng.fork(text);
    std::array<PublicKey, 3> pubs;
    for (auto& k : pubs) k = gen_keypair(r).public_key;
    return seal(to_bytes(text), pubs, w.t.net->exchange().escrow_public_key(), r, w.t.net->store());
  };
  const EnvelopeSet env = sealed_report("INCIDENT: historian encrypted");
  const ReportReceipt r =
      w.t.net->report_to_authority(op, w.f.metadata("inc", TlpLevel::Red), env, w.t.authority);
  const Channel ch = w.t.net->ledger().channel(r.channel_id);
  CHECK(ch.tlp == TlpLevel::Red);
  CHECK(ch.members == std::set<AccountId>{op, w.t.authority});
  CHECK(error_of([&] { w.t.net->ledger().read(r.channel_id, w.bob); }) == ErrorCode::AccessDenied);
  CHECK(error_of([&] { w.t.net->add_member(r.channel_id, op, w.bob); }) ==
        ErrorCode::MembershipImmutable);

  // The commit timestamp is visible to both parties.
  for (const AccountId& who : {op, w.t.authority}) {
    TxFilter f;
    f.kind = TxKind::ReportToAuthority;
    const auto txs = w.t.net->ledger().read(r.channel_id, who, f);
    REQUIRE(txs.size() == 1);
    CHECK(txs[0].timestamp == r.timestamp);
  }
  CHECK(w.t.net->ledger().verify_chain(r.channel_id));

  // The Authority recovers the plaintext; nobody else gets the key.
  const WrappedKey k = w.t.net->fetch_report_key(w.t.authority, r.report_id);
  const SymmetricKey kc = unwrap_key(k, w.t.authority_keys.secret_key);
  CHECK(to_string(decrypt_object(kc, w.t.net->store().get(env.consumer_copy))) ==
        "INCIDENT: historian encrypted");
  CHECK(error_of([&] { w.t.net->fetch_report_key(w.bob, r.report_id); }) != ErrorCode::Internal);

  const ReportReceipt again = w.t.net->report_to_authority(
      op, w.f.metadata("inc2", TlpLevel::Red), sealed_report("second"), w.t.authority);
  CHECK(again.channel_id == r.channel_id);
  CHECK(error_of([&] {
          w.t.net->report_to_authority(op, w.f.metadata("x", TlpLevel::Red), sealed_report("x"), w.bob);
        }) == ErrorCode::NotAuthority);
  CHECK(error_of([&] {
          w.t.net->report_to_authority(op, w.f.metadata("x", TlpLevel::Amber), sealed_report("y"),
                                       w.t.authority);
        }) == ErrorCode::SchemaViolation);
}

TEST_CASE("verifier timeout: reassignment then forced finalization") {
  World w(6);
  const std::string sid = w.f.submit(w.alice, "slow");
  const auto chosen = w.f.assign_and_attach(sid);
  w.f.verdict(sid, chosen[0], {4, 4, 4});
  w.t.advance_days(8);
  const TickResult r1 = w.t.net->tick();
  CHECK(r1.exchange.reassigned.size() == 2);
  auto pkg = *w.t.net->exchange().package(sid);
  CHECK(pkg.ever_assigned().size() == 5);
  CHECK(error_of([&] { w.f.verdict(sid, chosen[1], {4, 4, 4}); }) == ErrorCode::NotAssigned);

  // The replacement opens kc rewrapped to them and rates.
  const AccountId repl = pkg.slots[1].verifier;
  const SymmetricKey kc = unwrap_key(WrappedKey::from_hex(pkg.slots[1].key_blob),
                                     w.t.keys.at(repl).secret_key);
  CHECK(decrypt_object(kc, w.t.net->store().get(pkg.envelope->consumer_copy)) == w.f.plain.at(sid));
  w.f.verdict(sid, repl, {5, 5, 5});

  for (int round = 0; round < 3; ++round) {
    w.t.advance_days(8);
    w.t.net->tick();
  }
  pkg = *w.t.net->exchange().package(sid);
  CHECK(pkg.forced);
  CHECK(pkg.status == CtiStatus::Accepted);
  CHECK(pkg.verdicts.size() == 2);
}

TEST_CASE("forced finalization with fewer than two verdicts rejects") {
  World w(3);
  const std::string sid = w.f.submit(w.alice, "abandoned");
  w.f.assign_and_attach(sid);
  w.f.verdict(sid, w.t.net->exchange().package(sid)->slots[0].verifier, {5, 5, 5});
  for (int i = 0; i < 5; ++i) {
    w.t.advance_days(8);
    w.t.net->tick();
  }
  const auto pkg = *w.t.net->exchange().package(sid);
  CHECK(pkg.status == CtiStatus::Rejected);
  CHECK(pkg.forced);
}

TEST_CASE("a removed verifier is replaced in open assignments") {
  World w(4);
  const std::string sid = w.f.submit(w.alice, "s1");
  const auto chosen = w.f.assign_and_attach(sid);
  const AccountId bad = chosen[0];
  for (const AccountId& voter : {w.alice, w.bob, w.carol, w.t.authority, w.v[0] == bad ? w.v[1] : w.v[0]}) {
    if (voter != bad) w.t.net->vote_removal(voter, bad, true);
  }
  REQUIRE(w.t.account(bad).state == AccountState::Removed);
  const auto pkg = *w.t.net->exchange().package(sid);
  CHECK_FALSE(pkg.slot_of(bad));
  CHECK(pkg.ever_assigned().contains(bad));
}

TEST_CASE("lifecycle soundness and replay") {
  World w(5, 9);
  Rng rng = Rng::from_u64(99);
  std::vector<std::string> sids;
  for (int i = 0; i < 30; ++i) {
    const std::string sid = w.f.submit(w.alice, "c" + std::to_string(i));
    w.f.assign_and_attach(sid);
    const auto pkg = *w.t.net->exchange().package(sid);
    for (const auto& s : pkg.slots) {
      const Scores sc{static_cast<std::uint32_t>(1 + rng.uniform(5)),
                      static_cast<std::uint32_t>(1 + rng.uniform(5)),
                      static_cast<std::uint32_t>(1 + rng.uniform(5))};
      w.f.verdict(sid, s.verifier, sc, rng.uniform(4) == 0);
    }
    w.t.net->finalize_verification(sid);
    sids.push_back(sid);
  }
  for (const auto& pkg : w.t.net->exchange().packages()) {
    const bool terminal = pkg.status == CtiStatus::Accepted || pkg.status == CtiStatus::Rejected ||
                          pkg.status == CtiStatus::Duplicate;
    CHECK(terminal);
    CHECK((pkg.status == CtiStatus::Accepted) == w.t.net->exchange().is_listed(pkg.submission_id));
  }
  for (const auto& tx : w.t.net->ledger().all_transactions()) {
    const std::string dumped = tx.to_json().dump();
    CHECK(dumped.find("indicators") == std::string::npos);
  }
  w.t.net->flush();
  CHECK(w.t.net->digests() == w.t.net->replay_digests());
  ExchangeState folded;
  for (const auto& tx : w.t.net->ledger().all_transactions()) folded.apply(tx);
  CHECK(folded.digest() == w.t.net->exchange().digest());
}

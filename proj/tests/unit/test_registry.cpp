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

#include "test_net.hpp"

using namespace ctinet;
using ctinet::test::error_of;
using ctinet::test::TestNet;

TEST_CASE("request_account") {
  TestNet t;
  const AccountId a = t.request("alice", {Role::Contributor});
  CHECK(t.account(a).state == AccountState::Pending);
  CHECK(error_of([&] { t.request("bob", {Role::Consumer}, ""); }) == ErrorCode::MissingDocuments);
  CHECK(error_of([&] { t.request("alice", {Role::Consumer}); }) == ErrorCode::DuplicateUsername);
  CHECK(error_of([&] { t.request("carol", {}); }) != ErrorCode::Internal);
  CHECK(t.net->registry().pending() == std::vector<AccountId>{a});

  // The Register tx carries the id and roles but never the documents.
  const auto txs = t.net->ledger().transactions(std::string(kNetworkChannel));
  const std::string dumped = txs.back().to_json().dump();
  CHECK(txs.back().kind == TxKind::Register);
  CHECK(dumped.find(a) != std::string::npos);
  CHECK(dumped.find("passport") == std::string::npos);
}

TEST_CASE("authority_verify") {
  TestNet t;
  const AccountId a = t.request("alice", {Role::Contributor});
  const AccountId b = t.request("bob", {Role::Consumer});
  CHECK(error_of([&] { t.net->authority_verify(b, a, true); }) == ErrorCode::NotAuthority);
  CHECK(t.net->authority_verify(t.authority, a, true) == AccountState::Verified);
  CHECK(t.net->authority_verify(t.authority, b, false) == AccountState::Removed);
  t.net->pay_fee(a, FeeKind::Registration, 15000);
  CHECK(t.account(a).state == AccountState::Active);
  CHECK(error_of([&] { t.net->authority_verify(t.authority, a, true); }) == ErrorCode::WrongState);
}

TEST_CASE("certify_verifier") {
  TestNet t;
  const AccountId v = t.onboard("val", {Role::Consumer});
  const AccountId other = t.onboard("oscar", {Role::Consumer});
  CHECK_FALSE(t.account(v).has_role(Role::Verifier));
  CHECK(error_of([&] { t.net->certify_verifier(t.authority, v, Bytes{}); }) ==
        ErrorCode::MissingCredentials);
  CHECK(error_of([&] { t.net->certify_verifier(v, v, to_bytes("self")); }) ==
        ErrorCode::NotAuthority);
  CHECK(error_of([&] { t.net->certify_verifier(other, v, to_bytes("x")); }) ==
        ErrorCode::NotAuthority);
  const std::string cert = t.net->certify_verifier(t.authority, v, to_bytes("ics-cert-991"));
  CHECK_FALSE(cert.empty());
  CHECK(t.account(v).has_role(Role::Verifier));
  CHECK(t.account(v).verifier_cert == cert);
  CHECK(t.net->registry().verifier_pool() == std::vector<AccountId>{v});
  const AccountId pending = t.request("pat", {Role::Verifier});
  CHECK(error_of([&] { t.net->certify_verifier(t.authority, pending, to_bytes("x")); }) ==
        ErrorCode::WrongState);
}

TEST_CASE("pay_fee arithmetic") {
  TestNet t;
  const AccountId a = t.request("alice", {Role::Contributor});
  CHECK(error_of([&] { t.net->pay_fee(a, FeeKind::Registration, 15000); }) ==
        ErrorCode::WrongState);
  t.net->authority_verify(t.authority, a, true);
  CHECK(t.net->registry().amount_due(a, FeeKind::Registration) == 15000);
  CHECK(error_of([&] { t.net->pay_fee(a, FeeKind::Registration, 5000); }) ==
        ErrorCode::WrongAmount);
  t.net->pay_fee(a, FeeKind::Registration, 15000);
  CHECK(t.account(a).subscription_expiry == test::kStart + 30 * kSecondsPerDay);
  CHECK(error_of([&] { t.net->pay_fee(a, FeeKind::Registration, 15000); }) ==
        ErrorCode::WrongState);

  CHECK(t.net->registry().amount_due(a, FeeKind::Subscription) == 10000);
  t.net->pay_fee(a, FeeKind::Subscription, 10000);
  CHECK(t.account(a).subscription_expiry == test::kStart + 60 * kSecondsPerDay);
}

TEST_CASE("discounts reduce the next subscription and then reset") {
  CHECK(discounted_fee(10000, 0) == 10000);
  CHECK(discounted_fee(10000, 10) == 9000);
  CHECK(discounted_fee(10000, 50) == 5000);
  CHECK(discounted_fee(333, 10) == 300);  // 299.7 rounds half up
  CHECK(discounted_fee(5, 10) == 5);      // 4.5 -> 5

  // Balances are credited by finalization; see the exchange tests.
  TestNet t;
  const AccountId a = t.onboard("alice", {Role::Contributor});
  CHECK(t.account(a).discount_balance == 0);
  CHECK(error_of([&] { t.net->pay_fee(a, FeeKind::Subscription, 5000); }) ==
        ErrorCode::WrongAmount);
}

TEST_CASE("lapse_check") {
  TestNet t;
  const AccountId a = t.onboard("alice", {Role::Consumer});
  *t.now = test::kStart;
  const AccountId b = t.onboard("bob", {Role::Consumer});
  // a and b expire at day 30; move b's expiry out by paying early.
  t.net->pay_fee(b, FeeKind::Subscription, 10000);
  t.advance_days(31);  // a expired yesterday
  auto r = t.net->tick();
  CHECK(r.lapsed == std::vector<AccountId>{a});
  CHECK(t.account(a).state == AccountState::Lapsed);
  CHECK(t.account(b).state == AccountState::Active);
  CHECK(t.net->ledger().check_access(a, std::string(kNetworkChannel), AccessMode::Read).reason ==
        DenyReason::SubscriptionLapsed);
  CHECK(t.net->ledger().check_access(a, std::string(kPublicChannel), AccessMode::Read).allowed);

  t.advance_days(28);  // b expires tomorrow (day 60)
  CHECK(t.net->tick().lapsed.empty());
  CHECK(t.account(b).state == AccountState::Active);

  t.net->pay_fee(a, FeeKind::Subscription, 10000);
  CHECK(t.account(a).state == AccountState::Active);
  CHECK(t.account(a).subscription_expiry == *t.now + 30 * kSecondsPerDay);
}

TEST_CASE("vote_removal") {
  TestNet t;
  // authority + 4 accounts = 5 active
  const AccountId a = t.onboard("a", {Role::Consumer});
  const AccountId b = t.onboard("b", {Role::Consumer});
  const AccountId c = t.onboard("c", {Role::Consumer});
  const AccountId target = t.onboard("target", {Role::Contributor});
  CHECK(error_of([&] { t.net->vote_removal(target, target, true); }) == ErrorCode::SelfVote);
  auto tally = t.net->vote_removal(a, target, true);
  CHECK(tally.active_count == 5);
  CHECK_FALSE(tally.removed);
  CHECK(error_of([&] { t.net->vote_removal(a, target, true); }) == ErrorCode::DuplicateVote);
  tally = t.net->vote_removal(b, target, false);
  CHECK(tally.keep_votes == 1);
  tally = t.net->vote_removal(c, target, true);
  CHECK_FALSE(tally.removed);  // 2 of 5
  tally = t.net->vote_removal(t.authority, target, true);
  CHECK(tally.remove_votes == 3);
  CHECK(tally.removed);
  CHECK(t.account(target).state == AccountState::Removed);
  CHECK(t.net->ledger().check_access(target, std::string(kNetworkChannel), AccessMode::Read)
            .reason == DenyReason::AccountRemoved);

  // Removed is terminal.
  CHECK(error_of([&] { t.net->pay_fee(target, FeeKind::Subscription, 10000); }) ==
        ErrorCode::WrongState);
  CHECK(error_of([&] { t.net->vote_removal(target, a, true); }) == ErrorCode::NotActive);
  CHECK(error_of([&] { t.net->authority_verify(t.authority, target, true); }) ==
        ErrorCode::WrongState);

  // The Authority is neither removable nor charged.
  CHECK(error_of([&] { t.net->vote_removal(a, t.authority, true); }) == ErrorCode::WrongState);
  CHECK(t.account(t.authority).fee_exempt);

  t.advance_days(90);
  t.net->tick();
  CHECK(t.account(target).state == AccountState::Removed);
  CHECK(t.account(t.authority).state == AccountState::Active);

}

TEST_CASE("lapsed voters cannot vote") {
  TestNet t;
  const AccountId a = t.onboard("a", {Role::Consumer});
  const AccountId b = t.onboard("b", {Role::Consumer});
  t.advance_days(31);
  t.net->tick();
  CHECK(error_of([&] { t.net->vote_removal(a, b, true); }) == ErrorCode::NotActive);
}

TEST_CASE("sybil_cost") {
  FeeSchedule s;
  CHECK(sybil_cost(0, s, 1) == 0);
  s.registration_fee = 5000;
  s.subscription_fee = 10000;
  CHECK(sybil_cost(1, s, 0) == 5000);
  CHECK(sybil_cost(10, s, 12) == 1250000);
  for (std::int64_t n = 1; n <= 100; ++n) {
    CHECK(sybil_cost(n, s, 1) - sybil_cost(n - 1, s, 1) == 15000);
  }
}

TEST_CASE("fee schedule validation") {
  FeeSchedule s;
  CHECK_NOTHROW(s.validate());
  s.discount_cap = 101;
  CHECK(error_of([&] { s.validate(); }) == ErrorCode::ConfigInvalid);
  s.discount_cap = 50;
  s.registration_fee = -1;
  CHECK(error_of([&] { s.validate(); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("identity stays with the Authority") {
  TestNet t;
  const std::string docs = "passport:ZX-0042-SECRET;business-reg:grid-co";
  const AccountId a = t.request("alice", {Role::Contributor}, docs);
  const AccountId b = t.onboard("bob", {Role::Consumer});
  for (const auto& acct : t.net->registry().accounts()) {
    CHECK(acct.to_json(false).dump().find("ZX-0042") == std::string::npos);
  }
  for (const auto& tx : t.net->ledger().all_transactions()) {
    CHECK(tx.to_json().dump().find("ZX-0042") == std::string::npos);
  }
  const Bytes sealed = t.net->registry().identity_record(t.authority, a);
  CHECK(to_string(open_sealed(t.authority_keys.secret_key, sealed)) == docs);
  CHECK(error_of([&] { t.net->registry().identity_record(b, a); }) == ErrorCode::NotAuthority);
  CHECK_THROWS_AS(open_sealed(t.keys[b].secret_key, sealed), Error);
}

TEST_CASE("registry state is a fold over the chain") {
  TestNet t;
  t.onboard("a", {Role::Consumer});
  t.onboard("v", {Role::Verifier});
  t.request("p", {Role::Contributor});
  t.advance_days(40);
  t.net->tick();
  t.net->flush();
  const StateDigests live = t.net->digests();
  const StateDigests replay = t.net->replay_digests();
  CHECK(live == replay);

  RegistryState folded;
  for (const auto& tx : t.net->ledger().all_transactions()) folded.apply(tx);
  CHECK(folded.digest() == t.net->registry().digest());
}

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

// Randomized protocol driver. Ops are drawn from a weighted menu, mostly
// well-formed with a share of deliberately bad inputs. Rejections are
// expected; what must never happen is a broken invariant.

#include <algorithm>

#include "ctinet/simnet.hpp"

namespace ctinet::sim {

namespace {

using nlohmann::json;

constexpr std::string_view kDocMarker = "IDDOC-SECRET-";
constexpr std::string_view kPlainMarker = "CTI-SECRET-";

std::vector<std::pair<std::string, std::vector<Role>>> fuzz_actors() {
  std::vector<std::pair<std::string, std::vector<Role>>> a;
  a.push_back({"auth", {Role::Authority}});
  for (int i = 0; i < 4; ++i) {
    a.push_back({"c" + std::to_string(i), {Role::Contributor, Role::Consumer}});
  }
  for (int i = 0; i < 7; ++i) {
    a.push_back({"v" + std::to_string(i), {Role::Verifier, Role::Contributor, Role::Consumer}});
  }
  for (int i = 0; i < 2; ++i) a.push_back({"u" + std::to_string(i), {Role::Consumer}});
  a.push_back({"x0", {Role::Contributor, Role::Consumer}});
  a.push_back({"x1", {Role::Verifier, Role::Consumer}});
  a.push_back({"x2", {Role::Insurer}});
  a.push_back({"x3", {Role::Analytics, Role::Consumer}});
  a.push_back({"x4", {Role::IndustryCert, Role::Consumer}});
  return a;
}

class Fuzzer {
 public:
  Fuzzer(std::uint64_t seed, const FuzzOptions& options)
      : options_(options),
        choice_(Rng::from_u64(seed).fork("fuzz/choices")),
        sim_(seed, NetworkConfig{}, 3, fuzz_actors()) {
    report_.seed = seed;
    for (const auto& [name, a] : sim_.actors()) {
      names_.push_back(name);
      if (name != "auth" && name[0] != 'x') {
        sim_.onboard(name, std::string(kDocMarker) + name);
      }
    }
  }

  FuzzReport run(std::size_t n_ops);

 private:
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : choice_.uniform(n); }
  bool chance(std::uint64_t percent) { return below(100) < percent; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  const std::string& any_actor() { return pick(names_); }
  AccountId id(const std::string& name) const { return sim_.id_of(name); }

  std::string step();
  void check(bool final_check = false);
  void violation(const std::string& what) {
    if (report_.success) {
      report_.success = false;
      report_.violation = what;
    }
  }
  void tamper();

  std::vector<CtiPackage> packages_in(CtiStatus status) const {
    std::vector<CtiPackage> out;
    for (auto& p : sim_.net().exchange().packages()) {
      if (p.status == status) out.push_back(p);
    }
    return out;
  }

  FuzzOptions options_;
  Rng choice_;
  SimNetwork sim_;
  FuzzReport report_;
  std::vector<std::string> names_;
  std::vector<std::string> channels_;
  std::set<AccountId> removed_;
  std::size_t scanned_txs_ = 0;
  std::uint64_t plain_counter_ = 0;
};

std::string Fuzzer::step() {
  Network& net = sim_.net();
  const Exchange& ex = net.exchange();
  const Registry& reg = net.registry();
  switch (below(20)) {
    case 0: {
      const std::string& n = any_actor();
      sim_.register_actor(n, std::nullopt, std::string(kDocMarker) + n);
      return "register";
    }
    case 1: {
      const auto pending = reg.pending();
      const AccountId target = pending.empty() ? id(any_actor()) : pick(pending);
      const std::string& actor = chance(90) ? std::string("auth") : any_actor();
      net.authority_verify(id(actor), target, chance(85));
      return "authority_verify";
    }
    case 2: {
      // Mostly renew whoever is about to lose access, so the network stays busy.
      std::vector<AccountId> due;
      for (const auto& acct : reg.accounts()) {
        const auto st = reg.standing(acct.account_id);
        if (st == AccessView::Standing::Verified || st == AccessView::Standing::Lapsed ||
            (st == AccessView::Standing::Active && !acct.fee_exempt &&
             acct.subscription_expiry - net.now() < 7 * kSecondsPerDay)) {
          due.push_back(acct.account_id);
        }
      }
      const AccountId a = !due.empty() && chance(80) ? pick(due) : id(any_actor());
      const auto acct = reg.account(a);
      FeeKind kind = acct && acct->state == AccountState::Verified ? FeeKind::Registration
                                                                    : FeeKind::Subscription;
      if (chance(10)) kind = kind == FeeKind::Registration ? FeeKind::Subscription
                                                           : FeeKind::Registration;
      std::int64_t amount = reg.amount_due(a, kind);
      if (chance(10)) amount += 1;
      net.pay_fee(a, kind, amount);
      return "pay_fee";
    }
    case 3: {
      const std::string& n = any_actor();
      json meta = SimNetwork::default_metadata("fuzz", chance(80) ? TlpLevel::Green
                                                                  : TlpLevel::White);
      std::optional<std::string> channel;
      if (chance(20) && !channels_.empty()) {
        channel = pick(channels_);
        meta["tlp"] = std::string(to_string(net.ledger().channel(*channel).tlp));
      }
      if (chance(5)) meta["anonymized"] = false;
      Bytes plaintext;
      const auto accepted = packages_in(CtiStatus::Accepted);
      if (chance(10) && !accepted.empty()) {
        plaintext = sim_.plaintext_of(pick(accepted).submission_id);
      } else {
        plaintext = to_bytes(std::string(kPlainMarker) + std::to_string(plain_counter_++));
        const Bytes noise = choice_.bytes(16 + below(48));
        plaintext.insert(plaintext.end(), noise.begin(), noise.end());
      }
      sim_.submit(n, meta, plaintext, channel);
      return "submit_cti";
    }
    case 4: {
      const auto subs = packages_in(CtiStatus::Submitted);
      if (subs.empty()) return "noop";
      net.assign_verifiers(pick(subs).submission_id);
      return "assign_verifiers";
    }
    case 5: {
      std::vector<CtiPackage> open;
      for (auto& p : packages_in(CtiStatus::UnderVerification)) {
        if (!p.envelope) open.push_back(p);
      }
      if (open.empty()) return "noop";
      const CtiPackage& p = pick(open);
      const std::string who = chance(90) ? sim_.name_of(p.contributor) : any_actor();
      sim_.attach(who, p.submission_id, chance(3));
      return "attach_envelope";
    }
    case 6:
    case 7: {
      std::vector<CtiPackage> open;
      for (auto& p : packages_in(CtiStatus::UnderVerification)) {
        if (p.envelope) open.push_back(p);
      }
      if (open.empty()) return "noop";
      const CtiPackage& p = pick(open);
      std::string who = sim_.name_of(pick(p.slots).verifier);
      if (chance(5)) who = any_actor();
      std::array<std::uint32_t, 3> scores{};
      for (auto& s : scores) s = static_cast<std::uint32_t>(1 + below(chance(3) ? 7 : 5));
      const Release release = chance(4) ? Release::Wrong : Release::Valid;
      sim_.verdict(who, p.submission_id, scores, chance(5), "fuzz report", release);
      return "submit_verdict";
    }
    case 8: {
      const auto under = packages_in(CtiStatus::UnderVerification);
      if (under.empty()) return "noop";
      net.finalize_verification(pick(under).submission_id);
      return "finalize";
    }
    case 9: {
      const auto accepted = packages_in(CtiStatus::Accepted);
      if (accepted.empty()) return "noop";
      net.place_order(id(any_actor()), pick(accepted).submission_id);
      return "place_order";
    }
    case 10: {
      const auto orders = ex.orders();
      if (orders.empty()) return "noop";
      const Order& o = pick(orders);
      if (chance(5)) {
        net.deliver_key(id(any_actor()), o.order_id);
      } else {
        sim_.deliver_and_open(o.order_id);
      }
      return "deliver_key";
    }
    case 11: {
      const auto orders = ex.orders();
      if (orders.empty()) return "noop";
      const Order& o = pick(orders);
      const bool ok = chance(85);
      std::optional<std::uint32_t> rating;
      if (ok || chance(30)) rating = static_cast<std::uint32_t>(1 + below(5));
      net.confirm_decryption(o.consumer, o.order_id, ok, rating);
      return "confirm";
    }
    case 12: {
      const auto accepted = packages_in(CtiStatus::Accepted);
      if (accepted.empty()) return "noop";
      net.crosscheck_ratings(pick(accepted).submission_id);
      return "crosscheck";
    }
    case 13: {
      sim_.advance(static_cast<std::int64_t>(below(4 * kSecondsPerDay)));
      return "tick";
    }
    case 14: {
      if (!chance(25)) return "noop";
      net.vote_removal(id(any_actor()), id(any_actor()), chance(50));
      return "vote_removal";
    }
    case 15: {
      const std::string& creator = any_actor();
      std::set<AccountId> members{id(creator)};
      for (std::uint64_t i = 0, n = 1 + below(4); i < n; ++i) members.insert(id(any_actor()));
      const TlpLevel tlp = chance(70) ? TlpLevel::Amber : TlpLevel::Red;
      channels_.push_back(net.create_channel(id(creator), tlp, members));
      return "create_channel";
    }
    case 16: {
      if (channels_.empty()) return "noop";
      net.add_member(pick(channels_), id(any_actor()), id(any_actor()));
      return "add_member";
    }
    case 17: {
      std::vector<std::string> all = net.ledger().channel_ids();
      const std::string& ch = pick(all);
      const std::string& who = any_actor();
      const Principal p = chance(10) ? Principal{} : Principal{id(who)};
      const AccessDecision d = net.ledger().check_access(p, ch, AccessMode::Read);
      const Channel info = net.ledger().channel(ch);
      if (d.allowed && (info.tlp == TlpLevel::Red || info.tlp == TlpLevel::Amber) &&
          (!p || !info.members.contains(*p))) {
        violation("non-member granted read on " + ch);
      }
      net.ledger().read(ch, p);
      return "read";
    }
    case 18: {
      const std::string& who = any_actor();
      json meta = SimNetwork::default_metadata("incident", chance(90) ? TlpLevel::Red
                                                                      : TlpLevel::Amber);
      Bytes plaintext = to_bytes(std::string(kPlainMarker) + "report-" +
                                 std::to_string(plain_counter_++));
      sim_.report(who, "auth", meta, plaintext);
      return "report_to_authority";
    }
    default: {
      std::vector<std::string> all = net.ledger().channel_ids();
      const TxKind kind = all_tx_kinds()[below(kTxKindCount)];
      json body = chance(50) ? json::object() : json{{"junk", choice_.next_u64()}};
      net.submit_tx(pick(all), TxDraft{kind, id(any_actor()), body});
      return "submit_tx";
    }
  }
}

void Fuzzer::check(bool final_check) {
  ++report_.checks;
  Network& net = sim_.net();
  const Ledger& ledger = net.ledger();
  if (!ledger.verify_all()) {
    violation("chain integrity: a channel failed verification");
    return;
  }
  // The persisted-format round trip is slower; run it on the final check.
  for (const auto& ch : final_check ? ledger.channel_ids() : std::vector<std::string>{}) {
    if (!verify_records(ledger.export_records(ch))) {
      violation("chain integrity: exported records of " + ch + " failed verification");
      return;
    }
  }
  const auto cap = net.registry().fees().discount_cap;
  for (const auto& a : net.registry().accounts()) {
    if (a.discount_balance > cap) violation("discount above cap for " + a.account_id);
    if (removed_.contains(a.account_id) && a.state != AccountState::Removed) {
      violation("removed account came back: " + a.account_id);
    }
    if (a.state == AccountState::Removed) removed_.insert(a.account_id);
    if (a.to_json(false).dump().find(kDocMarker) != std::string::npos) {
      violation("identity material in the public account view");
    }
  }
  for (const auto& p : net.exchange().packages()) {
    if ((p.status == CtiStatus::Accepted) != net.exchange().is_listed(p.submission_id)) {
      violation("listing does not match status for " + p.submission_id);
    }
  }
  for (const auto& o : net.exchange().orders()) {
    if (o.deliveries.size() > kVerifierCount + 1) violation("too many deliveries on " + o.order_id);
  }
  const auto txs = ledger.all_transactions();
  for (std::size_t i = scanned_txs_; i < txs.size(); ++i) {
    const std::string dump = txs[i].to_json().dump();
    if (dump.find(kDocMarker) != std::string::npos ||
        dump.find(kPlainMarker) != std::string::npos) {
      violation("plaintext marker found in tx " + txs[i].tx_id);
    }
  }
  scanned_txs_ = txs.size();
}

void Fuzzer::tamper() {
  Ledger& ledger = sim_.net().ledger();
  std::vector<std::string> nonempty;
  for (const auto& ch : ledger.channel_ids()) {
    if (ledger.height(ch) > 0) nonempty.push_back(ch);
  }
  const std::string& ch = pick(nonempty);
  Block& b = ledger.mutable_block_for_testing(ch, below(ledger.height(ch)));
  std::string& actor = b.txs[below(b.txs.size())].actor;
  actor[below(actor.size())] ^= 0x01;
}

FuzzReport Fuzzer::run(std::size_t n_ops) {
  for (std::size_t i = 0; i < n_ops && report_.success; ++i) {
    std::string op = "rejected";
    try {
      op = step();
      ++report_.accepted;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvariantViolation) {
        violation(e.what());
      }
      ++report_.rejected;
      ++report_.errors[std::string(to_string(e.code()))];
    } catch (const std::exception& e) {
      violation(std::string("unexpected exception: ") + e.what());
    }
    ++report_.by_op[op];
    ++report_.ops;
    if (options_.tamper_after && *options_.tamper_after == i) tamper();
    if (options_.check_every && (i + 1) % options_.check_every == 0) check();
  }
  if (report_.success) check(true);
  Network& net = sim_.net();
  net.flush();
  report_.digests = net.digests();
  if (report_.success && !(report_.digests == net.replay_digests())) {
    violation("replayed state differs from live state");
  }
  if (options_.on_finish) options_.on_finish(net);
  return report_;
}

}  // namespace

json FuzzReport::to_json() const {
  return json{{"seed", seed},       {"ops", ops},         {"accepted", accepted},
              {"rejected", rejected}, {"checks", checks}, {"by_op", by_op},
              {"errors", errors},   {"success", success}, {"violation", violation},
              {"digests", digests.to_json()}};
}

FuzzReport fuzz_protocol(std::uint64_t seed, std::size_t n_ops, const FuzzOptions& options) {
  return Fuzzer(seed, options).run(n_ops);
}

}  // namespace ctinet::sim

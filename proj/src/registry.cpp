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

#include "ctinet/registry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <mutex>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 7> kRoleNames{
    "Consumer", "Contributor", "Authority", "Insurer",
    "IndustryCert", "Verifier", "Analytics"};

constexpr std::array<std::string_view, 5> kStateNames{
    "Pending", "Verified", "Active", "Lapsed", "Removed"};

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

json role_list(const std::set<Role>& roles) {
  json out = json::array();
  for (Role r : roles) out.push_back(to_string(r));
  return out;
}

std::set<Role> parse_roles(const json& list) {
  std::set<Role> out;
  for (const auto& item : list) {
    auto r = role_from_string(item.get<std::string>());
    if (!r) fail(ErrorCode::SchemaViolation, "unknown role " + item.dump());
    out.insert(*r);
  }
  return out;
}

}  // namespace

std::string_view to_string(Role role) {
  return kRoleNames[static_cast<std::size_t>(role)];
}

std::optional<Role> role_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
    if (kRoleNames[i] == name) return static_cast<Role>(i);
  }
  return std::nullopt;
}

std::string_view to_string(AccountState state) {
  return kStateNames[static_cast<std::size_t>(state)];
}

std::string_view to_string(FeeKind kind) {
  return kind == FeeKind::Registration ? "registration" : "subscription";
}

std::optional<FeeKind> fee_kind_from_string(std::string_view name) {
  if (name == "registration") return FeeKind::Registration;
  if (name == "subscription") return FeeKind::Subscription;
  return std::nullopt;
}

void FeeSchedule::validate() const {
  if (registration_fee < 0 || subscription_fee < 0 || period_seconds <= 0) {
    fail(ErrorCode::ConfigInvalid, "fees must be non-negative and the period positive");
  }
  if (discount_cap > 100 || contributor_discount > 100 || verifier_discount > 100) {
    fail(ErrorCode::ConfigInvalid, "discounts are percentage points in [0, 100]");
  }
}

std::int64_t sybil_cost(std::int64_t n, const FeeSchedule& schedule,
                        std::int64_t periods) {
  if (n < 0 || periods < 0) fail(ErrorCode::SchemaViolation, "n and periods must be >= 0");
  return n * (schedule.registration_fee + periods * schedule.subscription_fee);
}

std::int64_t discounted_fee(std::int64_t fee, std::uint32_t discount) {
  const std::int64_t pct = 100 - static_cast<std::int64_t>(std::min<std::uint32_t>(discount, 100));
  return (fee * pct + 50) / 100;
}

AccountId derive_account_id(std::string_view username) {
  return "acct-" +
         crypto::sha256_hex("ctinet/account/v1|" + std::string(username)).substr(0, 20);
}

json Account::to_json(bool with_identity) const {
  json j{{"account_id", account_id},
         {"username", username},
         {"roles", role_list(roles)},
         {"requested_roles", role_list(requested_roles)},
         {"public_key", public_key},
         {"state", to_string(state)},
         {"subscription_expiry", subscription_expiry},
         {"discount_balance", discount_balance},
         {"verifier_cert", verifier_cert},
         {"fee_exempt", fee_exempt},
         {"registered_at", registered_at}};
  if (with_identity) j["identity"] = identity;
  return j;
}

// --- RegistryState -------------------------------------------------------

void RegistryState::apply(const Transaction& tx) {
  const json& b = tx.body;
  switch (tx.kind) {
    case TxKind::Register: {
      const std::string op = b.at("op").get<std::string>();
      const AccountId id = b.at("account_id").get<std::string>();
      if (op == "request" || op == "bootstrap") {
        Account a;
        a.account_id = id;
        a.username = b.at("username").get<std::string>();
        a.roles = parse_roles(b.at("roles"));
        a.public_key = b.at("public_key").get<std::string>();
        a.registered_at = tx.wall_time;
        if (op == "request") {
          a.requested_roles = parse_roles(b.at("requested_roles"));
          a.identity = b.at("identity").get<std::string>();
        } else {
          a.state = AccountState::Active;
          a.fee_exempt = true;
          a.subscription_expiry = kNever;
        }
        by_username_[a.username] = id;
        accounts_[id] = std::move(a);
      } else if (op == "decision") {
        accounts_.at(id).state = b.at("decision").get<std::string>() == "approve"
                                     ? AccountState::Verified
                                     : AccountState::Removed;
      } else if (op == "lapse") {
        accounts_.at(id).state = AccountState::Lapsed;
      }
      break;
    }
    case TxKind::CertifyVerifier: {
      Account& a = accounts_.at(b.at("account_id").get<std::string>());
      a.roles.insert(Role::Verifier);
      a.requested_roles.erase(Role::Verifier);
      a.verifier_cert = b.at("cert_id").get<std::string>();
      break;
    }
    case TxKind::PayFee: {
      Account& a = accounts_.at(b.at("account_id").get<std::string>());
      a.state = AccountState::Active;
      a.subscription_expiry = b.at("expiry").get<std::int64_t>();
      a.discount_balance = 0;
      break;
    }
    case TxKind::IssueDiscount: {
      accounts_.at(b.at("recipient").get<std::string>()).discount_balance =
          b.at("balance_after").get<std::uint32_t>();
      break;
    }
    case TxKind::VoteRemoval: {
      const AccountId target = b.at("target").get<std::string>();
      votes_[target][tx.actor] = b.at("vote").get<std::string>();
      if (b.at("removed").get<bool>()) accounts_.at(target).state = AccountState::Removed;
      break;
    }
    default:
      break;
  }
}

const Account* RegistryState::find(const AccountId& id) const {
  auto it = accounts_.find(id);
  return it == accounts_.end() ? nullptr : &it->second;
}

const Account* RegistryState::find_by_username(const std::string& username) const {
  auto it = by_username_.find(username);
  return it == by_username_.end() ? nullptr : find(it->second);
}

std::uint64_t RegistryState::count_in(AccountState state) const {
  return static_cast<std::uint64_t>(std::count_if(
      accounts_.begin(), accounts_.end(),
      [state](const auto& kv) { return kv.second.state == state; }));
}

json RegistryState::to_json() const {
  json accounts = json::object();
  for (const auto& [id, a] : accounts_) accounts[id] = a.to_json(true);
  json votes = json::object();
  for (const auto& [target, ballots] : votes_) votes[target] = ballots;
  return json{{"accounts", accounts}, {"votes", votes}};
}

std::string RegistryState::digest() const { return crypto::sha256_hex(to_json().dump()); }

// --- Registry ------------------------------------------------------------

Registry::Registry(Ledger& ledger, ContentStore& store, FeeSchedule fees,
                   PublicKey authority_key)
    : ledger_(ledger), store_(store), fees_(fees), authority_key_(authority_key) {
  fees_.validate();
}

void Registry::apply(const Transaction& tx) {
  std::unique_lock lock(mu_);
  state_.apply(tx);
}

AccessView::Standing Registry::standing(const AccountId& account) const {
  std::shared_lock lock(mu_);
  const Account* a = state_.find(account);
  if (a == nullptr) return Standing::Unknown;
  switch (a->state) {
    case AccountState::Pending: return Standing::Pending;
    case AccountState::Verified: return Standing::Verified;
    case AccountState::Lapsed: return Standing::Lapsed;
    case AccountState::Removed: return Standing::Removed;
    case AccountState::Active:
      // A subscription that ran out is lapsed even before lapse_check
      // records it.
      if (!a->fee_exempt && a->subscription_expiry < ledger_.now()) return Standing::Lapsed;
      return Standing::Active;
  }
  return Standing::Unknown;
}

Account Registry::require(const AccountId& id) const {
  std::shared_lock lock(mu_);
  const Account* a = state_.find(id);
  if (a == nullptr) fail(ErrorCode::NotRegistered, "no account " + id);
  return *a;
}

void Registry::require_authority(const AccountId& id) const {
  std::shared_lock lock(mu_);
  const Account* a = state_.find(id);
  if (a == nullptr || !a->has_role(Role::Authority) || a->state != AccountState::Active) {
    fail(ErrorCode::NotAuthority, id + " does not hold the Authority role");
  }
}

AccountId Registry::bootstrap_authority(const std::string& username,
                                        const PublicKey& public_key) {
  if (username.empty()) fail(ErrorCode::SchemaViolation, "username is empty");
  if (account_by_username(username)) {
    fail(ErrorCode::DuplicateUsername, "username " + username + " is taken");
  }
  const AccountId id = derive_account_id(username);
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::Register, std::string(kSystemActor),
                         json{{"op", "bootstrap"},
                              {"account_id", id},
                              {"username", username},
                              {"roles", json::array({"Authority"})},
                              {"public_key", public_key.hex()}}});
  return id;
}

AccountId Registry::request_account(const RegistrationRequest& request, Rng& rng) {
  if (request.id_docs.empty()) fail(ErrorCode::MissingDocuments, "identity documents are required");
  if (request.username.empty()) fail(ErrorCode::SchemaViolation, "username is empty");
  if (request.claimed_roles.empty()) fail(ErrorCode::SchemaViolation, "at least one role is required");
  std::set<Role> roles;
  std::set<Role> requested;
  for (Role r : request.claimed_roles) {
    if (r == Role::Authority) {
      fail(ErrorCode::NotAuthority, "the Authority role cannot be self-claimed");
    }
    (r == Role::Verifier ? requested : roles).insert(r);
  }
  if (account_by_username(request.username)) {
    fail(ErrorCode::DuplicateUsername, "username " + request.username + " is taken");
  }
  const AccountId id = derive_account_id(request.username);
  const ContentId sealed = store_.put(seal_to(authority_key_, request.id_docs, rng));
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::Register, id,
                         json{{"op", "request"},
                              {"account_id", id},
                              {"username", request.username},
                              {"roles", role_list(roles)},
                              {"requested_roles", role_list(requested)},
                              {"public_key", request.public_key.hex()},
                              {"identity", sealed.str()}}});
  return id;
}

AccountState Registry::authority_verify(const AccountId& authority,
                                        const AccountId& account, bool approve) {
  require_authority(authority);
  const Account a = require(account);
  if (a.state != AccountState::Pending) {
    fail(ErrorCode::WrongState, account + " is " + std::string(to_string(a.state)) +
                                    ", not Pending");
  }
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::Register, authority,
                         json{{"op", "decision"},
                              {"account_id", account},
                              {"decision", approve ? "approve" : "reject"}}});
  return approve ? AccountState::Verified : AccountState::Removed;
}

std::string Registry::certify_verifier(const AccountId& authority,
                                       const AccountId& account, ByteView credentials) {
  require_authority(authority);
  if (credentials.empty()) fail(ErrorCode::MissingCredentials, "credentials are required");
  const Account a = require(account);
  if (a.state != AccountState::Verified && a.state != AccountState::Active) {
    fail(ErrorCode::WrongState, account + " must be Verified or Active to be certified");
  }
  const std::string digest = to_hex(crypto::sha256(credentials));
  const std::string cert_id =
      "cert-" + crypto::sha256_hex(account + "|" + digest).substr(0, 16);
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::CertifyVerifier, authority,
                         json{{"account_id", account},
                              {"cert_id", cert_id},
                              {"credentials_digest", digest}}});
  return cert_id;
}

std::int64_t Registry::amount_due(const AccountId& account, FeeKind kind) const {
  const Account a = require(account);
  if (a.fee_exempt) fail(ErrorCode::WrongState, account + " is fee exempt");
  const std::int64_t sub = discounted_fee(fees_.subscription_fee, a.discount_balance);
  return kind == FeeKind::Registration ? fees_.registration_fee + sub : sub;
}

Receipt Registry::pay_fee(const AccountId& account, FeeKind kind, std::int64_t amount_cents) {
  const Account a = require(account);
  if (a.fee_exempt) fail(ErrorCode::WrongState, account + " is fee exempt");
  const std::int64_t now = ledger_.now();
  const Standing s = standing(account);
  std::int64_t expiry = 0;
  if (kind == FeeKind::Registration) {
    if (a.state != AccountState::Verified) {
      fail(ErrorCode::WrongState, "registration fee requires a Verified account");
    }
    expiry = now + fees_.period_seconds;
  } else {
    if (s != Standing::Active && s != Standing::Lapsed) {
      fail(ErrorCode::WrongState, "subscription requires an Active or Lapsed account");
    }
    expiry = (s == Standing::Active ? a.subscription_expiry : now) + fees_.period_seconds;
  }
  const std::int64_t due = amount_due(account, kind);
  if (amount_cents != due) {
    fail(ErrorCode::WrongAmount, "amount due is " + std::to_string(due) + " cents, got " +
                                     std::to_string(amount_cents));
  }
  return ledger_.commit(std::string(kNetworkChannel),
                        TxDraft{TxKind::PayFee, account,
                                json{{"account_id", account},
                                     {"fee", to_string(kind)},
                                     {"amount_cents", amount_cents},
                                     {"discount_applied", a.discount_balance},
                                     {"expiry", expiry}}});
}

std::vector<AccountId> Registry::lapse_check(std::int64_t now) {
  std::vector<AccountId> due;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, a] : state_.accounts()) {
      if (a.state == AccountState::Active && !a.fee_exempt && a.subscription_expiry < now) {
        due.push_back(id);
      }
    }
  }
  for (const auto& id : due) {
    ledger_.commit(std::string(kNetworkChannel),
                   TxDraft{TxKind::Register, std::string(kSystemActor),
                           json{{"op", "lapse"}, {"account_id", id}}});
  }
  return due;
}

VoteTally Registry::vote_removal(const AccountId& voter, const AccountId& target, bool remove) {
  if (standing(voter) != Standing::Active) fail(ErrorCode::NotActive, voter + " is not active");
  if (voter == target) fail(ErrorCode::SelfVote, "accounts cannot vote on themselves");
  const Account t = require(target);
  if (t.state == AccountState::Removed) fail(ErrorCode::WrongState, target + " is already removed");
  if (t.has_role(Role::Authority)) {
    fail(ErrorCode::WrongState, "Authority accounts cannot be voted out");
  }
  VoteTally tally;
  tally.target = target;
  {
    std::shared_lock lock(mu_);
    auto it = state_.votes().find(target);
    if (it != state_.votes().end()) {
      if (it->second.contains(voter)) {
        fail(ErrorCode::DuplicateVote, voter + " already voted on " + target);
      }
      for (const auto& [who, vote] : it->second) {
        (vote == "remove" ? tally.remove_votes : tally.keep_votes)++;
      }
    }
  }
  (remove ? tally.remove_votes : tally.keep_votes)++;
  for (const auto& a : accounts()) {
    tally.active_count += standing(a.account_id) == Standing::Active ? 1 : 0;
  }
  tally.removed = tally.remove_votes * 2 > tally.active_count;
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::VoteRemoval, voter,
                         json{{"target", target},
                              {"vote", remove ? "remove" : "keep"},
                              {"remove_votes", tally.remove_votes},
                              {"active_count", tally.active_count},
                              {"removed", tally.removed}}});
  return tally;
}

std::uint32_t Registry::issue_discount(const AccountId& recipient, std::uint32_t points,
                                       Role role, const std::string& submission_id) {
  const Account a = require(recipient);
  const std::uint32_t after = std::min(fees_.discount_cap, a.discount_balance + points);
  ledger_.commit(std::string(kNetworkChannel),
                 TxDraft{TxKind::IssueDiscount, std::string(kSystemActor),
                         json{{"recipient", recipient},
                              {"points", points},
                              {"balance_after", after},
                              {"role", to_string(role)},
                              {"submission_id", submission_id}}});
  return after;
}

Bytes Registry::identity_record(const AccountId& authority, const AccountId& account) const {
  require_authority(authority);
  const Account a = require(account);
  if (a.identity.empty()) fail(ErrorCode::NotFound, account + " has no identity record");
  return store_.get(a.identity);
}

std::optional<Account> Registry::account(const AccountId& id) const {
  std::shared_lock lock(mu_);
  const Account* a = state_.find(id);
  return a ? std::optional<Account>(*a) : std::nullopt;
}

std::optional<Account> Registry::account_by_username(const std::string& name) const {
  std::shared_lock lock(mu_);
  const Account* a = state_.find_by_username(name);
  return a ? std::optional<Account>(*a) : std::nullopt;
}

std::vector<Account> Registry::accounts() const {
  std::shared_lock lock(mu_);
  std::vector<Account> out;
  for (const auto& [id, a] : state_.accounts()) out.push_back(a);
  return out;
}

std::vector<AccountId> Registry::pending() const {
  std::shared_lock lock(mu_);
  std::vector<AccountId> out;
  for (const auto& [id, a] : state_.accounts()) {
    if (a.state == AccountState::Pending) out.push_back(id);
  }
  return out;
}

bool Registry::is_active(const AccountId& id) const { return standing(id) == Standing::Active; }

std::vector<AccountId> Registry::verifier_pool() const {
  std::vector<AccountId> out;
  for (const auto& a : accounts()) {
    if (a.has_role(Role::Verifier) && is_active(a.account_id)) out.push_back(a.account_id);
  }
  return out;
}

PublicKey Registry::public_key_of(const AccountId& id) const {
  return PublicKey::from_hex(require(id).public_key);
}

std::string Registry::digest() const {
  std::shared_lock lock(mu_);
  return state_.digest();
}

json Registry::to_json() const {
  std::shared_lock lock(mu_);
  return state_.to_json();
}

}  // namespace ctinet

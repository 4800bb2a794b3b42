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

// Accounts, roles, verifier certificates, fees and removal votes.
//
// RegistryState is a pure fold over committed transactions; Registry is the
// engine that validates requests and commits them. Every mutation lands in
// the state only through the ledger listener, so replaying the chain
// rebuilds an identical state.
//
// Money is carried in integer cents.

#ifndef CTINET_REGISTRY_HPP_
#define CTINET_REGISTRY_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ctinet/common.hpp"
#include "ctinet/content_store.hpp"
#include "ctinet/envelope.hpp"
#include "ctinet/ledger.hpp"
#include "json.hpp"

namespace ctinet {

enum class Role {
  Consumer,
  Contributor,
  Authority,
  Insurer,
  IndustryCert,
  Verifier,
  Analytics,
};

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

enum class AccountState { Pending, Verified, Active, Lapsed, Removed };

std::string_view to_string(AccountState state);

enum class FeeKind { Registration, Subscription };

std::string_view to_string(FeeKind kind);
std::optional<FeeKind> fee_kind_from_string(std::string_view name);

struct FeeSchedule {
  std::int64_t registration_fee = 5000;   // cents
  std::int64_t subscription_fee = 10000;  // cents per period
  std::int64_t period_seconds = 30 * kSecondsPerDay;
  std::uint32_t contributor_discount = 10;
  std::uint32_t verifier_discount = 2;
  std::uint32_t discount_cap = 50;

  /// ConfigInvalid unless every amount is non-negative and cap <= 100.
  void validate() const;
};

/// Total cost of keeping `n` accounts alive for `periods` periods.
std::int64_t sybil_cost(std::int64_t n, const FeeSchedule& schedule,
                        std::int64_t periods);

/// Subscription due after applying `discount` percentage points, rounded
/// half up to the cent.
std::int64_t discounted_fee(std::int64_t fee, std::uint32_t discount);

struct Account {
  AccountId account_id;
  std::string username;
  std::set<Role> roles;
  /// Roles claimed at registration that need certification first.
  std::set<Role> requested_roles;
  std::string public_key;  // hex
  /// CID of the Authority-sealed identity record. Empty for bootstrap
  /// accounts.
  std::string identity;
  AccountState state = AccountState::Pending;
  std::int64_t subscription_expiry = 0;
  std::uint32_t discount_balance = 0;
  std::string verifier_cert;
  bool fee_exempt = false;
  std::int64_t registered_at = 0;

  bool has_role(Role r) const { return roles.contains(r); }
  /// The Authority-only identity reference is included on request.
  nlohmann::json to_json(bool with_identity) const;
};

struct VoteTally {
  AccountId target;
  std::uint64_t remove_votes = 0;
  std::uint64_t keep_votes = 0;
  std::uint64_t active_count = 0;
  bool removed = false;
};

class RegistryState {
 public:
  void apply(const Transaction& tx);

  const Account* find(const AccountId& id) const;
  const Account* find_by_username(const std::string& username) const;
  const std::map<AccountId, Account>& accounts() const { return accounts_; }
  const std::map<AccountId, std::map<AccountId, std::string>>& votes() const {
    return votes_;
  }
  std::uint64_t count_in(AccountState state) const;

  nlohmann::json to_json() const;
  std::string digest() const;

 private:
  std::map<AccountId, Account> accounts_;
  std::map<std::string, AccountId> by_username_;
  std::map<AccountId, std::map<AccountId, std::string>> votes_;
};

struct RegistrationRequest {
  std::string username;
  Bytes id_docs;
  std::vector<Role> claimed_roles;
  PublicKey public_key;
};

class Registry : public AccessView {
 public:
  Registry(Ledger& ledger, ContentStore& store, FeeSchedule fees,
           PublicKey authority_key);

  /// Feeds committed transactions into the state. Wired to the ledger
  /// listener by the network.
  void apply(const Transaction& tx);

  Standing standing(const AccountId& account) const override;

  AccountId bootstrap_authority(const std::string& username,
                                const PublicKey& public_key);
  AccountId request_account(const RegistrationRequest& request, Rng& rng);
  AccountState authority_verify(const AccountId& authority,
                                const AccountId& account, bool approve);
  std::string certify_verifier(const AccountId& authority,
                               const AccountId& account,
                               ByteView credentials);
  Receipt pay_fee(const AccountId& account, FeeKind kind,
                  std::int64_t amount_cents);
  std::int64_t amount_due(const AccountId& account, FeeKind kind) const;
  std::vector<AccountId> lapse_check(std::int64_t now);
  VoteTally vote_removal(const AccountId& voter, const AccountId& target,
                         bool remove);
  /// Credits discount points, clamped to the cap. Engine path only.
  std::uint32_t issue_discount(const AccountId& recipient, std::uint32_t points,
                               Role role, const std::string& submission_id);

  /// The sealed identity record, for Authority eyes only.
  Bytes identity_record(const AccountId& authority,
                        const AccountId& account) const;

  std::optional<Account> account(const AccountId& id) const;
  std::optional<Account> account_by_username(const std::string& name) const;
  std::vector<Account> accounts() const;
  std::vector<AccountId> pending() const;
  bool is_active(const AccountId& id) const;
  /// Active Verifier accounts.
  std::vector<AccountId> verifier_pool() const;
  PublicKey public_key_of(const AccountId& id) const;

  const FeeSchedule& fees() const { return fees_; }
  const PublicKey& authority_key() const { return authority_key_; }
  std::string digest() const;
  nlohmann::json to_json() const;

 private:
  Account require(const AccountId& id) const;
  void require_authority(const AccountId& id) const;

  Ledger& ledger_;
  ContentStore& store_;
  FeeSchedule fees_;
  PublicKey authority_key_;
  mutable std::shared_mutex mu_;
  RegistryState state_;
};

AccountId derive_account_id(std::string_view username);

}  // namespace ctinet

#endif  // CTINET_REGISTRY_HPP_

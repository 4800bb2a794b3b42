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

// One network: orderer/ledger, content store, registry and exchange wired
// together. Mutating calls are serialized here, which is what makes every
// engine check-then-commit sequence atomic. Reads go straight to the
// engines and run concurrently.

#ifndef CTINET_NETWORK_HPP_
#define CTINET_NETWORK_HPP_

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "ctinet/content_store.hpp"
#include "ctinet/envelope.hpp"
#include "ctinet/exchange.hpp"
#include "ctinet/ledger.hpp"
#include "ctinet/registry.hpp"
#include "ctinet/rng.hpp"

namespace ctinet {

struct NetworkConfig {
  FeeSchedule fees;
  ExchangeParams exchange;
  LedgerOptions ledger;
  std::optional<std::filesystem::path> store_file;
  std::size_t max_object_size = ContentStore::kDefaultMaxObjectSize;
  /// Assign verifiers right after submission and finalize after the last
  /// verdict, instead of waiting for explicit calls.
  bool auto_progress = false;
};

struct StateDigests {
  std::string ledger;
  std::string registry;
  std::string exchange;

  friend bool operator==(const StateDigests&, const StateDigests&) = default;
  nlohmann::json to_json() const;
};

struct SubmitResult {
  std::string submission_id;
  CtiStatus status = CtiStatus::Submitted;
  std::optional<std::array<AccountId, kVerifierCount>> verifiers;
};

struct TickResult {
  std::vector<AccountId> lapsed;
  TickReport exchange;
};

class Network {
 public:
  /// Loads persisted chains when `config.ledger.persist_dir` holds any and
  /// rebuilds registry and exchange state by replaying them.
  Network(NetworkConfig config, Clock clock, Rng rng, KeyPair escrow,
          PublicKey authority_key);
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  Ledger& ledger() { return *ledger_; }
  const Ledger& ledger() const { return *ledger_; }
  ContentStore& store() { return store_; }
  const Registry& registry() const { return *registry_; }
  const Exchange& exchange() const { return *exchange_; }
  const NetworkConfig& config() const { return config_; }
  std::int64_t now() const { return clock_(); }

  // registry
  AccountId bootstrap_authority(const std::string& username, const PublicKey& key);
  AccountId request_account(const RegistrationRequest& request);
  AccountState authority_verify(const AccountId& authority, const AccountId& account,
                                bool approve);
  std::string certify_verifier(const AccountId& authority, const AccountId& account,
                               ByteView credentials);
  Receipt pay_fee(const AccountId& account, FeeKind kind, std::int64_t amount_cents);
  VoteTally vote_removal(const AccountId& voter, const AccountId& target, bool remove);

  // ledger
  std::string create_channel(const AccountId& creator, TlpLevel tlp,
                             std::set<AccountId> members,
                             std::optional<std::string> channel_id = {});
  void add_member(const std::string& channel_id, const AccountId& by, const AccountId& member);
  Receipt submit_tx(const std::string& channel_id, TxDraft draft);

  // exchange
  SubmitResult submit_cti(const AccountId& contributor, const nlohmann::json& metadata,
                          const std::string& fingerprint,
                          std::optional<std::string> channel = std::nullopt);
  std::array<AccountId, kVerifierCount> assign_verifiers(const std::string& submission_id);
  void attach_envelope(const AccountId& contributor, const std::string& submission_id,
                       const EnvelopeSet& envelope);
  /// Returns the decision when this verdict completed the set and
  /// auto_progress is on.
  std::optional<QualityDecision> submit_verdict(const VerdictInput& verdict);
  QualityDecision finalize_verification(const std::string& submission_id);
  std::string place_order(const AccountId& consumer, const std::string& submission_id);
  Delivery deliver_key(const AccountId& actor, const std::string& order_id);
  OrderState confirm_decryption(const AccountId& actor, const std::string& order_id,
                                bool success, std::optional<std::uint32_t> rating);
  CrossCheck crosscheck_ratings(const std::string& submission_id);
  ReportReceipt report_to_authority(const AccountId& contributor,
                                    const nlohmann::json& metadata,
                                    const EnvelopeSet& envelope, const AccountId& authority);
  WrappedKey fetch_report_key(const AccountId& authority, const std::string& report_id);

  /// Lapses expired subscriptions and handles verifier timeouts at now().
  TickResult tick();

  StateDigests digests() const;
  /// Digests of registry and exchange state rebuilt from the chain alone.
  StateDigests replay_digests() const;
  /// Flushes pending blocks.
  void flush();

 private:
  NetworkConfig config_;
  Clock clock_;
  Rng rng_;
  KeyPair escrow_;
  ContentStore store_;
  std::unique_ptr<Ledger> ledger_;
  std::unique_ptr<Registry> registry_;
  std::unique_ptr<Exchange> exchange_;
  std::mutex op_mu_;
};

}  // namespace ctinet

#endif  // CTINET_NETWORK_HPP_

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

// CTI lifecycle: submission, verifier assignment, verdicts, finalization,
// marketplace listing, orders with key delivery and fallback, consumer
// ratings, and the Authority reporting path.
//
// Flow of one package:
//
//   submit_cti        -> Submitted (or Duplicate on a fingerprint match)
//   assign_verifiers  -> UnderVerification, three verifiers drawn
//   attach_envelope   -> contributor seals to the drawn verifiers' keys
//   submit_verdict x3 -> each original verifier releases kv_i to escrow
//   finalize          -> Accepted | Rejected | Duplicate, discounts issued
//
// Lifecycle transactions live on the package's home channel: "network" for
// GREEN and WHITE packages, the named channel for RED and AMBER ones.

#ifndef CTINET_EXCHANGE_HPP_
#define CTINET_EXCHANGE_HPP_

#include <array>
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
#include "ctinet/registry.hpp"
#include "ctinet/rng.hpp"
#include "json.hpp"

namespace ctinet {

inline constexpr std::string_view kFormatVersion = "ctinet/1";

enum class CtiStatus { Submitted, UnderVerification, Accepted, Rejected, Duplicate };
std::string_view to_string(CtiStatus status);
std::optional<CtiStatus> cti_status_from_string(std::string_view name);

enum class OrderState { Placed, KeyDelivered, Confirmed, Failed };
std::string_view to_string(OrderState state);

struct CtiMetadata {
  std::string title;
  std::string description;
  std::string industry;
  std::string ics_type;
  std::string vulnerability;
  std::string attack_type;
  TlpLevel tlp = TlpLevel::Green;
  bool anonymized = true;
  std::string format_version{kFormatVersion};

  nlohmann::json to_json() const;
};

/// Salted plaintext fingerprint used for automatic duplicate detection.
std::string cti_fingerprint(ByteView plaintext);

struct ExchangeParams {
  /// A verdict passes when its three-axis mean reaches this (in 1/1000).
  std::uint32_t pass_mean_milli = 3500;
  std::uint32_t accept_passes = 2;
  std::uint32_t duplicate_flags = 2;
  std::int64_t verifier_timeout = 7 * kSecondsPerDay;
  std::uint32_t max_reassign_rounds = 3;
  std::uint32_t min_ratings = 3;
  std::uint32_t discrepancy_milli = 1500;

  void validate() const;
};

struct SlotState {
  AccountId verifier;
  std::uint32_t round = 0;
  /// True when the contributor's envelope was sealed to this verifier.
  bool sealed = false;
  /// For replacement verifiers: kc rewrapped to them. Originals use their
  /// own verifier copy instead.
  std::string key_blob;
  std::int64_t assigned_at = 0;
  std::vector<AccountId> previous;
};

struct VerdictRecord {
  AccountId verifier;
  std::size_t slot = 0;
  std::uint32_t accuracy = 0;
  std::uint32_t usability = 0;
  std::uint32_t relevance = 0;
  bool duplicate_flag = false;
  std::string report;
  /// kv_i wrapped to the escrow key; empty for replacement verifiers.
  std::string key_release;
  std::uint64_t timestamp = 0;

  std::uint32_t sum() const { return accuracy + usability + relevance; }
};

struct CtiPackage {
  std::string submission_id;
  AccountId contributor;
  nlohmann::json metadata;
  std::string fingerprint;
  CtiStatus status = CtiStatus::Submitted;
  std::string home_channel;
  TlpLevel tlp = TlpLevel::Green;
  std::optional<EnvelopeSet> envelope;
  std::vector<SlotState> slots;
  std::map<std::size_t, VerdictRecord> verdicts;
  std::uint32_t rounds = 0;
  std::uint64_t submitted_ts = 0;
  std::int64_t submitted_at = 0;
  std::int64_t assigned_at = 0;
  std::int64_t envelope_at = 0;
  std::vector<bool> passes;
  bool forced = false;

  std::set<AccountId> ever_assigned() const;
  std::optional<std::size_t> slot_of(const AccountId& verifier) const;
  nlohmann::json to_json() const;
};

struct QualityDecision {
  std::string submission_id;
  CtiStatus outcome = CtiStatus::Rejected;
  std::vector<bool> passes;
  std::vector<std::pair<AccountId, std::uint32_t>> discounts_issued;
  bool forced = false;

  nlohmann::json to_json() const;
};

struct Listing {
  std::string submission_id;
  std::string home_channel;
  TlpLevel tlp = TlpLevel::Green;
  AccountId contributor;
  nlohmann::json metadata;
  std::uint64_t listed_ts = 0;

  nlohmann::json to_json() const;
};

struct Delivery {
  std::string source;  // "consumer" or "verifier"
  std::uint32_t slot = 0;  // 0 for kc, i for kv_i
  std::string key_blob;
  std::string ciphertext;

  nlohmann::json to_json() const;
};

struct Order {
  std::string order_id;
  AccountId consumer;
  std::string submission_id;
  std::string home_channel;
  std::vector<Delivery> deliveries;
  OrderState state = OrderState::Placed;
  std::optional<std::uint32_t> rating;

  nlohmann::json to_json() const;
};

struct CrossCheck {
  std::string submission_id;
  std::uint64_t ratings = 0;
  std::uint64_t consumer_mean_milli = 0;
  std::uint64_t verifier_mean_milli = 0;
  std::uint64_t gap_milli = 0;
  bool discrepancy = false;

  nlohmann::json to_json() const;
};

struct AuthorityReport {
  std::string report_id;
  AccountId contributor;
  AccountId authority;
  std::string channel_id;
  nlohmann::json metadata;
  EnvelopeSet envelope;
  std::uint64_t timestamp = 0;
  std::int64_t wall_time = 0;

  nlohmann::json to_json() const;
};

struct ReportReceipt {
  std::string report_id;
  std::string channel_id;
  std::uint64_t timestamp = 0;
  std::string tx_id;
};

/// Exact-match filter over industry, ics_type, vulnerability, attack_type
/// and tlp.
struct ListingFilter {
  std::map<std::string, std::string> fields;

  /// SchemaViolation for any key outside the five filterable fields.
  static ListingFilter from_map(const std::map<std::string, std::string>& kv);
  bool matches(const Listing& listing) const;
};

struct VerdictInput {
  AccountId verifier;
  std::string submission_id;
  std::uint32_t accuracy = 0;
  std::uint32_t usability = 0;
  std::uint32_t relevance = 0;
  bool duplicate_flag = false;
  Bytes report;
  std::optional<WrappedKey> key_release;
};

struct TickReport {
  std::vector<std::string> reassigned;  // "submission/slot"
  std::vector<QualityDecision> finalized;
};

class ExchangeState {
 public:
  void apply(const Transaction& tx);

  const std::map<std::string, CtiPackage>& packages() const { return packages_; }
  const std::map<std::string, Listing>& listings() const { return listings_; }
  const std::map<std::string, Order>& orders() const { return orders_; }
  const std::map<std::string, std::vector<std::uint32_t>>& ratings() const { return ratings_; }
  const std::map<std::string, CrossCheck>& crosschecks() const { return crosschecks_; }
  const std::map<std::string, AuthorityReport>& reports() const { return reports_; }

  nlohmann::json to_json() const;
  std::string digest() const;

 private:
  std::map<std::string, CtiPackage> packages_;
  std::map<std::string, Listing> listings_;
  std::map<std::string, Order> orders_;
  std::map<std::string, std::vector<std::uint32_t>> ratings_;
  std::map<std::string, CrossCheck> crosschecks_;
  std::map<std::string, AuthorityReport> reports_;
};

class Exchange {
 public:
  Exchange(Ledger& ledger, ContentStore& store, Registry& registry,
           ExchangeParams params, KeyPair escrow);

  void apply(const Transaction& tx);

  std::string submit_cti(const AccountId& contributor,
                         const nlohmann::json& metadata,
                         const std::string& fingerprint,
                         std::optional<std::string> channel = std::nullopt);
  std::array<AccountId, kVerifierCount> assign_verifiers(
      const std::string& submission_id, Rng& rng);
  void attach_envelope(const AccountId& contributor,
                       const std::string& submission_id,
                       const EnvelopeSet& envelope);
  Receipt submit_verdict(const VerdictInput& verdict);
  QualityDecision finalize_verification(const std::string& submission_id);

  std::vector<Listing> list_marketplace(
      const Principal& user, const ListingFilter& filter,
      const std::optional<std::string>& channel = std::nullopt) const;
  std::string place_order(const AccountId& consumer,
                          const std::string& submission_id);
  Delivery deliver_key(const AccountId& actor, const std::string& order_id,
                       Rng& rng);
  OrderState confirm_decryption(const AccountId& actor,
                                const std::string& order_id, bool success,
                                std::optional<std::uint32_t> rating);
  CrossCheck crosscheck_ratings(const std::string& submission_id);

  ReportReceipt report_to_authority(const AccountId& contributor,
                                    const nlohmann::json& metadata,
                                    const EnvelopeSet& envelope,
                                    const AccountId& authority);
  /// kc of a report rewrapped to the addressed Authority.
  WrappedKey fetch_report_key(const AccountId& authority,
                              const std::string& report_id, Rng& rng) const;

  /// Replaces a removed account in every open assignment slot it holds.
  std::vector<std::string> reassign_removed(const AccountId& removed, Rng& rng);
  /// Verifier timeouts: reassign or force-finalize overdue packages.
  TickReport tick(std::int64_t now, Rng& rng);

  std::optional<CtiPackage> package(const std::string& submission_id) const;
  std::optional<Order> order(const std::string& order_id) const;
  std::optional<AuthorityReport> report(const std::string& report_id) const;
  bool is_listed(const std::string& submission_id) const;
  std::vector<CtiPackage> packages() const;
  std::vector<Order> orders() const;
  std::vector<AuthorityReport> reports() const;
  /// Open assignment slots held by `verifier`.
  std::vector<nlohmann::json> assignments(const AccountId& verifier) const;

  const ExchangeParams& params() const { return params_; }
  const PublicKey& escrow_public_key() const { return escrow_.public_key; }
  std::string digest() const;
  nlohmann::json to_json() const;

 private:
  CtiPackage require_package(const std::string& submission_id) const;
  Order require_order(const std::string& order_id) const;
  void require_active(const AccountId& account) const;
  std::vector<AccountId> eligible_pool(const CtiPackage& pkg) const;
  QualityDecision finalize_locked_out(const CtiPackage& pkg, bool forced);
  bool reassign_slot(const CtiPackage& pkg, std::size_t slot,
                     const std::string& reason, std::uint32_t round, Rng& rng,
                     std::set<AccountId>& excluded);
  std::string make_id(std::string_view prefix, const std::string& seed) const;

  Ledger& ledger_;
  ContentStore& store_;
  Registry& registry_;
  ExchangeParams params_;
  KeyPair escrow_;
  mutable std::shared_mutex mu_;
  ExchangeState state_;
};

/// Decides one outcome from a set of verdicts under `params`.
QualityDecision decide(const std::vector<VerdictRecord>& verdicts,
                       const ExchangeParams& params);
/// Pure ratings comparison, shared by the engine and its tests.
CrossCheck compare_ratings(const std::vector<std::uint32_t>& consumer,
                           const std::vector<VerdictRecord>& verdicts,
                           const ExchangeParams& params);

}  // namespace ctinet

#endif  // CTINET_EXCHANGE_HPP_

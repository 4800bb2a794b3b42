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

// Permissioned, channelized append-only ledger.
//
// A single orderer sequences every transaction on the network (global `seq`)
// and assigns a per-channel logical timestamp. Blocks are cut per channel
// every `block_size` transactions or on flush(). Hashes:
//
//   tx_id       = sha256(canonical_json{actor, body, channel_id, kind, seq,
//                                       timestamp, wall_time})
//   merkle_root = binary sha256 tree over raw tx_id bytes, odd node paired
//                 with itself
//   block_hash  = sha256(canonical_json{channel_id, height, merkle_root,
//                                       prev_hash})
//
// Canonical JSON is sorted keys, UTF-8, no insignificant whitespace. All
// hashes are carried as lowercase hex and compared as strings.
//
// Two TLP channels exist from genesis: "network" (GREEN, every active
// account) and "public" (WHITE, readable by anyone). RED and AMBER channels
// are created by members.

#ifndef CTINET_LEDGER_HPP_
#define CTINET_LEDGER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ctinet/common.hpp"
#include "json.hpp"

namespace ctinet {

inline constexpr std::string_view kNetworkChannel = "network";
inline constexpr std::string_view kPublicChannel = "public";
inline constexpr std::string_view kSystemActor = "system";

/// Ordered by audience breadth.
enum class TlpLevel { Red = 0, Amber = 1, Green = 2, White = 3 };

std::string_view to_string(TlpLevel level);
std::optional<TlpLevel> tlp_from_string(std::string_view name);

enum class TxKind {
  Register,
  CertifyVerifier,
  PayFee,
  SubmitCti,
  AssignVerifiers,
  SubmitVerdict,
  FinalizeVerification,
  PublishListing,
  PlaceOrder,
  DeliverKey,
  ConfirmDecryption,
  RateCti,
  IssueDiscount,
  ReportToAuthority,
  VoteRemoval,
  CreateChannel,
};

inline constexpr std::size_t kTxKindCount = 16;
std::string_view to_string(TxKind kind);
std::optional<TxKind> tx_kind_from_string(std::string_view name);
const std::vector<TxKind>& all_tx_kinds();

/// Body of a transaction before the orderer stamps it.
struct TxDraft {
  TxKind kind;
  AccountId actor;
  nlohmann::json body;
};

struct Transaction {
  std::string tx_id;
  std::uint64_t seq = 0;
  std::string channel_id;
  TxKind kind = TxKind::Register;
  AccountId actor;
  nlohmann::json body;
  std::uint64_t timestamp = 0;
  std::int64_t wall_time = 0;

  /// The hashed fields (everything but tx_id).
  nlohmann::json content_json() const;
  std::string compute_id() const;
  nlohmann::json to_json() const;
  static Transaction from_json(const nlohmann::json& j);
};

struct Block {
  std::uint64_t height = 0;
  std::string channel_id;
  std::string prev_hash;
  std::string merkle_root;
  std::vector<Transaction> txs;
  std::string block_hash;

  std::string compute_hash() const;
  nlohmann::json to_json() const;
  /// Strict: exact field set, every hash lowercase hex of the right length.
  static Block from_json(const nlohmann::json& j);
};

std::string merkle_root(const std::vector<Transaction>& txs);
std::string zero_hash();

/// Validates a transaction body against its per-kind schema.
/// Throws SchemaViolation naming the offending field.
void validate_tx_body(TxKind kind, const nlohmann::json& body);
/// The CTI metadata record on its own (same rules as inside bodies).
void validate_metadata(const nlohmann::json& metadata);

struct Channel {
  std::string channel_id;
  TlpLevel tlp = TlpLevel::Green;
  /// Empty for the network-wide GREEN and WHITE channels.
  std::set<AccountId> members;
  AccountId creator;
  std::int64_t created_at = 0;
};

enum class AccessMode { Read, Write };

enum class DenyReason {
  None,
  Anonymous,
  NotRegistered,
  NotMember,
  NotActive,
  SubscriptionLapsed,
  AccountRemoved,
};

std::string_view to_string(DenyReason reason);

struct AccessDecision {
  bool allowed = false;
  DenyReason reason = DenyReason::None;

  static AccessDecision allow() { return {true, DenyReason::None}; }
  static AccessDecision deny(DenyReason r) { return {false, r}; }
};

/// What the ledger needs to know about accounts to evaluate TLP policy.
/// Implemented by the registry.
class AccessView {
 public:
  enum class Standing { Unknown, Pending, Verified, Active, Lapsed, Removed };
  virtual ~AccessView() = default;
  virtual Standing standing(const AccountId& account) const = 0;
};

struct TxFilter {
  std::optional<TxKind> kind;
  std::optional<std::uint64_t> since_timestamp;
  std::optional<std::uint64_t> until_timestamp;
};

struct Receipt {
  std::uint64_t height = 0;
  std::string tx_id;
  std::uint64_t seq = 0;
  std::uint64_t timestamp = 0;
};

struct LedgerOptions {
  std::size_t block_size = 1;
  /// When set, each channel is persisted as <dir>/<channel_id>.chain.
  std::optional<std::filesystem::path> persist_dir;
};

class Ledger {
 public:
  using Listener = std::function<void(const Transaction&)>;

  Ledger(LedgerOptions options, Clock clock);
  ~Ledger();
  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  /// Rebuilds a ledger from persisted chain files. Every channel is
  /// verified; a broken chain fails with InvariantViolation.
  static std::unique_ptr<Ledger> load(LedgerOptions options, Clock clock);

  void set_access_view(const AccessView* view);
  /// Invoked synchronously, in orderer sequence, for every ordered tx.
  void set_listener(Listener listener);

  std::string create_channel(const AccountId& creator, TlpLevel tlp,
                             std::set<AccountId> members,
                             std::optional<std::string> channel_id = {});
  /// AMBER membership only grows; RED membership is fixed at creation.
  void add_member(const std::string& channel_id, const AccountId& by,
                  const AccountId& member);

  /// User-facing submission: write access and schema are both enforced.
  Receipt submit_tx(const std::string& channel_id, TxDraft draft);
  /// Protocol-engine path: schema enforced, access decided by the caller.
  Receipt commit(const std::string& channel_id, TxDraft draft);

  AccessDecision check_access(const Principal& user,
                              const std::string& channel_id,
                              AccessMode mode) const;
  std::vector<Transaction> read(const std::string& channel_id,
                                const Principal& user,
                                const TxFilter& filter = {}) const;
  /// Committed transactions without an access check (engines, replay).
  std::vector<Transaction> transactions(const std::string& channel_id) const;
  /// Every ordered transaction across channels in orderer sequence,
  /// including those still waiting for a block cut.
  std::vector<Transaction> all_transactions() const;

  bool verify_chain(const std::string& channel_id) const;
  bool verify_all() const;
  void flush();

  bool has_channel(const std::string& channel_id) const;
  Channel channel(const std::string& channel_id) const;
  std::vector<std::string> channel_ids() const;
  std::vector<Block> blocks(const std::string& channel_id) const;
  std::uint64_t height(const std::string& channel_id) const;
  std::uint64_t next_seq() const;
  std::int64_t now() const { return clock_(); }

  /// Length-prefixed canonical JSON block records, the persisted format.
  Bytes export_records(const std::string& channel_id) const;

  /// sha256 over {channel_id: head block hash}.
  std::string digest() const;

  /// Test hook: direct access to a committed block, bypassing all checks.
  Block& mutable_block_for_testing(const std::string& channel_id,
                                   std::uint64_t height);

 private:
  struct ChannelState {
    Channel info;
    std::vector<Block> blocks;
    std::vector<Transaction> pending;
    std::uint64_t next_timestamp = 0;
  };

  struct Loading {};
  Ledger(LedgerOptions options, Clock clock, Loading);

  Transaction order_locked(ChannelState& ch, TxDraft draft, Receipt& receipt);
  void notify(const Transaction& tx) const;
  void cut_block_locked(ChannelState& ch);
  void persist_block_locked(const Block& block);
  void apply_membership_locked(ChannelState& ch, const Transaction& tx);
  ChannelState& channel_locked(const std::string& channel_id);
  const ChannelState& channel_locked(const std::string& channel_id) const;
  AccessDecision check_access_locked(const Principal& user,
                                     const ChannelState& ch,
                                     AccessMode mode) const;
  std::string create_channel_locked(const AccountId& creator, TlpLevel tlp,
                                    std::set<AccountId> members,
                                    const std::string& channel_id);

  LedgerOptions options_;
  Clock clock_;
  const AccessView* access_ = nullptr;
  Listener listener_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ChannelState> channels_;
  std::uint64_t next_seq_ = 0;
};

/// Verifies a sequence of blocks as one channel's chain.
bool verify_blocks(const std::vector<Block>& blocks);
/// Parses length-prefixed block records and verifies them. False on any
/// framing, parse or hash failure.
bool verify_records(ByteView records);
std::vector<Block> parse_records(ByteView records);

bool is_valid_channel_id(std::string_view id);

}  // namespace ctinet

#endif  // CTINET_LEDGER_HPP_

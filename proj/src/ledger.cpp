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

#include "ctinet/ledger.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kTlpNames{"RED", "AMBER", "GREEN",
                                                     "WHITE"};

constexpr std::array<std::string_view, kTxKindCount> kKindNames{
    "Register",          "CertifyVerifier", "PayFee",
    "SubmitCti",         "AssignVerifiers", "SubmitVerdict",
    "FinalizeVerification", "PublishListing", "PlaceOrder",
    "DeliverKey",        "ConfirmDecryption", "RateCti",
    "IssueDiscount",     "ReportToAuthority", "VoteRemoval",
    "CreateChannel",
};

bool is_hash(const std::string& s) { return is_lower_hex(s, 64); }

std::string channel_file(const std::filesystem::path& dir,
                         const std::string& channel_id) {
  return (dir / (channel_id + ".chain")).string();
}

void append_record(Bytes& out, const std::string& payload) {
  const auto len = static_cast<std::uint32_t>(payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.insert(out.end(), payload.begin(), payload.end());
}

template <typename T>
T get_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    fail(ErrorCode::SchemaViolation, std::string("missing field ") + name);
  }
  return it->get<T>();
}

}  // namespace

std::string_view to_string(TlpLevel level) {
  return kTlpNames[static_cast<std::size_t>(level)];
}

std::optional<TlpLevel> tlp_from_string(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kTlpNames.size(); ++i) {
    if (kTlpNames[i] == upper) return static_cast<TlpLevel>(i);
  }
  return std::nullopt;
}

std::string_view to_string(TxKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<TxKind> tx_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<TxKind>(i);
  }
  return std::nullopt;
}

const std::vector<TxKind>& all_tx_kinds() {
  static const std::vector<TxKind> kinds = [] {
    std::vector<TxKind> v;
    for (std::size_t i = 0; i < kTxKindCount; ++i) v.push_back(static_cast<TxKind>(i));
    return v;
  }();
  return kinds;
}

std::string_view to_string(DenyReason reason) {
  switch (reason) {
    case DenyReason::None: return "None";
    case DenyReason::Anonymous: return "Anonymous";
    case DenyReason::NotRegistered: return "NotRegistered";
    case DenyReason::NotMember: return "NotMember";
    case DenyReason::NotActive: return "NotActive";
    case DenyReason::SubscriptionLapsed: return "SubscriptionLapsed";
    case DenyReason::AccountRemoved: return "AccountRemoved";
  }
  return "None";
}

bool is_valid_channel_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
           c == '.';
  }) && id.front() != '.';
}

// --- Transaction / Block -------------------------------------------------

json Transaction::content_json() const {
  return json{{"actor", actor},
              {"body", body},
              {"channel_id", channel_id},
              {"kind", to_string(kind)},
              {"seq", seq},
              {"timestamp", timestamp},
              {"wall_time", wall_time}};
}

std::string Transaction::compute_id() const {
  return crypto::sha256_hex(content_json().dump());
}

json Transaction::to_json() const {
  json j = content_json();
  j["tx_id"] = tx_id;
  return j;
}

Transaction Transaction::from_json(const json& j) {
  if (!j.is_object() || j.size() != 8) {
    fail(ErrorCode::SchemaViolation, "transaction: expected 8 fields");
  }
  Transaction tx;
  tx.tx_id = get_field<std::string>(j, "tx_id");
  tx.seq = get_field<std::uint64_t>(j, "seq");
  tx.channel_id = get_field<std::string>(j, "channel_id");
  const auto kind = tx_kind_from_string(get_field<std::string>(j, "kind"));
  if (!kind) fail(ErrorCode::SchemaViolation, "transaction: unknown kind");
  tx.kind = *kind;
  tx.actor = get_field<std::string>(j, "actor");
  tx.body = j.at("body");
  tx.timestamp = get_field<std::uint64_t>(j, "timestamp");
  tx.wall_time = get_field<std::int64_t>(j, "wall_time");
  if (!is_hash(tx.tx_id)) fail(ErrorCode::SchemaViolation, "transaction: bad tx_id");
  return tx;
}

std::string zero_hash() { return std::string(64, '0'); }

std::string merkle_root(const std::vector<Transaction>& txs) {
  if (txs.empty()) return zero_hash();
  std::vector<crypto::Digest> level;
  level.reserve(txs.size());
  for (const auto& tx : txs) {
    const Bytes raw = from_hex(tx.tx_id);
    if (raw.size() != crypto::kDigestSize) {
      fail(ErrorCode::SchemaViolation, "tx_id is not a sha256 digest");
    }
    crypto::Digest d{};
    std::copy(raw.begin(), raw.end(), d.begin());
    level.push_back(d);
  }
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<crypto::Digest> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      crypto::Sha256 h;
      h.update(level[i]);
      h.update(level[i + 1]);
      next.push_back(h.finish());
    }
    level = std::move(next);
  }
  return to_hex(level.front());
}

std::string Block::compute_hash() const {
  const json header{{"channel_id", channel_id},
                    {"height", height},
                    {"merkle_root", merkle_root},
                    {"prev_hash", prev_hash}};
  return crypto::sha256_hex(header.dump());
}

json Block::to_json() const {
  json j{{"block_hash", block_hash},
         {"channel_id", channel_id},
         {"height", height},
         {"merkle_root", merkle_root},
         {"prev_hash", prev_hash},
         {"txs", json::array()}};
  for (const auto& tx : txs) j["txs"].push_back(tx.to_json());
  return j;
}

Block Block::from_json(const json& j) {
  if (!j.is_object() || j.size() != 6) {
    fail(ErrorCode::SchemaViolation, "block: expected 6 fields");
  }
  Block b;
  b.block_hash = get_field<std::string>(j, "block_hash");
  b.channel_id = get_field<std::string>(j, "channel_id");
  b.height = get_field<std::uint64_t>(j, "height");
  b.merkle_root = get_field<std::string>(j, "merkle_root");
  b.prev_hash = get_field<std::string>(j, "prev_hash");
  if (!is_hash(b.block_hash) || !is_hash(b.merkle_root) || !is_hash(b.prev_hash)) {
    fail(ErrorCode::SchemaViolation, "block: malformed hash");
  }
  const auto& txs = j.at("txs");
  if (!txs.is_array()) fail(ErrorCode::SchemaViolation, "block: txs not an array");
  for (const auto& t : txs) b.txs.push_back(Transaction::from_json(t));
  return b;
}

bool verify_blocks(const std::vector<Block>& blocks) {
  try {
    std::optional<std::uint64_t> last_ts;
    std::optional<std::uint64_t> last_seq;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const Block& b = blocks[i];
      if (b.height != i) return false;
      if (b.channel_id != blocks.front().channel_id) return false;
      const std::string expected_prev =
          i == 0 ? zero_hash() : blocks[i - 1].block_hash;
      if (b.prev_hash != expected_prev) return false;
      if (b.txs.empty()) return false;
      for (const auto& tx : b.txs) {
        if (tx.channel_id != b.channel_id) return false;
        if (tx.compute_id() != tx.tx_id) return false;
        if (last_ts && tx.timestamp <= *last_ts) return false;
        if (last_seq && tx.seq <= *last_seq) return false;
        last_ts = tx.timestamp;
        last_seq = tx.seq;
      }
      if (merkle_root(b.txs) != b.merkle_root) return false;
      if (b.compute_hash() != b.block_hash) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<Block> parse_records(ByteView records) {
  std::vector<Block> blocks;
  std::size_t pos = 0;
  while (pos < records.size()) {
    if (records.size() - pos < 4) {
      fail(ErrorCode::SchemaViolation, "truncated record header");
    }
    const std::uint32_t len = std::uint32_t{records[pos]} << 24 |
                              std::uint32_t{records[pos + 1]} << 16 |
                              std::uint32_t{records[pos + 2]} << 8 |
                              records[pos + 3];
    pos += 4;
    if (len == 0 || records.size() - pos < len) {
      fail(ErrorCode::SchemaViolation, "truncated record body");
    }
    const std::string text(records.begin() + static_cast<std::ptrdiff_t>(pos),
                           records.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaViolation, std::string("record is not JSON: ") + e.what());
    }
    // Canonical form is part of the format; re-serialization must round-trip.
    if (j.dump() != text) {
      fail(ErrorCode::SchemaViolation, "record is not canonical JSON");
    }
    blocks.push_back(Block::from_json(j));
  }
  return blocks;
}

bool verify_records(ByteView records) {
  try {
    return verify_blocks(parse_records(records));
  } catch (const std::exception&) {
    return false;
  }
}

// --- Ledger --------------------------------------------------------------

Ledger::Ledger(LedgerOptions options, Clock clock, Loading)
    : options_(std::move(options)), clock_(std::move(clock)) {
  if (options_.block_size == 0) options_.block_size = 1;
  if (options_.persist_dir) std::filesystem::create_directories(*options_.persist_dir);
}

Ledger::Ledger(LedgerOptions options, Clock clock)
    : Ledger(std::move(options), std::move(clock), Loading{}) {
  std::unique_lock lock(mu_);
  create_channel_locked(std::string(kSystemActor), TlpLevel::Green, {},
                        std::string(kNetworkChannel));
  create_channel_locked(std::string(kSystemActor), TlpLevel::White, {},
                        std::string(kPublicChannel));
}

Ledger::~Ledger() = default;

std::unique_ptr<Ledger> Ledger::load(LedgerOptions options, Clock clock) {
  if (!options.persist_dir) fail(ErrorCode::ConfigInvalid, "no ledger directory");
  const auto dir = *options.persist_dir;
  bool any = false;
  if (std::filesystem::exists(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      any = any || entry.path().extension() == ".chain";
    }
  }
  if (!any) return std::make_unique<Ledger>(std::move(options), std::move(clock));

  std::unique_ptr<Ledger> ledger(new Ledger(std::move(options), std::move(clock), Loading{}));
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".chain") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    const Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<Block> blocks;
    try {
      blocks = parse_records(raw);
    } catch (const Error& e) {
      fail(ErrorCode::InvariantViolation,
           "chain file " + entry.path().string() + ": " + e.what());
    }
    if (blocks.empty() || !verify_blocks(blocks)) {
      fail(ErrorCode::InvariantViolation,
           "chain file " + entry.path().string() + " failed verification");
    }
    ChannelState ch;
    const Transaction& genesis = blocks.front().txs.front();
    if (genesis.kind != TxKind::CreateChannel) {
      fail(ErrorCode::InvariantViolation, "chain does not start with CreateChannel");
    }
    ch.info.channel_id = blocks.front().channel_id;
    ch.info.creator = genesis.actor;
    ch.info.created_at = genesis.wall_time;
    ch.info.tlp = *tlp_from_string(genesis.body.at("tlp").get<std::string>());
    for (const auto& m : genesis.body.at("members")) ch.info.members.insert(m.get<std::string>());
    for (const auto& b : blocks) {
      for (const auto& tx : b.txs) {
        if (&tx != &genesis) ledger->apply_membership_locked(ch, tx);
        ch.next_timestamp = tx.timestamp + 1;
        ledger->next_seq_ = std::max(ledger->next_seq_, tx.seq + 1);
      }
    }
    ch.blocks = std::move(blocks);
    ledger->channels_.emplace(ch.info.channel_id, std::move(ch));
  }
  for (auto name : {kNetworkChannel, kPublicChannel}) {
    if (!ledger->channels_.contains(std::string(name))) {
      fail(ErrorCode::InvariantViolation, "missing genesis channel " + std::string(name));
    }
  }
  return ledger;
}

void Ledger::set_access_view(const AccessView* view) {
  std::unique_lock lock(mu_);
  access_ = view;
}

void Ledger::set_listener(Listener listener) {
  std::unique_lock lock(mu_);
  listener_ = std::move(listener);
}

void Ledger::notify(const Transaction& tx) const {
  if (listener_) listener_(tx);
}

Ledger::ChannelState& Ledger::channel_locked(const std::string& channel_id) {
  auto it = channels_.find(channel_id);
  if (it == channels_.end()) fail(ErrorCode::UnknownChannel, "unknown channel " + channel_id);
  return it->second;
}

const Ledger::ChannelState& Ledger::channel_locked(const std::string& channel_id) const {
  auto it = channels_.find(channel_id);
  if (it == channels_.end()) fail(ErrorCode::UnknownChannel, "unknown channel " + channel_id);
  return it->second;
}

Transaction Ledger::order_locked(ChannelState& ch, TxDraft draft, Receipt& receipt) {
  validate_tx_body(draft.kind, draft.body);
  Transaction tx;
  tx.seq = next_seq_++;
  tx.channel_id = ch.info.channel_id;
  tx.kind = draft.kind;
  tx.actor = std::move(draft.actor);
  tx.body = std::move(draft.body);
  tx.timestamp = ch.next_timestamp++;
  tx.wall_time = clock_();
  tx.tx_id = tx.compute_id();

  receipt = Receipt{ch.blocks.size(), tx.tx_id, tx.seq, tx.timestamp};
  apply_membership_locked(ch, tx);
  ch.pending.push_back(tx);
  if (ch.pending.size() >= options_.block_size) cut_block_locked(ch);
  return tx;
}

void Ledger::apply_membership_locked(ChannelState& ch, const Transaction& tx) {
  if (tx.kind == TxKind::CreateChannel &&
      tx.body.value("op", std::string()) == "add_member") {
    ch.info.members.insert(tx.body.at("member").get<std::string>());
  }
}

void Ledger::cut_block_locked(ChannelState& ch) {
  if (ch.pending.empty()) return;
  Block b;
  b.height = ch.blocks.size();
  b.channel_id = ch.info.channel_id;
  b.prev_hash = ch.blocks.empty() ? zero_hash() : ch.blocks.back().block_hash;
  b.txs = std::move(ch.pending);
  ch.pending.clear();
  b.merkle_root = merkle_root(b.txs);
  b.block_hash = b.compute_hash();
  persist_block_locked(b);
  ch.blocks.push_back(std::move(b));
}

void Ledger::persist_block_locked(const Block& block) {
  if (!options_.persist_dir) return;
  Bytes record;
  append_record(record, block.to_json().dump());
  const std::string path = channel_file(*options_.persist_dir, block.channel_id);
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (f == nullptr) fail(ErrorCode::Internal, "cannot append to " + path);
  const bool ok = std::fwrite(record.data(), 1, record.size(), f) == record.size() &&
                  std::fflush(f) == 0;
  std::fclose(f);
  if (!ok) fail(ErrorCode::Internal, "short write to " + path);
}

std::string Ledger::create_channel_locked(const AccountId& creator, TlpLevel tlp,
                                          std::set<AccountId> members,
                                          const std::string& channel_id) {
  ChannelState ch;
  ch.info.channel_id = channel_id;
  ch.info.tlp = tlp;
  ch.info.creator = creator;
  ch.info.created_at = clock_();
  json member_list = json::array();
  for (const auto& m : members) member_list.push_back(m);
  ch.info.members = std::move(members);
  auto [it, inserted] = channels_.emplace(channel_id, std::move(ch));
  if (!inserted) fail(ErrorCode::DuplicateChannelId, "channel " + channel_id + " exists");

  Receipt receipt;
  try {
    const Transaction tx = order_locked(
        it->second,
        TxDraft{TxKind::CreateChannel, creator,
                json{{"op", "create"}, {"tlp", to_string(tlp)}, {"members", member_list}}},
        receipt);
    cut_block_locked(it->second);
  } catch (...) {
    channels_.erase(it);
    throw;
  }
  return channel_id;
}

std::string Ledger::create_channel(const AccountId& creator, TlpLevel tlp,
                                   std::set<AccountId> members,
                                   std::optional<std::string> channel_id) {
  Transaction genesis;
  std::string id;
  {
    std::unique_lock lock(mu_);
    auto standing = [&](const AccountId& a) {
      return access_ ? access_->standing(a) : AccessView::Standing::Unknown;
    };
    if (creator != kSystemActor) {
      const auto s = standing(creator);
      if (s == AccessView::Standing::Unknown) {
        fail(ErrorCode::NotRegistered, "creator " + creator + " is not registered");
      }
      if (s != AccessView::Standing::Active) {
        fail(ErrorCode::NotActive, "creator " + creator + " is not active");
      }
    }
    if (tlp == TlpLevel::Green || tlp == TlpLevel::White) {
      fail(ErrorCode::SchemaViolation,
           "GREEN and WHITE are network-wide channels; only RED and AMBER can be created");
    }
    if (members.empty()) fail(ErrorCode::EmptyMembership, "RED/AMBER channels need members");
    if (!members.contains(creator)) {
      fail(ErrorCode::EmptyMembership, "member set must include the creator");
    }
    for (const auto& m : members) {
      if (standing(m) == AccessView::Standing::Unknown) {
        fail(ErrorCode::NotRegistered, "member " + m + " is not registered");
      }
    }
    if (channel_id) {
      if (!is_valid_channel_id(*channel_id)) {
        fail(ErrorCode::SchemaViolation, "channel id must match [A-Za-z0-9._-]{1,64}");
      }
      id = *channel_id;
    } else {
      id = "ch-" + crypto::sha256_hex(creator + "/" + std::to_string(next_seq_)).substr(0, 16);
    }
    create_channel_locked(creator, tlp, std::move(members), id);
    genesis = channels_.at(id).blocks.front().txs.front();
  }
  notify(genesis);
  return id;
}

void Ledger::add_member(const std::string& channel_id, const AccountId& by,
                        const AccountId& member) {
  Transaction tx;
  {
    std::unique_lock lock(mu_);
    ChannelState& ch = channel_locked(channel_id);
    if (ch.info.tlp == TlpLevel::Red) {
      fail(ErrorCode::MembershipImmutable, "RED channel membership is fixed at creation");
    }
    if (ch.info.tlp != TlpLevel::Amber) {
      fail(ErrorCode::SchemaViolation, "network-wide channels have no member list");
    }
    if (!check_access_locked(by, ch, AccessMode::Write).allowed) {
      fail(ErrorCode::AccessDenied, by + " may not add members to " + channel_id);
    }
    if (!access_ || access_->standing(member) == AccessView::Standing::Unknown) {
      fail(ErrorCode::NotRegistered, "member " + member + " is not registered");
    }
    if (ch.info.members.contains(member)) return;
    Receipt receipt;
    tx = order_locked(ch, TxDraft{TxKind::CreateChannel, by,
                                  json{{"op", "add_member"}, {"member", member}}},
                      receipt);
  }
  notify(tx);
}

Receipt Ledger::submit_tx(const std::string& channel_id, TxDraft draft) {
  Receipt receipt;
  Transaction tx;
  {
    std::unique_lock lock(mu_);
    ChannelState& ch = channel_locked(channel_id);
    const auto decision = check_access_locked(draft.actor, ch, AccessMode::Write);
    if (!decision.allowed) {
      fail(ErrorCode::AccessDenied, draft.actor + " may not write to " + channel_id +
                                        " (" + std::string(to_string(decision.reason)) + ")");
    }
    tx = order_locked(ch, std::move(draft), receipt);
  }
  notify(tx);
  return receipt;
}

Receipt Ledger::commit(const std::string& channel_id, TxDraft draft) {
  Receipt receipt;
  Transaction tx;
  {
    std::unique_lock lock(mu_);
    tx = order_locked(channel_locked(channel_id), std::move(draft), receipt);
  }
  notify(tx);
  return receipt;
}

AccessDecision Ledger::check_access_locked(const Principal& user, const ChannelState& ch,
                                           AccessMode mode) const {
  const TlpLevel tlp = ch.info.tlp;
  if (tlp == TlpLevel::White && mode == AccessMode::Read) return AccessDecision::allow();
  if (!user) return AccessDecision::deny(DenyReason::Anonymous);
  if (*user == kSystemActor) return AccessDecision::allow();

  using S = AccessView::Standing;
  const S standing = access_ ? access_->standing(*user) : S::Unknown;
  if (standing == S::Removed) return AccessDecision::deny(DenyReason::AccountRemoved);

  if (tlp == TlpLevel::Red || tlp == TlpLevel::Amber) {
    if (!ch.info.members.contains(*user)) return AccessDecision::deny(DenyReason::NotMember);
    return AccessDecision::allow();
  }
  switch (standing) {
    case S::Active:
      return AccessDecision::allow();
    case S::Lapsed:
      return AccessDecision::deny(DenyReason::SubscriptionLapsed);
    case S::Pending:
    case S::Verified:
      return AccessDecision::deny(DenyReason::NotActive);
    case S::Unknown:
    case S::Removed:
      break;
  }
  return AccessDecision::deny(DenyReason::NotRegistered);
}

AccessDecision Ledger::check_access(const Principal& user, const std::string& channel_id,
                                    AccessMode mode) const {
  std::shared_lock lock(mu_);
  return check_access_locked(user, channel_locked(channel_id), mode);
}

std::vector<Transaction> Ledger::read(const std::string& channel_id, const Principal& user,
                                      const TxFilter& filter) const {
  std::shared_lock lock(mu_);
  const ChannelState& ch = channel_locked(channel_id);
  const auto decision = check_access_locked(user, ch, AccessMode::Read);
  if (!decision.allowed) {
    fail(ErrorCode::AccessDenied, "read of " + channel_id + " denied (" +
                                      std::string(to_string(decision.reason)) + ")");
  }
  std::vector<Transaction> out;
  for (const auto& b : ch.blocks) {
    for (const auto& tx : b.txs) {
      if (filter.kind && tx.kind != *filter.kind) continue;
      if (filter.since_timestamp && tx.timestamp < *filter.since_timestamp) continue;
      if (filter.until_timestamp && tx.timestamp > *filter.until_timestamp) continue;
      out.push_back(tx);
    }
  }
  return out;
}

std::vector<Transaction> Ledger::transactions(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  std::vector<Transaction> out;
  for (const auto& b : channel_locked(channel_id).blocks) {
    out.insert(out.end(), b.txs.begin(), b.txs.end());
  }
  return out;
}

std::vector<Transaction> Ledger::all_transactions() const {
  std::shared_lock lock(mu_);
  std::vector<Transaction> out;
  for (const auto& [id, ch] : channels_) {
    for (const auto& b : ch.blocks) out.insert(out.end(), b.txs.begin(), b.txs.end());
    out.insert(out.end(), ch.pending.begin(), ch.pending.end());
  }
  std::sort(out.begin(), out.end(),
            [](const Transaction& a, const Transaction& b) { return a.seq < b.seq; });
  return out;
}

bool Ledger::verify_chain(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  return verify_blocks(channel_locked(channel_id).blocks);
}

bool Ledger::verify_all() const {
  std::shared_lock lock(mu_);
  return std::all_of(channels_.begin(), channels_.end(),
                     [](const auto& kv) { return verify_blocks(kv.second.blocks); });
}

void Ledger::flush() {
  std::unique_lock lock(mu_);
  for (auto& [id, ch] : channels_) cut_block_locked(ch);
}

bool Ledger::has_channel(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  return channels_.contains(channel_id);
}

Channel Ledger::channel(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  return channel_locked(channel_id).info;
}

std::vector<std::string> Ledger::channel_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, ch] : channels_) out.push_back(id);
  return out;
}

std::vector<Block> Ledger::blocks(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  return channel_locked(channel_id).blocks;
}

std::uint64_t Ledger::height(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  return channel_locked(channel_id).blocks.size();
}

std::uint64_t Ledger::next_seq() const {
  std::shared_lock lock(mu_);
  return next_seq_;
}

Bytes Ledger::export_records(const std::string& channel_id) const {
  std::shared_lock lock(mu_);
  Bytes out;
  for (const auto& b : channel_locked(channel_id).blocks) append_record(out, b.to_json().dump());
  return out;
}

std::string Ledger::digest() const {
  std::shared_lock lock(mu_);
  json heads = json::object();
  for (const auto& [id, ch] : channels_) {
    heads[id] = ch.blocks.empty() ? zero_hash() : ch.blocks.back().block_hash;
  }
  return crypto::sha256_hex(heads.dump());
}

Block& Ledger::mutable_block_for_testing(const std::string& channel_id, std::uint64_t height) {
  std::unique_lock lock(mu_);
  auto& blocks = channel_locked(channel_id).blocks;
  if (height >= blocks.size()) fail(ErrorCode::NotFound, "no such block");
  return blocks[height];
}

}  // namespace ctinet

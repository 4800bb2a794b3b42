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

#include "ctinet/exchange.hpp"

#include <algorithm>
#include <array>
#include <mutex>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kStatusNames{
    "Submitted", "UnderVerification", "Accepted", "Rejected", "Duplicate"};
constexpr std::array<std::string_view, 4> kOrderNames{"Placed", "KeyDelivered",
                                                      "Confirmed", "Failed"};
constexpr std::array<std::string_view, 5> kFilterKeys{
    "industry", "ics_type", "vulnerability", "attack_type", "tlp"};

const std::string kNetwork(kNetworkChannel);
const std::string kPublic(kPublicChannel);

std::uint64_t round_div(std::uint64_t num, std::uint64_t den) {
  return (2 * num + den) / (2 * den);
}

json slot_json(const SlotState& s) {
  return json{{"verifier", s.verifier},
              {"round", s.round},
              {"sealed", s.sealed},
              {"key_blob", s.key_blob},
              {"assigned_at", s.assigned_at},
              {"previous", s.previous}};
}

json verdict_json(const VerdictRecord& v) {
  return json{{"verifier", v.verifier},
              {"slot", v.slot},
              {"accuracy", v.accuracy},
              {"usability", v.usability},
              {"relevance", v.relevance},
              {"duplicate_flag", v.duplicate_flag},
              {"report", v.report},
              {"key_release", v.key_release},
              {"timestamp", v.timestamp}};
}

void check_score(std::uint32_t score, const char* axis) {
  if (score < 1 || score > 5) {
    fail(ErrorCode::ScoreOutOfRange,
         std::string(axis) + " must be in [1, 5], got " + std::to_string(score));
  }
}

}  // namespace

std::string_view to_string(CtiStatus status) {
  return kStatusNames[static_cast<std::size_t>(status)];
}

std::optional<CtiStatus> cti_status_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == name) return static_cast<CtiStatus>(i);
  }
  return std::nullopt;
}

std::string_view to_string(OrderState state) {
  return kOrderNames[static_cast<std::size_t>(state)];
}

json CtiMetadata::to_json() const {
  return json{{"title", title},
              {"description", description},
              {"industry", industry},
              {"ics_type", ics_type},
              {"vulnerability", vulnerability},
              {"attack_type", attack_type},
              {"tlp", ctinet::to_string(tlp)},
              {"anonymized", anonymized},
              {"format_version", format_version}};
}

std::string cti_fingerprint(ByteView plaintext) {
  crypto::Sha256 h;
  h.update(std::string_view("ctinet/fingerprint/v1"));
  h.update(plaintext);
  return to_hex(h.finish());
}

void ExchangeParams::validate() const {
  if (pass_mean_milli < 1000 || pass_mean_milli > 5000) {
    fail(ErrorCode::ConfigInvalid, "quality threshold must be within [1.0, 5.0]");
  }
  if (accept_passes < 1 || accept_passes > kVerifierCount || duplicate_flags < 1 ||
      duplicate_flags > kVerifierCount) {
    fail(ErrorCode::ConfigInvalid, "pass and duplicate counts must be within [1, 3]");
  }
  if (verifier_timeout <= 0) fail(ErrorCode::ConfigInvalid, "verifier timeout must be positive");
  if (min_ratings < 1) fail(ErrorCode::ConfigInvalid, "minimum ratings must be >= 1");
  if (discrepancy_milli > 4000) {
    fail(ErrorCode::ConfigInvalid, "discrepancy threshold must be within [0, 4.0]");
  }
}

std::set<AccountId> CtiPackage::ever_assigned() const {
  std::set<AccountId> out;
  for (const auto& s : slots) {
    out.insert(s.verifier);
    out.insert(s.previous.begin(), s.previous.end());
  }
  return out;
}

std::optional<std::size_t> CtiPackage::slot_of(const AccountId& verifier) const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].verifier == verifier) return i;
  }
  return std::nullopt;
}

json CtiPackage::to_json() const {
  json j{{"submission_id", submission_id},
         {"contributor", contributor},
         {"metadata", metadata},
         {"fingerprint", fingerprint},
         {"status", to_string(status)},
         {"home_channel", home_channel},
         {"tlp", ctinet::to_string(tlp)},
         {"envelope", envelope ? envelope->to_json() : json(nullptr)},
         {"slots", json::array()},
         {"verdicts", json::array()},
         {"rounds", rounds},
         {"submitted_ts", submitted_ts},
         {"submitted_at", submitted_at},
         {"assigned_at", assigned_at},
         {"envelope_at", envelope_at},
         {"passes", passes},
         {"forced", forced}};
  for (const auto& s : slots) j["slots"].push_back(slot_json(s));
  for (const auto& [slot, v] : verdicts) j["verdicts"].push_back(verdict_json(v));
  return j;
}

json QualityDecision::to_json() const {
  json d = json::array();
  for (const auto& [who, pts] : discounts_issued) d.push_back({{"account_id", who}, {"points", pts}});
  return json{{"submission_id", submission_id},
              {"outcome", to_string(outcome)},
              {"passes", passes},
              {"discounts_issued", d},
              {"forced", forced}};
}

json Listing::to_json() const {
  return json{{"submission_id", submission_id},
              {"home_channel", home_channel},
              {"tlp", ctinet::to_string(tlp)},
              {"contributor", contributor},
              {"metadata", metadata},
              {"listed_ts", listed_ts}};
}

json Delivery::to_json() const {
  return json{{"source", source}, {"slot", slot}, {"key_blob", key_blob}, {"ciphertext", ciphertext}};
}

json Order::to_json() const {
  json d = json::array();
  for (const auto& x : deliveries) d.push_back(x.to_json());
  return json{{"order_id", order_id},
              {"consumer", consumer},
              {"submission_id", submission_id},
              {"home_channel", home_channel},
              {"deliveries", d},
              {"state", to_string(state)},
              {"rating", rating ? json(*rating) : json(nullptr)}};
}

json CrossCheck::to_json() const {
  return json{{"submission_id", submission_id},
              {"ratings", ratings},
              {"consumer_mean_milli", consumer_mean_milli},
              {"verifier_mean_milli", verifier_mean_milli},
              {"gap_milli", gap_milli},
              {"discrepancy", discrepancy}};
}

json AuthorityReport::to_json() const {
  return json{{"report_id", report_id},
              {"contributor", contributor},
              {"authority", authority},
              {"channel_id", channel_id},
              {"metadata", metadata},
              {"envelope", envelope.to_json()},
              {"timestamp", timestamp},
              {"wall_time", wall_time}};
}

ListingFilter ListingFilter::from_map(const std::map<std::string, std::string>& kv) {
  ListingFilter f;
  for (const auto& [k, v] : kv) {
    if (std::find(kFilterKeys.begin(), kFilterKeys.end(), k) == kFilterKeys.end()) {
      fail(ErrorCode::SchemaViolation, "unknown marketplace filter '" + k + "'");
    }
    if (v.empty()) continue;
    if (k == "tlp") {
      auto t = tlp_from_string(v);
      if (!t) fail(ErrorCode::SchemaViolation, "unknown TLP level '" + v + "'");
      f.fields[k] = std::string(to_string(*t));
    } else {
      f.fields[k] = v;
    }
  }
  return f;
}

bool ListingFilter::matches(const Listing& listing) const {
  for (const auto& [k, v] : fields) {
    const std::string actual = k == "tlp" ? std::string(to_string(listing.tlp))
                                          : listing.metadata.value(k, std::string());
    if (actual != v) return false;
  }
  return true;
}

QualityDecision decide(const std::vector<VerdictRecord>& verdicts, const ExchangeParams& params) {
  QualityDecision d;
  std::uint32_t passes = 0;
  std::uint32_t flags = 0;
  for (const auto& v : verdicts) {
    const bool pass =
        std::uint64_t{v.sum()} * 1000 >= 3ULL * params.pass_mean_milli && !v.duplicate_flag;
    d.passes.push_back(pass);
    passes += pass ? 1 : 0;
    flags += v.duplicate_flag ? 1 : 0;
  }
  if (flags >= params.duplicate_flags) {
    d.outcome = CtiStatus::Duplicate;
  } else if (passes >= params.accept_passes) {
    d.outcome = CtiStatus::Accepted;
  } else {
    d.outcome = CtiStatus::Rejected;
  }
  return d;
}

CrossCheck compare_ratings(const std::vector<std::uint32_t>& consumer,
                           const std::vector<VerdictRecord>& verdicts,
                           const ExchangeParams& params) {
  CrossCheck c;
  c.ratings = consumer.size();
  if (consumer.size() < params.min_ratings || consumer.empty()) {
    fail(ErrorCode::InsufficientRatings, "need at least " + std::to_string(params.min_ratings) +
                                             " consumer ratings, have " +
                                             std::to_string(consumer.size()));
  }
  if (verdicts.empty()) fail(ErrorCode::VerdictsIncomplete, "no verifier verdicts to compare");
  std::uint64_t sum_c = 0;
  for (auto r : consumer) sum_c += r;
  std::uint64_t sum_v = 0;
  for (const auto& v : verdicts) sum_v += v.sum();
  const std::uint64_t n_c = consumer.size();
  const std::uint64_t n_v = 3 * verdicts.size();
  // Exact comparison over the common denominator n_c * n_v.
  const std::uint64_t a = sum_c * n_v;
  const std::uint64_t b = sum_v * n_c;
  const std::uint64_t diff = a > b ? a - b : b - a;
  const std::uint64_t den = n_c * n_v;
  c.consumer_mean_milli = round_div(sum_c * 1000, n_c);
  c.verifier_mean_milli = round_div(sum_v * 1000, n_v);
  c.gap_milli = round_div(diff * 1000, den);
  c.discrepancy = diff * 1000 > std::uint64_t{params.discrepancy_milli} * den;
  return c;
}

// --- ExchangeState -------------------------------------------------------

void ExchangeState::apply(const Transaction& tx) {
  const json& b = tx.body;
  switch (tx.kind) {
    case TxKind::SubmitCti: {
      const std::string sid = b.at("submission_id").get<std::string>();
      if (b.at("op") == "submit") {
        CtiPackage p;
        p.submission_id = sid;
        p.contributor = b.at("contributor").get<std::string>();
        p.metadata = b.at("metadata");
        p.metadata["created_at"] = tx.timestamp;
        p.fingerprint = b.at("fingerprint").get<std::string>();
        p.status = *cti_status_from_string(b.at("status").get<std::string>());
        p.home_channel = tx.channel_id;
        p.tlp = *tlp_from_string(p.metadata.at("tlp").get<std::string>());
        p.submitted_ts = tx.timestamp;
        p.submitted_at = tx.wall_time;
        packages_[sid] = std::move(p);
      } else {
        CtiPackage& p = packages_.at(sid);
        p.envelope = EnvelopeSet::from_json(b.at("envelope"));
        p.envelope_at = tx.wall_time;
        for (auto& s : p.slots) {
          s.assigned_at = tx.wall_time;
          s.sealed = true;
        }
      }
      break;
    }
    case TxKind::AssignVerifiers: {
      CtiPackage& p = packages_.at(b.at("submission_id").get<std::string>());
      if (b.at("op") == "assign") {
        p.slots.clear();
        for (const auto& v : b.at("verifiers")) {
          SlotState s;
          s.verifier = v.get<std::string>();
          s.assigned_at = tx.wall_time;
          p.slots.push_back(std::move(s));
        }
        p.status = CtiStatus::UnderVerification;
        p.assigned_at = tx.wall_time;
      } else {
        SlotState& s = p.slots.at(b.at("slot").get<std::size_t>());
        s.previous.push_back(s.verifier);
        s.verifier = b.at("verifier").get<std::string>();
        s.round = b.at("round").get<std::uint32_t>();
        s.sealed = false;
        s.key_blob = b.value("key_blob", std::string());
        s.assigned_at = tx.wall_time;
        if (b.at("reason") == "timeout") p.rounds = std::max(p.rounds, s.round);
      }
      break;
    }
    case TxKind::SubmitVerdict: {
      CtiPackage& p = packages_.at(b.at("submission_id").get<std::string>());
      VerdictRecord v;
      v.verifier = b.at("verifier").get<std::string>();
      v.slot = p.slot_of(v.verifier).value();
      v.accuracy = b.at("accuracy").get<std::uint32_t>();
      v.usability = b.at("usability").get<std::uint32_t>();
      v.relevance = b.at("relevance").get<std::uint32_t>();
      v.duplicate_flag = b.at("duplicate_flag").get<bool>();
      v.report = b.at("report").get<std::string>();
      v.key_release = b.value("key_release", std::string());
      v.timestamp = tx.timestamp;
      p.verdicts[v.slot] = std::move(v);
      break;
    }
    case TxKind::FinalizeVerification: {
      CtiPackage& p = packages_.at(b.at("submission_id").get<std::string>());
      p.status = *cti_status_from_string(b.at("outcome").get<std::string>());
      p.passes = b.at("passes").get<std::vector<bool>>();
      p.forced = b.at("forced").get<bool>();
      break;
    }
    case TxKind::PublishListing: {
      const std::string sid = b.at("submission_id").get<std::string>();
      if (listings_.contains(sid)) break;
      Listing l;
      l.submission_id = sid;
      l.home_channel = b.at("home_channel").get<std::string>();
      l.tlp = *tlp_from_string(b.at("tlp").get<std::string>());
      l.contributor = b.at("contributor").get<std::string>();
      l.metadata = b.at("metadata");
      l.listed_ts = tx.timestamp;
      listings_[sid] = std::move(l);
      break;
    }
    case TxKind::PlaceOrder: {
      Order o;
      o.order_id = b.at("order_id").get<std::string>();
      o.consumer = b.at("consumer").get<std::string>();
      o.submission_id = b.at("submission_id").get<std::string>();
      o.home_channel = tx.channel_id;
      orders_[o.order_id] = std::move(o);
      break;
    }
    case TxKind::DeliverKey: {
      Order& o = orders_.at(b.at("order_id").get<std::string>());
      o.deliveries.push_back(Delivery{b.at("source").get<std::string>(),
                                      b.at("slot").get<std::uint32_t>(),
                                      b.at("key_blob").get<std::string>(),
                                      b.at("ciphertext").get<std::string>()});
      o.state = OrderState::KeyDelivered;
      break;
    }
    case TxKind::ConfirmDecryption: {
      Order& o = orders_.at(b.at("order_id").get<std::string>());
      if (b.at("success").get<bool>()) {
        o.state = OrderState::Confirmed;
        o.rating = b.at("rating").get<std::uint32_t>();
      } else {
        o.state = OrderState::Failed;
      }
      break;
    }
    case TxKind::RateCti: {
      const std::string sid = b.at("submission_id").get<std::string>();
      if (b.at("op") == "consumer") {
        ratings_[sid].push_back(b.at("rating").get<std::uint32_t>());
      } else {
        CrossCheck c;
        c.submission_id = sid;
        c.ratings = b.at("ratings").get<std::uint64_t>();
        c.consumer_mean_milli = b.at("consumer_mean_milli").get<std::uint64_t>();
        c.verifier_mean_milli = b.at("verifier_mean_milli").get<std::uint64_t>();
        c.gap_milli = b.at("gap_milli").get<std::uint64_t>();
        c.discrepancy = b.at("discrepancy").get<bool>();
        crosschecks_[sid] = c;
      }
      break;
    }
    case TxKind::ReportToAuthority: {
      json metadata = b.at("metadata");
      metadata["created_at"] = tx.timestamp;
      AuthorityReport r{b.at("report_id").get<std::string>(),
                        b.at("contributor").get<std::string>(),
                        b.at("authority").get<std::string>(),
                        tx.channel_id,
                        std::move(metadata),
                        EnvelopeSet::from_json(b.at("envelope")),
                        tx.timestamp,
                        tx.wall_time};
      const std::string id = r.report_id;
      reports_.insert_or_assign(id, std::move(r));
      break;
    }
    default:
      break;
  }
}

json ExchangeState::to_json() const {
  json j{{"packages", json::object()},
         {"listings", json::object()},
         {"orders", json::object()},
         {"ratings", ratings_},
         {"crosschecks", json::object()},
         {"reports", json::object()}};
  for (const auto& [k, v] : packages_) j["packages"][k] = v.to_json();
  for (const auto& [k, v] : listings_) j["listings"][k] = v.to_json();
  for (const auto& [k, v] : orders_) j["orders"][k] = v.to_json();
  for (const auto& [k, v] : crosschecks_) j["crosschecks"][k] = v.to_json();
  for (const auto& [k, v] : reports_) j["reports"][k] = v.to_json();
  return j;
}

std::string ExchangeState::digest() const { return crypto::sha256_hex(to_json().dump()); }

// --- Exchange ------------------------------------------------------------

Exchange::Exchange(Ledger& ledger, ContentStore& store, Registry& registry,
                   ExchangeParams params, KeyPair escrow)
    : ledger_(ledger), store_(store), registry_(registry), params_(params),
      escrow_(std::move(escrow)) {
  params_.validate();
}

void Exchange::apply(const Transaction& tx) {
  std::unique_lock lock(mu_);
  state_.apply(tx);
}

std::string Exchange::make_id(std::string_view prefix, const std::string& seed) const {
  return std::string(prefix) +
         crypto::sha256_hex(seed + "|" + std::to_string(ledger_.next_seq())).substr(0, 16);
}

CtiPackage Exchange::require_package(const std::string& submission_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.packages().find(submission_id);
  if (it == state_.packages().end()) fail(ErrorCode::NotFound, "no submission " + submission_id);
  return it->second;
}

Order Exchange::require_order(const std::string& order_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.orders().find(order_id);
  if (it == state_.orders().end()) fail(ErrorCode::NotFound, "no order " + order_id);
  return it->second;
}

void Exchange::require_active(const AccountId& account) const {
  const auto s = registry_.standing(account);
  if (s == AccessView::Standing::Unknown) fail(ErrorCode::NotRegistered, account + " is not registered");
  if (s != AccessView::Standing::Active) fail(ErrorCode::NotActive, account + " is not active");
}

std::string Exchange::submit_cti(const AccountId& contributor, const json& metadata,
                                 const std::string& fingerprint,
                                 std::optional<std::string> channel) {
  require_active(contributor);
  if (!registry_.account(contributor)->has_role(Role::Contributor)) {
    fail(ErrorCode::AccessDenied, contributor + " does not hold the Contributor role");
  }
  validate_metadata(metadata);
  if (metadata.contains("created_at")) {
    fail(ErrorCode::SchemaViolation, "metadata.created_at is set by the ledger");
  }
  for (const char* tag : {"title", "industry", "ics_type", "vulnerability", "attack_type"}) {
    if (metadata.at(tag).get<std::string>().empty()) {
      fail(ErrorCode::SchemaViolation, std::string("metadata.") + tag + " must be non-empty");
    }
  }
  if (metadata.at("format_version") != kFormatVersion) {
    fail(ErrorCode::SchemaViolation, "unsupported metadata format_version");
  }
  if (!metadata.at("anonymized").get<bool>()) {
    fail(ErrorCode::NotAnonymized, "CTI must be anonymized before submission");
  }
  if (!is_lower_hex(fingerprint, 64)) {
    fail(ErrorCode::SchemaViolation, "fingerprint must be 64 lowercase hex chars");
  }
  const TlpLevel tlp = *tlp_from_string(metadata.at("tlp").get<std::string>());
  std::string home = kNetwork;
  if (tlp == TlpLevel::Red || tlp == TlpLevel::Amber) {
    if (!channel) fail(ErrorCode::SchemaViolation, "RED and AMBER CTI needs a target channel");
    const Channel ch = ledger_.channel(*channel);
    if (ch.tlp != tlp) fail(ErrorCode::SchemaViolation, "channel TLP does not match the metadata");
    if (!ch.members.contains(contributor)) {
      fail(ErrorCode::AccessDenied, contributor + " is not a member of " + *channel);
    }
    home = *channel;
  } else if (channel && *channel != kNetwork) {
    fail(ErrorCode::SchemaViolation, "GREEN and WHITE CTI is shared on the network channel");
  }

  bool duplicate = false;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, p] : state_.packages()) {
      duplicate = duplicate || (p.status == CtiStatus::Accepted && p.fingerprint == fingerprint);
    }
  }
  const std::string sid = make_id("cti-", contributor + "|" + fingerprint);
  ledger_.commit(home, TxDraft{TxKind::SubmitCti, contributor,
                               json{{"op", "submit"},
                                    {"submission_id", sid},
                                    {"contributor", contributor},
                                    {"metadata", metadata},
                                    {"fingerprint", fingerprint},
                                    {"status", duplicate ? "Duplicate" : "Submitted"}}});
  return sid;
}

std::vector<AccountId> Exchange::eligible_pool(const CtiPackage& pkg) const {
  std::vector<AccountId> pool = registry_.verifier_pool();
  std::optional<Channel> ch;
  if (pkg.tlp == TlpLevel::Red || pkg.tlp == TlpLevel::Amber) ch = ledger_.channel(pkg.home_channel);
  std::erase_if(pool, [&](const AccountId& v) {
    return v == pkg.contributor || (ch && !ch->members.contains(v));
  });
  return pool;
}

std::array<AccountId, kVerifierCount> Exchange::assign_verifiers(const std::string& submission_id,
                                                                 Rng& rng) {
  const CtiPackage pkg = require_package(submission_id);
  if (pkg.status != CtiStatus::Submitted) {
    fail(ErrorCode::WrongState, submission_id + " is " + std::string(to_string(pkg.status)));
  }
  std::vector<AccountId> pool = eligible_pool(pkg);
  if (pool.size() < kVerifierCount) {
    fail(ErrorCode::InsufficientVerifiers,
         "need 3 eligible verifiers, have " + std::to_string(pool.size()));
  }
  // Partial Fisher-Yates: uniform draw without replacement.
  std::array<AccountId, kVerifierCount> chosen;
  for (std::size_t i = 0; i < kVerifierCount; ++i) {
    const std::size_t j = i + rng.uniform(pool.size() - i);
    std::swap(pool[i], pool[j]);
    chosen[i] = pool[i];
  }
  ledger_.commit(pkg.home_channel,
                 TxDraft{TxKind::AssignVerifiers, std::string(kSystemActor),
                         json{{"op", "assign"},
                              {"submission_id", submission_id},
                              {"verifiers", chosen}}});
  return chosen;
}

void Exchange::attach_envelope(const AccountId& contributor, const std::string& submission_id,
                               const EnvelopeSet& envelope) {
  const CtiPackage pkg = require_package(submission_id);
  if (pkg.contributor != contributor) {
    fail(ErrorCode::AccessDenied, "only the contributor may attach the envelope");
  }
  if (pkg.status != CtiStatus::UnderVerification || pkg.envelope) {
    fail(ErrorCode::WrongState, "envelope can only be attached once verifiers are assigned");
  }
  for (const auto& id : envelope.content_ids()) {
    if (!store_.contains(id)) {
      fail(ErrorCode::DanglingContent, "content " + id.str() + " is not in the store");
    }
  }
  ledger_.commit(pkg.home_channel,
                 TxDraft{TxKind::SubmitCti, contributor,
                         json{{"op", "envelope"},
                              {"submission_id", submission_id},
                              {"envelope", envelope.to_json()}}});
}

Receipt Exchange::submit_verdict(const VerdictInput& in) {
  const CtiPackage pkg = require_package(in.submission_id);
  const auto slot = pkg.slot_of(in.verifier);
  if (!slot) {
    const auto past = pkg.ever_assigned();
    fail(ErrorCode::NotAssigned, in.verifier + " is not assigned to " + in.submission_id +
                                     (past.contains(in.verifier) ? " (replaced)" : ""));
  }
  if (pkg.verdicts.contains(*slot)) {
    fail(ErrorCode::DuplicateVerdict, in.verifier + " already submitted a verdict");
  }
  if (pkg.status != CtiStatus::UnderVerification || !pkg.envelope) {
    fail(ErrorCode::WrongState, in.submission_id + " is not awaiting verdicts");
  }
  check_score(in.accuracy, "accuracy");
  check_score(in.usability, "usability");
  check_score(in.relevance, "relevance");
  if (in.report.empty()) fail(ErrorCode::SchemaViolation, "verdict report is empty");

  const SlotState& s = pkg.slots[*slot];
  json body{{"submission_id", in.submission_id},
            {"verifier", in.verifier},
            {"accuracy", in.accuracy},
            {"usability", in.usability},
            {"relevance", in.relevance},
            {"duplicate_flag", in.duplicate_flag}};
  if (s.sealed) {
    // An original verifier hands kv_i to the escrow so it can serve as a
    // fallback key. Check it actually opens their copy.
    if (!in.key_release) {
      fail(ErrorCode::SchemaViolation, "original verifiers must release their key to escrow");
    }
    const SymmetricKey kv = unwrap_key(*in.key_release, escrow_.secret_key);
    (void)decrypt_object(kv, store_.get(pkg.envelope->verifier_copies[*slot]));
    body["key_release"] = in.key_release->hex();
  } else if (in.key_release) {
    fail(ErrorCode::SchemaViolation, "replacement verifiers hold no verifier key to release");
  }
  body["report"] = store_.put(in.report).str();
  const Receipt r = ledger_.commit(pkg.home_channel,
                                   TxDraft{TxKind::SubmitVerdict, in.verifier, std::move(body)});
  return r;
}

QualityDecision Exchange::finalize_locked_out(const CtiPackage& pkg, bool forced) {
  std::vector<VerdictRecord> verdicts;
  for (const auto& [slot, v] : pkg.verdicts) verdicts.push_back(v);
  QualityDecision d = decide(verdicts, params_);
  if (forced && verdicts.size() < 2) d.outcome = CtiStatus::Rejected;
  d.submission_id = pkg.submission_id;
  d.forced = forced;

  json verifiers = json::array();
  for (const auto& v : verdicts) verifiers.push_back(v.verifier);
  const auto flags = static_cast<std::uint64_t>(std::count_if(
      verdicts.begin(), verdicts.end(), [](const auto& v) { return v.duplicate_flag; }));
  ledger_.commit(pkg.home_channel,
                 TxDraft{TxKind::FinalizeVerification, std::string(kSystemActor),
                         json{{"submission_id", pkg.submission_id},
                              {"outcome", to_string(d.outcome)},
                              {"verifiers", verifiers},
                              {"passes", d.passes},
                              {"duplicate_flags", flags},
                              {"forced", forced}}});

  const auto& fees = registry_.fees();
  for (const auto& v : verdicts) {
    registry_.issue_discount(v.verifier, fees.verifier_discount, Role::Verifier, pkg.submission_id);
    d.discounts_issued.emplace_back(v.verifier, fees.verifier_discount);
  }
  if (d.outcome == CtiStatus::Accepted) {
    registry_.issue_discount(pkg.contributor, fees.contributor_discount, Role::Contributor,
                             pkg.submission_id);
    d.discounts_issued.emplace_back(pkg.contributor, fees.contributor_discount);

    json metadata = pkg.metadata;
    const json body{{"submission_id", pkg.submission_id},
                    {"home_channel", pkg.home_channel},
                    {"tlp", to_string(pkg.tlp)},
                    {"contributor", pkg.contributor},
                    {"metadata", metadata}};
    ledger_.commit(pkg.home_channel, TxDraft{TxKind::PublishListing, std::string(kSystemActor), body});
    if (pkg.tlp == TlpLevel::White) {
      ledger_.commit(kPublic, TxDraft{TxKind::PublishListing, std::string(kSystemActor), body});
    }
  }
  return d;
}

QualityDecision Exchange::finalize_verification(const std::string& submission_id) {
  const CtiPackage pkg = require_package(submission_id);
  if (pkg.status != CtiStatus::UnderVerification) {
    fail(ErrorCode::WrongState, submission_id + " is " + std::string(to_string(pkg.status)));
  }
  if (pkg.verdicts.size() < kVerifierCount) {
    fail(ErrorCode::VerdictsIncomplete, std::to_string(pkg.verdicts.size()) + " of 3 verdicts in");
  }
  return finalize_locked_out(pkg, false);
}

std::vector<Listing> Exchange::list_marketplace(const Principal& user, const ListingFilter& filter,
                                                const std::optional<std::string>& channel) const {
  std::vector<Listing> all;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, l] : state_.listings()) {
      if (filter.matches(l)) all.push_back(l);
    }
  }
  auto denied = [&](const std::string& ch) {
    const auto d = ledger_.check_access(user, ch, AccessMode::Read);
    if (!d.allowed) {
      fail(ErrorCode::AccessDenied, "marketplace on " + ch + " is not readable (" +
                                        std::string(to_string(d.reason)) + ")");
    }
  };
  std::vector<Listing> out;
  if (channel) {
    denied(*channel);
    for (auto& l : all) {
      const bool on_channel = *channel == kPublic ? l.tlp == TlpLevel::White
                                                  : l.home_channel == *channel;
      if (on_channel) out.push_back(std::move(l));
    }
    return out;
  }
  if (!user) {
    for (auto& l : all) {
      if (l.tlp == TlpLevel::White) out.push_back(std::move(l));
    }
    return out;
  }
  denied(kNetwork);
  for (auto& l : all) {
    if (ledger_.check_access(user, l.home_channel, AccessMode::Read).allowed) {
      out.push_back(std::move(l));
    }
  }
  return out;
}

std::string Exchange::place_order(const AccountId& consumer, const std::string& submission_id) {
  require_active(consumer);
  std::optional<Listing> listing;
  {
    std::shared_lock lock(mu_);
    auto it = state_.listings().find(submission_id);
    if (it != state_.listings().end()) listing = it->second;
  }
  if (!listing) fail(ErrorCode::NotListed, submission_id + " is not on the marketplace");
  if (!ledger_.check_access(consumer, listing->home_channel, AccessMode::Read).allowed) {
    fail(ErrorCode::AccessDenied, consumer + " cannot access " + listing->home_channel);
  }
  const std::string oid = make_id("ord-", consumer + "|" + submission_id);
  ledger_.commit(listing->home_channel,
                 TxDraft{TxKind::PlaceOrder, consumer,
                         json{{"order_id", oid},
                              {"submission_id", submission_id},
                              {"consumer", consumer}}});
  return oid;
}

Delivery Exchange::deliver_key(const AccountId& actor, const std::string& order_id, Rng& rng) {
  const Order o = require_order(order_id);
  if (actor != o.consumer && actor != kSystemActor) {
    fail(ErrorCode::AccessDenied, "order " + order_id + " belongs to another account");
  }
  if (o.state != OrderState::Placed && o.state != OrderState::Failed) {
    fail(ErrorCode::WrongState, "order is " + std::string(to_string(o.state)));
  }
  if (o.deliveries.size() >= 1 + kVerifierCount) {
    fail(ErrorCode::NoKeysRemaining, "all four keys have been delivered");
  }
  const CtiPackage pkg = require_package(o.submission_id);
  const PublicKey consumer_pub = registry_.public_key_of(o.consumer);
  Delivery d;
  if (o.deliveries.empty()) {
    d.source = "consumer";
    d.slot = 0;
    d.key_blob = rewrap_for(consumer_pub, pkg.envelope->escrow_wrapped_consumer_key,
                            escrow_.secret_key, rng)
                     .hex();
    d.ciphertext = pkg.envelope->consumer_copy.str();
  } else {
    const std::uint32_t last = o.deliveries.back().slot;
    std::optional<std::size_t> next;
    for (std::size_t i = last; i < kVerifierCount && !next; ++i) {
      auto it = pkg.verdicts.find(i);
      if (it != pkg.verdicts.end() && !it->second.key_release.empty()) next = i;
    }
    if (!next) fail(ErrorCode::NoKeysRemaining, "no further verifier keys were released");
    d.source = "verifier";
    d.slot = static_cast<std::uint32_t>(*next + 1);
    d.key_blob = rewrap_for(consumer_pub, WrappedKey::from_hex(pkg.verdicts.at(*next).key_release),
                            escrow_.secret_key, rng)
                     .hex();
    d.ciphertext = pkg.envelope->verifier_copies[*next].str();
  }
  ledger_.commit(o.home_channel, TxDraft{TxKind::DeliverKey, std::string(kSystemActor),
                                         json{{"order_id", order_id},
                                              {"source", d.source},
                                              {"slot", d.slot},
                                              {"key_blob", d.key_blob},
                                              {"ciphertext", d.ciphertext}}});
  return d;
}

OrderState Exchange::confirm_decryption(const AccountId& actor, const std::string& order_id,
                                        bool success, std::optional<std::uint32_t> rating) {
  const Order o = require_order(order_id);
  if (actor != o.consumer) fail(ErrorCode::AccessDenied, "order belongs to another account");
  if (o.state != OrderState::KeyDelivered) {
    fail(ErrorCode::WrongState, "order is " + std::string(to_string(o.state)) +
                                    "; confirmation needs an outstanding delivery");
  }
  json body{{"order_id", order_id}, {"success", success}};
  if (success) {
    if (!rating) fail(ErrorCode::MissingRating, "a successful decryption must carry a rating");
    check_score(*rating, "rating");
    body["rating"] = *rating;
  }
  ledger_.commit(o.home_channel, TxDraft{TxKind::ConfirmDecryption, actor, body});
  if (success) {
    ledger_.commit(o.home_channel, TxDraft{TxKind::RateCti, actor,
                                           json{{"op", "consumer"},
                                                {"order_id", order_id},
                                                {"submission_id", o.submission_id},
                                                {"rating", *rating}}});
  }
  return success ? OrderState::Confirmed : OrderState::Failed;
}

CrossCheck Exchange::crosscheck_ratings(const std::string& submission_id) {
  const CtiPackage pkg = require_package(submission_id);
  std::vector<std::uint32_t> ratings;
  {
    std::shared_lock lock(mu_);
    auto it = state_.ratings().find(submission_id);
    if (it != state_.ratings().end()) ratings = it->second;
  }
  std::vector<VerdictRecord> verdicts;
  for (const auto& [slot, v] : pkg.verdicts) verdicts.push_back(v);
  CrossCheck c = compare_ratings(ratings, verdicts, params_);
  c.submission_id = submission_id;
  ledger_.commit(pkg.home_channel, TxDraft{TxKind::RateCti, std::string(kSystemActor),
                                           json{{"op", "crosscheck"},
                                                {"submission_id", submission_id},
                                                {"ratings", c.ratings},
                                                {"consumer_mean_milli", c.consumer_mean_milli},
                                                {"verifier_mean_milli", c.verifier_mean_milli},
                                                {"gap_milli", c.gap_milli},
                                                {"discrepancy", c.discrepancy}}});
  return c;
}

ReportReceipt Exchange::report_to_authority(const AccountId& contributor, const json& metadata,
                                            const EnvelopeSet& envelope,
                                            const AccountId& authority) {
  require_active(contributor);
  const auto auth = registry_.account(authority);
  if (!auth || !auth->has_role(Role::Authority) || auth->state != AccountState::Active) {
    fail(ErrorCode::NotAuthority, authority + " does not hold the Authority role");
  }
  validate_metadata(metadata);
  if (metadata.contains("created_at")) {
    fail(ErrorCode::SchemaViolation, "metadata.created_at is set by the ledger");
  }
  if (metadata.at("tlp") != "RED") {
    fail(ErrorCode::SchemaViolation, "reports to the Authority are TLP RED");
  }
  for (const auto& id : envelope.content_ids()) {
    if (!store_.contains(id)) {
      fail(ErrorCode::DanglingContent, "content " + id.str() + " is not in the store");
    }
  }
  const std::string channel =
      "red-" + crypto::sha256_hex(contributor + "|" + authority).substr(0, 16);
  if (!ledger_.has_channel(channel)) {
    ledger_.create_channel(contributor, TlpLevel::Red, {contributor, authority}, channel);
  }
  const std::string rid = make_id("rpt-", contributor + "|" + authority);
  const Receipt r = ledger_.submit_tx(channel, TxDraft{TxKind::ReportToAuthority, contributor,
                                                       json{{"report_id", rid},
                                                            {"authority", authority},
                                                            {"contributor", contributor},
                                                            {"metadata", metadata},
                                                            {"envelope", envelope.to_json()}}});
  return ReportReceipt{rid, channel, r.timestamp, r.tx_id};
}

WrappedKey Exchange::fetch_report_key(const AccountId& authority, const std::string& report_id,
                                      Rng& rng) const {
  const auto r = report(report_id);
  if (!r) fail(ErrorCode::NotFound, "no report " + report_id);
  if (r->authority != authority) fail(ErrorCode::AccessDenied, "report is addressed elsewhere");
  return rewrap_for(registry_.public_key_of(authority), r->envelope.escrow_wrapped_consumer_key,
                    escrow_.secret_key, rng);
}

bool Exchange::reassign_slot(const CtiPackage& pkg, std::size_t slot, const std::string& reason,
                             std::uint32_t round, Rng& rng, std::set<AccountId>& excluded) {
  std::vector<AccountId> pool = eligible_pool(pkg);
  std::erase_if(pool, [&](const AccountId& v) { return excluded.contains(v); });
  if (pool.empty()) return false;
  const AccountId chosen = pool[rng.uniform(pool.size())];
  excluded.insert(chosen);
  json body{{"op", "reassign"},
            {"submission_id", pkg.submission_id},
            {"slot", slot},
            {"verifier", chosen},
            {"replaced", pkg.slots[slot].verifier},
            {"reason", reason},
            {"round", round}};
  if (pkg.envelope) {
    body["key_blob"] = rewrap_for(registry_.public_key_of(chosen),
                                  pkg.envelope->escrow_wrapped_consumer_key, escrow_.secret_key, rng)
                           .hex();
  }
  ledger_.commit(pkg.home_channel,
                 TxDraft{TxKind::AssignVerifiers, std::string(kSystemActor), std::move(body)});
  return true;
}

std::vector<std::string> Exchange::reassign_removed(const AccountId& removed, Rng& rng) {
  std::vector<std::string> out;
  for (const auto& pkg : packages()) {
    if (pkg.status != CtiStatus::UnderVerification) continue;
    const auto slot = pkg.slot_of(removed);
    if (!slot || pkg.verdicts.contains(*slot)) continue;
    std::set<AccountId> excluded = pkg.ever_assigned();
    if (reassign_slot(pkg, *slot, "removed", pkg.slots[*slot].round + 1, rng, excluded)) {
      out.push_back(pkg.submission_id + "/" + std::to_string(*slot));
    }
  }
  return out;
}

TickReport Exchange::tick(std::int64_t now, Rng& rng) {
  TickReport report;
  for (const auto& pkg : packages()) {
    if (pkg.status != CtiStatus::UnderVerification) continue;
    if (!pkg.envelope) {
      if (now - pkg.assigned_at >= params_.verifier_timeout) {
        report.finalized.push_back(finalize_locked_out(pkg, true));
      }
      continue;
    }
    std::vector<std::size_t> overdue;
    for (std::size_t i = 0; i < pkg.slots.size(); ++i) {
      if (!pkg.verdicts.contains(i) && now - pkg.slots[i].assigned_at >= params_.verifier_timeout) {
        overdue.push_back(i);
      }
    }
    if (overdue.empty()) continue;
    bool exhausted = pkg.rounds >= params_.max_reassign_rounds;
    std::set<AccountId> excluded = pkg.ever_assigned();
    std::vector<std::size_t> done;
    if (!exhausted) {
      for (std::size_t slot : overdue) {
        if (!reassign_slot(pkg, slot, "timeout", pkg.rounds + 1, rng, excluded)) {
          exhausted = true;
          break;
        }
        report.reassigned.push_back(pkg.submission_id + "/" + std::to_string(slot));
      }
    }
    if (exhausted) report.finalized.push_back(finalize_locked_out(require_package(pkg.submission_id), true));
  }
  return report;
}

std::optional<CtiPackage> Exchange::package(const std::string& submission_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.packages().find(submission_id);
  return it == state_.packages().end() ? std::nullopt : std::optional<CtiPackage>(it->second);
}

std::optional<Order> Exchange::order(const std::string& order_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.orders().find(order_id);
  return it == state_.orders().end() ? std::nullopt : std::optional<Order>(it->second);
}

bool Exchange::is_listed(const std::string& submission_id) const {
  std::shared_lock lock(mu_);
  return state_.listings().contains(submission_id);
}

std::optional<AuthorityReport> Exchange::report(const std::string& report_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.reports().find(report_id);
  return it == state_.reports().end() ? std::nullopt : std::optional<AuthorityReport>(it->second);
}

std::vector<CtiPackage> Exchange::packages() const {
  std::shared_lock lock(mu_);
  std::vector<CtiPackage> out;
  for (const auto& [id, p] : state_.packages()) out.push_back(p);
  return out;
}

std::vector<Order> Exchange::orders() const {
  std::shared_lock lock(mu_);
  std::vector<Order> out;
  for (const auto& [id, o] : state_.orders()) out.push_back(o);
  return out;
}

std::vector<AuthorityReport> Exchange::reports() const {
  std::shared_lock lock(mu_);
  std::vector<AuthorityReport> out;
  for (const auto& [id, r] : state_.reports()) out.push_back(r);
  return out;
}

std::vector<json> Exchange::assignments(const AccountId& verifier) const {
  std::shared_lock lock(mu_);
  std::vector<json> out;
  for (const auto& [id, p] : state_.packages()) {
    if (p.status != CtiStatus::UnderVerification) continue;
    const auto slot = p.slot_of(verifier);
    if (!slot || p.verdicts.contains(*slot)) continue;
    const SlotState& s = p.slots[*slot];
    json a{{"submission_id", id},
           {"slot", *slot},
           {"round", s.round},
           {"metadata", p.metadata},
           {"envelope_attached", p.envelope.has_value()},
           {"due", s.assigned_at + params_.verifier_timeout}};
    if (p.envelope) {
      if (s.sealed) {
        a["ciphertext"] = p.envelope->verifier_copies[*slot].str();
        a["key_blob"] = p.envelope->wrapped_verifier_keys[*slot].hex();
      } else {
        a["ciphertext"] = p.envelope->consumer_copy.str();
        a["key_blob"] = s.key_blob;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string Exchange::digest() const {
  std::shared_lock lock(mu_);
  return state_.digest();
}

json Exchange::to_json() const {
  std::shared_lock lock(mu_);
  return state_.to_json();
}

}  // namespace ctinet

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

// Per-kind body schemas. Bodies are closed records: unknown fields are
// rejected, strings are length-bounded, and anything content-shaped must be
// a CIDv0 reference. That is what keeps payload bytes off the chain.
//
// Kinds that carry several record shapes are discriminated by "op".
// docs/formats.md mirrors these tables.

#include <initializer_list>
#include <map>
#include <utility>

#include "ctinet/content_store.hpp"
#include "ctinet/envelope.hpp"
#include "ctinet/ledger.hpp"

namespace ctinet {

namespace {

using nlohmann::json;

enum class T {
  Name,       // short identifier-ish string, <= 128
  Text,       // free text, <= 4096
  Account,    // account id or "system"
  Uint,
  Int,
  Bool,
  Cid,
  Hash,       // 64 lowercase hex
  PubKey,     // 64 lowercase hex
  Blob,       // wrapped key, 184 lowercase hex
  Tlp,
  Names,      // array of Name
  Accounts,   // array of Account
  Cids,       // array of Cid
  Blobs,      // array of Blob
  Bools,
  Metadata,
  Envelope,
};

struct Field {
  std::string_view name;
  T type;
  bool required = true;
};

using Schema = std::vector<Field>;

constexpr std::size_t kNameMax = 128;
constexpr std::size_t kTextMax = 4096;
constexpr std::size_t kArrayMax = 64;

[[noreturn]] void violation(const std::string& where, const std::string& why) {
  fail(ErrorCode::SchemaViolation, where + ": " + why);
}

void check_string(const json& v, std::size_t max, const std::string& where) {
  if (!v.is_string()) violation(where, "expected string");
  const auto& s = v.get_ref<const std::string&>();
  if (s.size() > max) violation(where, "string longer than " + std::to_string(max));
}

void check_value(const json& v, T type, const std::string& where);

void check_record(const json& body, const Schema& schema,
                  const std::string& where) {
  if (!body.is_object()) violation(where, "expected object");
  for (const auto& [key, value] : body.items()) {
    bool known = false;
    for (const auto& f : schema) known = known || f.name == key;
    if (!known) violation(where, "unexpected field '" + key + "'");
  }
  for (const auto& f : schema) {
    const std::string path = where + "." + std::string(f.name);
    auto it = body.find(std::string(f.name));
    if (it == body.end()) {
      if (f.required) violation(path, "missing");
      continue;
    }
    check_value(*it, f.type, path);
  }
}

const Schema& metadata_schema() {
  static const Schema s{
      {"title", T::Name},          {"description", T::Text},
      {"industry", T::Name},       {"ics_type", T::Name},
      {"vulnerability", T::Name},  {"attack_type", T::Name},
      {"tlp", T::Tlp},             {"anonymized", T::Bool},
      {"format_version", T::Name}, {"created_at", T::Uint, false},
  };
  return s;
}

void check_array(const json& v, T elem, const std::string& where) {
  if (!v.is_array()) violation(where, "expected array");
  if (v.size() > kArrayMax) violation(where, "array too long");
  for (std::size_t i = 0; i < v.size(); ++i) {
    check_value(v[i], elem, where + "[" + std::to_string(i) + "]");
  }
}

void check_value(const json& v, T type, const std::string& where) {
  switch (type) {
    case T::Name:
      check_string(v, kNameMax, where);
      return;
    case T::Text:
      check_string(v, kTextMax, where);
      return;
    case T::Account:
      check_string(v, kNameMax, where);
      if (v.get_ref<const std::string&>().empty()) violation(where, "empty account");
      return;
    case T::Uint:
      if (!v.is_number_integer() ||
          (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        violation(where, "expected unsigned integer");
      }
      return;
    case T::Int:
      if (!v.is_number_integer()) violation(where, "expected integer");
      return;
    case T::Bool:
      if (!v.is_boolean()) violation(where, "expected boolean");
      return;
    case T::Cid:
      if (!v.is_string() || !ContentId::try_parse(v.get<std::string>())) {
        violation(where, "expected CIDv0 content id");
      }
      return;
    case T::Hash:
    case T::PubKey:
      if (!v.is_string() || !is_lower_hex(v.get<std::string>(), 64)) {
        violation(where, "expected 64 lowercase hex chars");
      }
      return;
    case T::Blob:
      if (!v.is_string() ||
          !is_lower_hex(v.get<std::string>(), 2 * kWrappedKeySize)) {
        violation(where, "expected wrapped key blob");
      }
      return;
    case T::Tlp:
      if (!v.is_string() || !tlp_from_string(v.get<std::string>())) {
        violation(where, "expected TLP level");
      }
      return;
    case T::Names:
      check_array(v, T::Name, where);
      return;
    case T::Accounts:
      check_array(v, T::Account, where);
      return;
    case T::Cids:
      check_array(v, T::Cid, where);
      return;
    case T::Blobs:
      check_array(v, T::Blob, where);
      return;
    case T::Bools:
      check_array(v, T::Bool, where);
      return;
    case T::Metadata:
      check_record(v, metadata_schema(), where);
      return;
    case T::Envelope:
      try {
        (void)EnvelopeSet::from_json(v);
      } catch (const Error& e) {
        violation(where, e.what());
      }
      return;
  }
}

using Key = std::pair<TxKind, std::string>;

const std::map<Key, Schema>& schemas() {
  static const std::map<Key, Schema> table{
      {{TxKind::CreateChannel, "create"},
       {{"op", T::Name}, {"tlp", T::Tlp}, {"members", T::Accounts}}},
      {{TxKind::CreateChannel, "add_member"},
       {{"op", T::Name}, {"member", T::Account}}},

      {{TxKind::Register, "request"},
       {{"op", T::Name},
        {"account_id", T::Account},
        {"username", T::Name},
        {"roles", T::Names},
        {"requested_roles", T::Names},
        {"public_key", T::PubKey},
        {"identity", T::Cid}}},
      {{TxKind::Register, "bootstrap"},
       {{"op", T::Name},
        {"account_id", T::Account},
        {"username", T::Name},
        {"roles", T::Names},
        {"public_key", T::PubKey}}},
      {{TxKind::Register, "decision"},
       {{"op", T::Name}, {"account_id", T::Account}, {"decision", T::Name}}},
      {{TxKind::Register, "lapse"},
       {{"op", T::Name}, {"account_id", T::Account}}},

      {{TxKind::CertifyVerifier, ""},
       {{"account_id", T::Account},
        {"cert_id", T::Name},
        {"credentials_digest", T::Hash}}},

      {{TxKind::PayFee, ""},
       {{"account_id", T::Account},
        {"fee", T::Name},
        {"amount_cents", T::Uint},
        {"discount_applied", T::Uint},
        {"expiry", T::Int}}},

      {{TxKind::SubmitCti, "submit"},
       {{"op", T::Name},
        {"submission_id", T::Name},
        {"contributor", T::Account},
        {"metadata", T::Metadata},
        {"fingerprint", T::Hash},
        {"status", T::Name}}},
      {{TxKind::SubmitCti, "envelope"},
       {{"op", T::Name}, {"submission_id", T::Name}, {"envelope", T::Envelope}}},

      {{TxKind::AssignVerifiers, "assign"},
       {{"op", T::Name}, {"submission_id", T::Name}, {"verifiers", T::Accounts}}},
      {{TxKind::AssignVerifiers, "reassign"},
       {{"op", T::Name},
        {"submission_id", T::Name},
        {"slot", T::Uint},
        {"verifier", T::Account},
        {"replaced", T::Account},
        {"reason", T::Name},
        {"round", T::Uint},
        {"key_blob", T::Blob, false}}},

      {{TxKind::SubmitVerdict, ""},
       {{"submission_id", T::Name},
        {"verifier", T::Account},
        {"accuracy", T::Uint},
        {"usability", T::Uint},
        {"relevance", T::Uint},
        {"duplicate_flag", T::Bool},
        {"report", T::Cid},
        {"key_release", T::Blob, false}}},

      {{TxKind::FinalizeVerification, ""},
       {{"submission_id", T::Name},
        {"outcome", T::Name},
        {"verifiers", T::Accounts},
        {"passes", T::Bools},
        {"duplicate_flags", T::Uint},
        {"forced", T::Bool}}},

      {{TxKind::PublishListing, ""},
       {{"submission_id", T::Name},
        {"home_channel", T::Name},
        {"tlp", T::Tlp},
        {"contributor", T::Account},
        {"metadata", T::Metadata}}},

      {{TxKind::PlaceOrder, ""},
       {{"order_id", T::Name},
        {"submission_id", T::Name},
        {"consumer", T::Account}}},

      {{TxKind::DeliverKey, ""},
       {{"order_id", T::Name},
        {"source", T::Name},
        {"slot", T::Uint},
        {"key_blob", T::Blob},
        {"ciphertext", T::Cid}}},

      {{TxKind::ConfirmDecryption, ""},
       {{"order_id", T::Name},
        {"success", T::Bool},
        {"rating", T::Uint, false}}},

      {{TxKind::RateCti, "consumer"},
       {{"op", T::Name},
        {"order_id", T::Name},
        {"submission_id", T::Name},
        {"rating", T::Uint}}},
      {{TxKind::RateCti, "crosscheck"},
       {{"op", T::Name},
        {"submission_id", T::Name},
        {"ratings", T::Uint},
        {"consumer_mean_milli", T::Uint},
        {"verifier_mean_milli", T::Uint},
        {"gap_milli", T::Uint},
        {"discrepancy", T::Bool}}},

      {{TxKind::IssueDiscount, ""},
       {{"recipient", T::Account},
        {"points", T::Uint},
        {"balance_after", T::Uint},
        {"role", T::Name},
        {"submission_id", T::Name}}},

      {{TxKind::ReportToAuthority, ""},
       {{"report_id", T::Name},
        {"authority", T::Account},
        {"contributor", T::Account},
        {"metadata", T::Metadata},
        {"envelope", T::Envelope}}},

      {{TxKind::VoteRemoval, ""},
       {{"target", T::Account},
        {"vote", T::Name},
        {"remove_votes", T::Uint},
        {"active_count", T::Uint},
        {"removed", T::Bool}}},
  };
  return table;
}

bool uses_op(TxKind kind) {
  switch (kind) {
    case TxKind::CreateChannel:
    case TxKind::Register:
    case TxKind::SubmitCti:
    case TxKind::AssignVerifiers:
    case TxKind::RateCti:
      return true;
    default:
      return false;
  }
}

}  // namespace

void validate_tx_body(TxKind kind, const json& body) {
  const std::string where(to_string(kind));
  if (!body.is_object()) violation(where, "body must be an object");
  std::string op;
  if (uses_op(kind)) {
    auto it = body.find("op");
    if (it == body.end() || !it->is_string()) violation(where, "missing op");
    op = it->get<std::string>();
  }
  const auto& table = schemas();
  auto it = table.find({kind, op});
  if (it == table.end()) violation(where, "unknown op '" + op + "'");
  check_record(body, it->second, where);
}

void validate_metadata(const json& metadata) {
  check_record(metadata, metadata_schema(), "metadata");
}

}  // namespace ctinet

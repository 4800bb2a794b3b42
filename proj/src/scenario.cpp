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

#include <algorithm>
#include <fstream>

#include "ctinet/crypto.hpp"
#include "ctinet/simnet.hpp"

namespace ctinet::sim {

namespace {

using nlohmann::json;

const std::set<std::string>& known_ops() {
  static const std::set<std::string> ops = {
      "onboard",        "register",       "verify_account", "certify",     "pay_fee",
      "advance_time",   "tick",           "create_channel", "add_member",  "submit_cti",
      "assign_verifiers", "attach_envelope", "verdict",     "verdicts",    "finalize",
      "marketplace",    "place_order",    "deliver_key",    "confirm",     "crosscheck",
      "report_authority", "open_report",  "read",           "check_access", "vote",
      "verify_chain",   "submit_tx",      "query"};
  return ops;
}

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorCode::ScriptInvalid, msg); }

bool is_non_negative(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::string req_str(const json& step, const char* key) {
  if (!step.contains(key) || !step[key].is_string()) {
    invalid(std::string("step field '") + key + "' must be a string");
  }
  return step[key].get<std::string>();
}

std::optional<std::string> opt_str(const json& step, const char* key) {
  if (!step.contains(key)) return std::nullopt;
  if (!step[key].is_string()) invalid(std::string("step field '") + key + "' must be a string");
  return step[key].get<std::string>();
}

bool opt_bool(const json& step, const char* key, bool fallback) {
  if (!step.contains(key)) return fallback;
  if (!step[key].is_boolean()) invalid(std::string("step field '") + key + "' must be a boolean");
  return step[key].get<bool>();
}

std::int64_t req_int(const json& step, const char* key) {
  if (!step.contains(key) || !step[key].is_number_integer()) {
    invalid(std::string("step field '") + key + "' must be an integer");
  }
  return step[key].get<std::int64_t>();
}

TlpLevel parse_tlp(const std::string& s) {
  auto t = tlp_from_string(s);
  if (!t) invalid("unknown TLP level " + s);
  return *t;
}

std::vector<Role> parse_roles(const json& arr) {
  if (!arr.is_array()) invalid("roles must be an array");
  std::vector<Role> roles;
  for (const auto& r : arr) {
    auto role = r.is_string() ? role_from_string(r.get<std::string>()) : std::nullopt;
    if (!role) invalid("unknown role " + r.dump());
    roles.push_back(*role);
  }
  return roles;
}

std::array<std::uint32_t, 3> parse_scores(const json& v) {
  if (!v.is_array() || v.size() != 3) invalid("scores must be three integers");
  std::array<std::uint32_t, 3> s{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0) {
      invalid("scores must be non-negative integers");
    }
    s[i] = static_cast<std::uint32_t>(v[i].get<std::int64_t>());
  }
  return s;
}

Release parse_release(const std::optional<std::string>& s) {
  if (!s || *s == "valid") return Release::Valid;
  if (*s == "none") return Release::None;
  if (*s == "wrong") return Release::Wrong;
  invalid("release must be valid, none or wrong");
}

NetworkConfig config_of(const ScenarioScript& script) {
  NetworkConfig c = network_config_from_json(script.config);
  if (script.persist_dir) {
    std::filesystem::create_directories(*script.persist_dir);
    c.ledger.persist_dir = script.persist_dir;
  }
  return c;
}

class Runner {
 public:
  explicit Runner(const ScenarioScript& script)
      : script_(script),
        sim_(script.seed, config_of(script), script.replicas, script.actors) {}

  Trace run();

 private:
  json exec(const json& step, const std::string& op);
  json do_query(const json& step);

  AccountId id(const std::string& name) const { return sim_.id_of(name); }
  std::string name(const AccountId& id) const { return sim_.name_of(id); }
  std::string sid(const std::string& label) const {
    auto it = ctis_.find(label);
    return it == ctis_.end() ? label : it->second;
  }
  std::string oid(const std::string& label) const {
    auto it = orders_.find(label);
    return it == orders_.end() ? label : it->second;
  }
  std::string rid(const std::string& label) const {
    auto it = reports_.find(label);
    return it == reports_.end() ? label : it->second;
  }
  std::string cti_label(const std::string& submission_id) const {
    for (const auto& [label, s] : ctis_) {
      if (s == submission_id) return label;
    }
    return submission_id;
  }
  json names(const std::set<AccountId>& ids) const {
    std::vector<std::string> out;
    for (const auto& i : ids) out.push_back(name(i));
    std::sort(out.begin(), out.end());
    return out;
  }
  Principal principal(const json& step) const {
    auto a = opt_str(step, "actor");
    if (!a) return std::nullopt;
    return id(*a);
  }
  std::string channel_of(const json& step) const;
  json tick_detail(const TickResult& r) const;
  json metadata_for(const json& step, const std::string& label, TlpLevel fallback) const;

  const ScenarioScript& script_;
  SimNetwork sim_;
  std::map<std::string, std::string> ctis_;
  std::map<std::string, std::string> orders_;
  std::map<std::string, std::string> reports_;
};

json Runner::tick_detail(const TickResult& r) const {
  json lapsed = json::array();
  std::vector<std::string> names;
  for (const auto& a : r.lapsed) names.push_back(name(a));
  std::sort(names.begin(), names.end());
  for (auto& n : names) lapsed.push_back(std::move(n));
  json reassigned = json::array();
  for (const auto& s : r.exchange.reassigned) {
    const auto slash = s.rfind('/');
    reassigned.push_back(cti_label(s.substr(0, slash)) + s.substr(slash));
  }
  json finalized = json::object();
  for (const auto& d : r.exchange.finalized) {
    finalized[cti_label(d.submission_id)] = to_string(d.outcome);
  }
  return json{{"lapsed", lapsed}, {"reassigned", reassigned}, {"finalized", finalized}};
}

std::string Runner::channel_of(const json& step) const {
  if (auto r = opt_str(step, "report_channel_of")) {
    const auto rep = sim_.net().exchange().report(rid(*r));
    if (!rep) fail(ErrorCode::NotFound, "no report " + *r);
    return rep->channel_id;
  }
  if (auto c = opt_str(step, "home_channel_of")) {
    const auto pkg = sim_.net().exchange().package(sid(*c));
    if (!pkg) fail(ErrorCode::NotFound, "no submission " + *c);
    return pkg->home_channel;
  }
  return req_str(step, "channel");
}

json Runner::metadata_for(const json& step, const std::string& label, TlpLevel fallback) const {
  const TlpLevel tlp = step.contains("tlp") ? parse_tlp(req_str(step, "tlp")) : fallback;
  json m = SimNetwork::default_metadata(label, tlp);
  if (step.contains("metadata")) {
    if (!step["metadata"].is_object()) invalid("metadata overrides must be an object");
    for (const auto& [k, v] : step["metadata"].items()) {
      if (v.is_null()) {
        m.erase(k);
      } else {
        m[k] = v;
      }
    }
  }
  return m;
}

json Runner::exec(const json& step, const std::string& op) {
  Network& net = sim_.net();
  if (op == "onboard") {
    const std::string a = req_str(step, "actor");
    sim_.onboard(a);
    return json{{"state", to_string(net.registry().account(id(a))->state)}};
  }
  if (op == "register") {
    const std::string a = req_str(step, "actor");
    std::optional<std::vector<Role>> roles;
    if (step.contains("roles")) roles = parse_roles(step["roles"]);
    const AccountId acct = sim_.register_actor(a, roles, opt_str(step, "docs"));
    return json{{"state", to_string(net.registry().account(acct)->state)}};
  }
  if (op == "verify_account") {
    const std::string decision = step.value("decision", std::string("approve"));
    if (decision != "approve" && decision != "reject") invalid("decision must be approve or reject");
    const AccountState s = net.authority_verify(id(req_str(step, "actor")),
                                                id(req_str(step, "target")),
                                                decision == "approve");
    return json{{"state", to_string(s)}};
  }
  if (op == "certify") {
    const std::string target = req_str(step, "target");
    const std::string creds =
        opt_str(step, "credentials").value_or("ics-verifier-cert:" + target);
    const std::string cert =
        net.certify_verifier(id(req_str(step, "actor")), id(target), to_bytes(creds));
    return json{{"certified", !cert.empty()}};
  }
  if (op == "pay_fee") {
    const AccountId a = id(req_str(step, "actor"));
    const auto kind = fee_kind_from_string(req_str(step, "kind"));
    if (!kind) invalid("fee kind must be registration or subscription");
    const std::int64_t amount = step.contains("amount_cents")
                                    ? req_int(step, "amount_cents")
                                    : net.registry().amount_due(a, *kind);
    net.pay_fee(a, *kind, amount);
    const auto acct = net.registry().account(a);
    return json{{"amount_cents", amount},
                {"expiry_day", (acct->subscription_expiry - kEpoch) / kSecondsPerDay},
                {"discount_balance", acct->discount_balance}};
  }
  if (op == "advance_time") {
    std::int64_t seconds = 0;
    if (step.contains("days")) seconds += req_int(step, "days") * kSecondsPerDay;
    if (step.contains("seconds")) seconds += req_int(step, "seconds");
    return tick_detail(sim_.advance(seconds));
  }
  if (op == "tick") return tick_detail(sim_.advance(0));
  if (op == "create_channel") {
    std::set<AccountId> members;
    if (!step.contains("members") || !step["members"].is_array()) invalid("members must be an array");
    for (const auto& m : step["members"]) {
      if (!m.is_string()) invalid("members must be actor names");
      members.insert(id(m.get<std::string>()));
    }
    const std::string ch = net.create_channel(id(req_str(step, "actor")),
                                              parse_tlp(req_str(step, "tlp")), members,
                                              opt_str(step, "channel"));
    return json{{"channel", ch}, {"members", names(net.ledger().channel(ch).members)}};
  }
  if (op == "add_member") {
    const std::string ch = channel_of(step);
    net.add_member(ch, id(req_str(step, "actor")), id(req_str(step, "member")));
    return json{{"members", names(net.ledger().channel(ch).members)}};
  }
  if (op == "submit_cti") {
    const std::string label = req_str(step, "cti");
    Bytes plaintext;
    if (auto same = opt_str(step, "same_plaintext_as")) {
      plaintext = sim_.plaintext_of(sid(*same));
    } else {
      plaintext = to_bytes(opt_str(step, "plaintext").value_or("CTI-PLAINTEXT/" + label +
                                                               "/indicators"));
    }
    const SubmitResult r = sim_.submit(req_str(step, "actor"),
                                       metadata_for(step, label, TlpLevel::Green), plaintext,
                                       opt_str(step, "channel"));
    ctis_[label] = r.submission_id;
    json d{{"status", to_string(r.status)},
           {"channel", net.exchange().package(r.submission_id)->home_channel}};
    if (r.verifiers) {
      json v = json::array();
      for (const auto& a : *r.verifiers) v.push_back(name(a));
      d["verifiers"] = v;
    }
    return d;
  }
  if (op == "assign_verifiers") {
    const auto v = net.assign_verifiers(sid(req_str(step, "cti")));
    json out = json::array();
    for (const auto& a : v) out.push_back(name(a));
    return json{{"verifiers", out}};
  }
  if (op == "attach_envelope") {
    const std::string s = sid(req_str(step, "cti"));
    std::string actor;
    if (auto a = opt_str(step, "actor")) {
      actor = *a;
    } else {
      const auto pkg = net.exchange().package(s);
      if (!pkg) fail(ErrorCode::NotFound, "no submission " + s);
      actor = name(pkg->contributor);
    }
    sim_.attach(actor, s, opt_bool(step, "dangling", false));
    return json{{"status", to_string(net.exchange().package(s)->status)}};
  }
  if (op == "verdict") {
    const std::string s = sid(req_str(step, "cti"));
    std::string actor;
    if (step.contains("slot")) {
      const auto pkg = net.exchange().package(s);
      const auto slot = static_cast<std::size_t>(req_int(step, "slot"));
      if (!pkg || slot >= pkg->slots.size()) invalid("slot does not exist");
      actor = name(pkg->slots[slot].verifier);
    } else {
      actor = req_str(step, "actor");
    }
    const auto d = sim_.verdict(actor, s, parse_scores(step.value("scores", json())),
                                opt_bool(step, "duplicate", false),
                                opt_str(step, "report").value_or("reviewed and reproduced"),
                                parse_release(opt_str(step, "release")));
    json out{{"verdicts", net.exchange().package(s)->verdicts.size()}};
    if (d) out["outcome"] = to_string(d->outcome);
    return out;
  }
  if (op == "verdicts") {
    const std::string s = sid(req_str(step, "cti"));
    const auto pkg = net.exchange().package(s);
    if (!pkg) fail(ErrorCode::NotFound, "no submission " + s);
    if (!step.contains("scores") || !step["scores"].is_array() ||
        step["scores"].size() != pkg->slots.size()) {
      invalid("verdicts needs one score triple per slot");
    }
    json verifiers = json::array();
    std::optional<QualityDecision> d;
    for (std::size_t i = 0; i < pkg->slots.size(); ++i) {
      bool dup = false;
      if (step.contains("duplicate")) {
        if (!step["duplicate"].is_array() || step["duplicate"].size() != pkg->slots.size()) {
          invalid("duplicate must have one flag per slot");
        }
        dup = step["duplicate"][i].get<bool>();
      }
      const std::string v = name(pkg->slots[i].verifier);
      verifiers.push_back(v);
      d = sim_.verdict(v, s, parse_scores(step["scores"][i]), dup, "reviewed and reproduced",
                       Release::Valid);
    }
    json out{{"verifiers", verifiers}};
    if (d) out["outcome"] = to_string(d->outcome);
    return out;
  }
  if (op == "finalize") {
    const QualityDecision d = net.finalize_verification(sid(req_str(step, "cti")));
    json discounts = json::object();
    for (const auto& [a, pts] : d.discounts_issued) discounts[name(a)] = pts;
    return json{{"outcome", to_string(d.outcome)},
                {"passes", d.passes},
                {"discounts", discounts},
                {"forced", d.forced}};
  }
  if (op == "marketplace") {
    std::map<std::string, std::string> kv;
    if (step.contains("filter")) {
      if (!step["filter"].is_object()) invalid("filter must be an object");
      for (const auto& [k, v] : step["filter"].items()) {
        if (!v.is_string()) invalid("filter values must be strings");
        kv[k] = v.get<std::string>();
      }
    }
    const auto listings = net.exchange().list_marketplace(principal(step),
                                                           ListingFilter::from_map(kv),
                                                           opt_str(step, "channel"));
    std::vector<std::string> labels;
    for (const auto& l : listings) labels.push_back(cti_label(l.submission_id));
    std::sort(labels.begin(), labels.end());
    return json{{"listings", labels}};
  }
  if (op == "place_order") {
    const std::string o = net.place_order(id(req_str(step, "actor")), sid(req_str(step, "cti")));
    orders_[req_str(step, "order")] = o;
    return json{{"state", to_string(net.exchange().order(o)->state)}};
  }
  if (op == "deliver_key") {
    const std::string o = oid(req_str(step, "order"));
    if (auto a = opt_str(step, "actor")) {
      const Delivery d = net.deliver_key(id(*a), o);
      return json{{"source", d.source}, {"slot", d.slot}};
    }
    const auto [d, plain] = sim_.deliver_and_open(o);
    return json{{"source", d.source},
                {"slot", d.slot},
                {"opened", true},
                {"deliveries", net.exchange().order(o)->deliveries.size()}};
  }
  if (op == "confirm") {
    const std::string o = oid(req_str(step, "order"));
    AccountId actor;
    if (auto a = opt_str(step, "actor")) {
      actor = id(*a);
    } else {
      const auto order = net.exchange().order(o);
      if (!order) fail(ErrorCode::NotFound, "no order " + o);
      actor = order->consumer;
    }
    std::optional<std::uint32_t> rating;
    if (step.contains("rating")) rating = static_cast<std::uint32_t>(req_int(step, "rating"));
    const OrderState s = net.confirm_decryption(actor, o, opt_bool(step, "success", true), rating);
    return json{{"state", to_string(s)}};
  }
  if (op == "crosscheck") {
    json c = net.crosscheck_ratings(sid(req_str(step, "cti"))).to_json();
    c.erase("submission_id");
    return c;
  }
  if (op == "report_authority") {
    const std::string label = req_str(step, "report");
    const Bytes plaintext = to_bytes(opt_str(step, "plaintext").value_or(
        "INCIDENT-REPORT/" + label + "/forensics"));
    const ReportReceipt r = sim_.report(req_str(step, "actor"), req_str(step, "authority"),
                                        metadata_for(step, label, TlpLevel::Red), plaintext);
    reports_[label] = r.report_id;
    return json{{"channel_members", names(net.ledger().channel(r.channel_id).members)},
                {"channel_tlp", to_string(net.ledger().channel(r.channel_id).tlp)}};
  }
  if (op == "open_report") {
    const Bytes plain = sim_.open_report(req_str(step, "actor"), rid(req_str(step, "report")));
    return json{{"opened", true}, {"bytes", plain.size()}};
  }
  if (op == "read") {
    const std::string ch = channel_of(step);
    TxFilter filter;
    if (auto k = opt_str(step, "kind")) {
      filter.kind = tx_kind_from_string(*k);
      if (!filter.kind) invalid("unknown tx kind " + *k);
    }
    const auto txs = net.ledger().read(ch, principal(step), filter);
    std::map<std::string, std::size_t> kinds;
    for (const auto& tx : txs) ++kinds[std::string(to_string(tx.kind))];
    return json{{"count", txs.size()}, {"kinds", kinds}};
  }
  if (op == "check_access") {
    const std::string ch = channel_of(step);
    const std::string mode = step.value("mode", std::string("read"));
    if (mode != "read" && mode != "write") invalid("mode must be read or write");
    const AccessDecision d = net.ledger().check_access(
        principal(step), ch, mode == "read" ? AccessMode::Read : AccessMode::Write);
    return json{{"allowed", d.allowed}, {"reason", to_string(d.reason)}};
  }
  if (op == "vote") {
    const std::string v = step.value("vote", std::string("remove"));
    if (v != "remove" && v != "keep") invalid("vote must be remove or keep");
    const VoteTally t =
        net.vote_removal(id(req_str(step, "actor")), id(req_str(step, "target")), v == "remove");
    return json{{"remove_votes", t.remove_votes},
                {"keep_votes", t.keep_votes},
                {"active", t.active_count},
                {"removed", t.removed}};
  }
  if (op == "verify_chain") {
    if (auto ch = opt_str(step, "channel")) {
      return json{{"valid", net.ledger().verify_chain(*ch)}};
    }
    return json{{"valid", net.ledger().verify_all()}};
  }
  if (op == "submit_tx") {
    const auto kind = tx_kind_from_string(req_str(step, "kind"));
    if (!kind) invalid("unknown tx kind");
    const Receipt r = net.submit_tx(channel_of(step),
                                    TxDraft{*kind, id(req_str(step, "actor")),
                                            step.value("body", json::object())});
    return json{{"height", r.height}};
  }
  if (op == "query") return do_query(step);
  invalid("unknown op " + op);
}

json Runner::do_query(const json& step) {
  Network& net = sim_.net();
  const std::string what = req_str(step, "what");
  if (what == "account") {
    const AccountId a = id(req_str(step, "target"));
    const auto acct = net.registry().account(a);
    if (!acct) fail(ErrorCode::NotRegistered, a + " is not registered");
    json roles = json::array();
    for (Role r : acct->roles) roles.push_back(to_string(r));
    static constexpr std::array<std::string_view, 6> kStanding = {
        "Unknown", "Pending", "Verified", "Active", "Lapsed", "Removed"};
    return json{{"state", to_string(acct->state)},
                {"standing", kStanding[static_cast<std::size_t>(net.registry().standing(a))]},
                {"roles", roles},
                {"discount_balance", acct->discount_balance},
                {"fee_exempt", acct->fee_exempt}};
  }
  if (what == "cti") {
    const auto pkg = net.exchange().package(sid(req_str(step, "cti")));
    if (!pkg) fail(ErrorCode::NotFound, "no such submission");
    json verifiers = json::array();
    for (const auto& s : pkg->slots) verifiers.push_back(name(s.verifier));
    std::set<AccountId> ever = pkg->ever_assigned();
    return json{{"status", to_string(pkg->status)},
                {"verifiers", verifiers},
                {"ever_assigned", names(ever)},
                {"verdicts", pkg->verdicts.size()},
                {"passes", pkg->passes},
                {"forced", pkg->forced},
                {"listed", net.exchange().is_listed(pkg->submission_id)}};
  }
  if (what == "order") {
    const auto o = net.exchange().order(oid(req_str(step, "order")));
    if (!o) fail(ErrorCode::NotFound, "no such order");
    json sources = json::array();
    for (const auto& d : o->deliveries) sources.push_back(d.source + "/" + std::to_string(d.slot));
    json out{{"state", to_string(o->state)}, {"deliveries", sources}};
    if (o->rating) out["rating"] = *o->rating;
    return out;
  }
  if (what == "channel") {
    const Channel c = net.ledger().channel(channel_of(step));
    return json{{"tlp", to_string(c.tlp)},
                {"members", names(c.members)},
                {"height", net.ledger().height(c.channel_id)}};
  }
  if (what == "sybil_cost") {
    const std::int64_t n = req_int(step, "n");
    const std::int64_t periods = step.contains("periods") ? req_int(step, "periods") : 1;
    return json{{"cents", sybil_cost(n, net.registry().fees(), periods)}};
  }
  if (what == "pending") {
    std::set<AccountId> p;
    for (const auto& a : net.registry().pending()) p.insert(a);
    return json{{"accounts", names(p)}};
  }
  if (what == "identity") {
    const std::string actor = req_str(step, "actor");
    const Bytes sealed = net.registry().identity_record(id(actor), id(req_str(step, "target")));
    return json{{"docs", to_string(open_sealed(sim_.actor(actor).keys.secret_key, sealed))}};
  }
  if (what == "leak") {
    const std::string marker = req_str(step, "marker");
    bool in_ledger = false;
    for (const auto& tx : net.ledger().all_transactions()) {
      if (tx.to_json().dump().find(marker) != std::string::npos) in_ledger = true;
    }
    bool in_registry = false;
    for (const auto& a : net.registry().accounts()) {
      if (a.to_json(false).dump().find(marker) != std::string::npos) in_registry = true;
    }
    return json{{"in_ledger", in_ledger}, {"in_registry_view", in_registry}};
  }
  if (what == "due") {
    const auto kind = fee_kind_from_string(req_str(step, "kind"));
    if (!kind) invalid("fee kind must be registration or subscription");
    return json{{"cents", net.registry().amount_due(id(req_str(step, "target")), *kind)}};
  }
  invalid("unknown query " + what);
}

Trace Runner::run() {
  Trace trace;
  trace.name = script_.name;
  trace.seed = script_.seed;
  for (std::size_t i = 0; i < script_.steps.size(); ++i) {
    const json& step = script_.steps[i];
    const std::string op = step.at("op").get<std::string>();
    const std::string expect = step.value("expect", std::string("ok"));
    StepResult r{i, op, "ok", json::object()};
    std::string message;
    try {
      r.detail = exec(step, op);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ScriptInvalid) throw;
      r.outcome = std::string(to_string(e.code()));
      message = e.what();
    }
    const std::string where = "step " + std::to_string(i) + " (" + op + ")";
    if (r.outcome != expect) {
      fail(ErrorCode::ExpectationMismatch, where + ": expected " + expect + ", got " + r.outcome +
                                               (message.empty() ? "" : ": " + message));
    }
    if (step.contains("check")) {
      for (const auto& [k, v] : step["check"].items()) {
        if (!r.detail.contains(k) || r.detail[k] != v) {
          fail(ErrorCode::ExpectationMismatch,
               where + ": check '" + k + "' expected " + v.dump() + ", got " +
                   (r.detail.contains(k) ? r.detail[k].dump() : "nothing"));
        }
      }
    }
    trace.steps.push_back(std::move(r));
  }

  Network& net = sim_.net();
  net.flush();
  for (TxKind k : all_tx_kinds()) trace.coverage[std::string(to_string(k))] = 0;
  for (const auto& tx : net.ledger().all_transactions()) {
    ++trace.coverage[std::string(to_string(tx.kind))];
    if (tx.kind == TxKind::PayFee) trace.fees_collected_cents += tx.body.at("amount_cents").get<std::int64_t>();
  }
  trace.channels = json::array();
  for (const auto& ch : net.ledger().channel_ids()) {
    const Channel c = net.ledger().channel(ch);
    trace.channels.push_back(json{{"channel", ch},
                                  {"tlp", to_string(c.tlp)},
                                  {"members", names(c.members)},
                                  {"height", net.ledger().height(ch)}});
  }
  trace.digests = net.digests();
  trace.replay = net.replay_digests();
  if (!(trace.digests == trace.replay)) {
    fail(ErrorCode::InvariantViolation, "replayed state differs from live state");
  }
  if (!net.ledger().verify_all()) fail(ErrorCode::InvariantViolation, "chain verification failed");
  return trace;
}

}  // namespace

ScenarioScript ScenarioScript::from_json(const json& j) {
  if (!j.is_object()) invalid("script must be a JSON object");
  static const std::set<std::string> allowed = {"name", "description", "seed", "config",
                                                "replicas", "actors", "steps"};
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) invalid("unknown script field '" + k + "'");
  }
  ScenarioScript s;
  s.name = req_str(j, "name");
  if (j.contains("seed")) {
    if (!is_non_negative(j["seed"])) invalid("seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("config")) {
    if (!j["config"].is_object()) invalid("config must be an object");
    s.config = j["config"];
  }
  if (j.contains("replicas")) {
    if (!is_non_negative(j["replicas"]) || j["replicas"].get<std::uint64_t>() == 0 ||
        j["replicas"].get<std::uint64_t>() > 64) {
      invalid("replicas must be between 1 and 64");
    }
    s.replicas = j["replicas"].get<std::size_t>();
  }
  if (!j.contains("actors") || !j["actors"].is_array()) invalid("actors must be an array");
  std::set<std::string> declared;
  for (const auto& a : j["actors"]) {
    if (!a.is_object()) invalid("each actor must be an object");
    const std::string n = req_str(a, "name");
    if (n.empty() || !declared.insert(n).second) invalid("actor names must be unique and non-empty");
    s.actors.emplace_back(n, parse_roles(a.value("roles", json::array())));
  }
  if (!j.contains("steps") || !j["steps"].is_array()) invalid("steps must be an array");
  for (std::size_t i = 0; i < j["steps"].size(); ++i) {
    const json& step = j["steps"][i];
    const std::string where = "step " + std::to_string(i);
    if (!step.is_object()) invalid(where + " must be an object");
    const std::string op = req_str(step, "op");
    if (!known_ops().contains(op)) invalid(where + ": unknown op " + op);
    if (step.contains("expect")) {
      const std::string e = req_str(step, "expect");
      if (e != "ok" && !error_code_from_string(e)) invalid(where + ": unknown expect " + e);
    }
    if (step.contains("check") && !step["check"].is_object()) {
      invalid(where + ": check must be an object");
    }
    for (const char* key : {"actor", "target", "member", "authority"}) {
      if (step.contains(key) &&
          (!step[key].is_string() || !declared.contains(step[key].get<std::string>()))) {
        invalid(where + ": '" + key + "' names an undeclared actor");
      }
    }
    if (step.contains("members")) {
      if (!step["members"].is_array()) invalid(where + ": members must be an array");
      for (const auto& m : step["members"]) {
        if (!m.is_string() || !declared.contains(m.get<std::string>())) {
          invalid(where + ": members names an undeclared actor");
        }
      }
    }
    s.steps.push_back(step);
  }
  return s;
}

ScenarioScript ScenarioScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json Trace::to_json() const {
  json steps_json = json::array();
  for (const auto& s : steps) {
    steps_json.push_back(json{{"index", s.index}, {"op", s.op}, {"outcome", s.outcome},
                              {"detail", s.detail}});
  }
  return json{{"name", name},
              {"seed", seed},
              {"steps", steps_json},
              {"digests", digests.to_json()},
              {"replay", replay.to_json()},
              {"replay_match", digests == replay},
              {"coverage", coverage},
              {"channels", channels},
              {"fees_collected_cents", fees_collected_cents}};
}

std::string Trace::dump() const { return to_json().dump(2) + "\n"; }

Trace run_scenario(const ScenarioScript& script) { return Runner(script).run(); }

}  // namespace ctinet::sim

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

#include "ctinet/simnet.hpp"

#include <algorithm>
#include <cmath>

namespace ctinet::sim {

namespace {

using nlohmann::json;

double number_of(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = v.get<std::string>();
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  fail(ErrorCode::ConfigInvalid, "config '" + key + "' must be a number");
}

std::uint32_t count_of(const json& v, const std::string& key) {
  const double d = number_of(v, key);
  if (d < 0 || d != std::floor(d) || d > 1e9) {
    fail(ErrorCode::ConfigInvalid, "config '" + key + "' must be a non-negative integer");
  }
  return static_cast<std::uint32_t>(d);
}

std::int64_t cents_of(const json& v, const std::string& key) {
  const double d = number_of(v, key);
  if (d < 0 || d > 1e12) fail(ErrorCode::ConfigInvalid, "config '" + key + "' out of range");
  return std::llround(d * 100);
}

std::uint32_t milli_of(const json& v, const std::string& key) {
  const double d = number_of(v, key);
  if (d < 0 || d > 1e6) fail(ErrorCode::ConfigInvalid, "config '" + key + "' out of range");
  return static_cast<std::uint32_t>(std::llround(d * 1000));
}

bool bool_of(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v == "true") return true;
  if (v == "false") return false;
  fail(ErrorCode::ConfigInvalid, "config '" + key + "' must be true or false");
}

}  // namespace

NetworkConfig network_config_from_json(const json& config) {
  NetworkConfig c;
  if (!config.is_object()) fail(ErrorCode::ConfigInvalid, "config must be an object");
  for (const auto& [key, v] : config.items()) {
    if (key == "registration_fee") {
      c.fees.registration_fee = cents_of(v, key);
    } else if (key == "subscription_fee") {
      c.fees.subscription_fee = cents_of(v, key);
    } else if (key == "period") {
      if (v == "month") {
        c.fees.period_seconds = 30 * kSecondsPerDay;
      } else if (v == "year") {
        c.fees.period_seconds = 365 * kSecondsPerDay;
      } else {
        fail(ErrorCode::ConfigInvalid, "period must be month or year");
      }
    } else if (key == "contributor_discount") {
      c.fees.contributor_discount = count_of(v, key);
    } else if (key == "verifier_discount") {
      c.fees.verifier_discount = count_of(v, key);
    } else if (key == "discount_cap") {
      c.fees.discount_cap = count_of(v, key);
    } else if (key == "quality_threshold") {
      c.exchange.pass_mean_milli = milli_of(v, key);
    } else if (key == "accept_passes") {
      c.exchange.accept_passes = count_of(v, key);
    } else if (key == "duplicate_flags") {
      c.exchange.duplicate_flags = count_of(v, key);
    } else if (key == "verifier_timeout_days") {
      c.exchange.verifier_timeout = count_of(v, key) * kSecondsPerDay;
    } else if (key == "max_reassign_rounds") {
      c.exchange.max_reassign_rounds = count_of(v, key);
    } else if (key == "min_ratings") {
      c.exchange.min_ratings = count_of(v, key);
    } else if (key == "discrepancy_threshold") {
      c.exchange.discrepancy_milli = milli_of(v, key);
    } else if (key == "block_size") {
      c.ledger.block_size = std::max<std::uint32_t>(1, count_of(v, key));
    } else if (key == "max_object_mib") {
      c.max_object_size = std::size_t{count_of(v, key)} << 20;
    } else if (key == "auto_progress") {
      c.auto_progress = bool_of(v, key);
    } else {
      fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    }
  }
  c.fees.validate();
  c.exchange.validate();
  return c;
}

SimNetwork::SimNetwork(std::uint64_t seed, NetworkConfig config, std::size_t replicas,
                       const std::vector<std::pair<std::string, std::vector<Role>>>& actors)
    : now_(std::make_shared<std::int64_t>(kEpoch)),
      rng_(Rng::from_u64(seed).fork("simnet/ops")),
      actor_rng_(Rng::from_u64(seed).fork("simnet/actors")) {
  if (replicas == 0) replicas = 1;
  std::size_t index = 0;
  std::optional<PublicKey> authority_key;
  for (const auto& [name, roles] : actors) {
    Rng keys = actor_rng_.fork(name);
    Actor a{name, roles, gen_keypair(keys), {}, index++ % replicas};
    if (!authority_key && std::find(roles.begin(), roles.end(), Role::Authority) != roles.end()) {
      authority_key = a.keys.public_key;
      authority_ = name;
    }
    actors_.emplace(name, std::move(a));
  }
  Rng escrow_rng = Rng::from_u64(seed).fork("simnet/escrow");
  const KeyPair escrow = gen_keypair(escrow_rng);
  if (!authority_key) {
    Rng fallback = Rng::from_u64(seed).fork("simnet/authority");
    authority_key = gen_keypair(fallback).public_key;
  }
  auto now = now_;
  net_ = std::make_unique<Network>(std::move(config), [now] { return *now; },
                                   Rng::from_u64(seed).fork("simnet/network"), escrow,
                                   *authority_key);
  for (std::size_t i = 0; i < replicas; ++i) {
    replicas_.push_back(std::make_unique<ContentStore>(net_->store().max_object_size()));
  }
  for (auto& r : replicas_) {
    net_->store().add_peer(r.get());
    r->add_peer(&net_->store());
    for (auto& other : replicas_) r->add_peer(other.get());
  }
  for (auto& [name, a] : actors_) {
    if (std::find(a.roles.begin(), a.roles.end(), Role::Authority) != a.roles.end()) {
      a.account_id = net_->bootstrap_authority(name, a.keys.public_key);
      names_[a.account_id] = name;
    }
  }
}

TickResult SimNetwork::advance(std::int64_t seconds) {
  if (seconds < 0) fail(ErrorCode::ScriptInvalid, "time only moves forward");
  *now_ += seconds;
  return net_->tick();
}

Actor& SimNetwork::actor(const std::string& name) {
  auto it = actors_.find(name);
  if (it == actors_.end()) fail(ErrorCode::ScriptInvalid, "undeclared actor " + name);
  return it->second;
}

std::string SimNetwork::name_of(const AccountId& id) const {
  auto it = names_.find(id);
  return it == names_.end() ? id : it->second;
}

AccountId SimNetwork::id_of(const std::string& name) const {
  auto it = actors_.find(name);
  if (it == actors_.end()) fail(ErrorCode::ScriptInvalid, "undeclared actor " + name);
  // Unregistered actors still have a well-defined id.
  return it->second.account_id.empty() ? derive_account_id(name) : it->second.account_id;
}

const Actor& SimNetwork::authority() const {
  if (!authority_) fail(ErrorCode::ScriptInvalid, "the script declares no Authority");
  return actors_.at(*authority_);
}

AccountId SimNetwork::register_actor(const std::string& name,
                                     std::optional<std::vector<Role>> roles,
                                     std::optional<std::string> docs) {
  Actor& a = actor(name);
  RegistrationRequest req;
  req.username = name;
  req.claimed_roles = roles ? *roles : a.roles;
  req.public_key = a.keys.public_key;
  req.id_docs = to_bytes(docs ? *docs : "passport:" + name + ";business-reg:" + name + "-pty-ltd");
  const AccountId id = net_->request_account(req);
  a.account_id = id;
  names_[id] = name;
  return id;
}

void SimNetwork::onboard(const std::string& name, std::optional<std::string> docs) {
  const AccountId id = register_actor(name, std::nullopt, std::move(docs));
  const AccountId auth = authority().account_id;
  net_->authority_verify(auth, id, true);
  net_->pay_fee(id, FeeKind::Registration,
                net_->registry().amount_due(id, FeeKind::Registration));
  const auto& roles = actor(name).roles;
  if (std::find(roles.begin(), roles.end(), Role::Verifier) != roles.end()) {
    net_->certify_verifier(auth, id, to_bytes("ics-verifier-cert:" + name));
  }
}

SubmitResult SimNetwork::submit(const std::string& contributor, const json& metadata,
                                const Bytes& plaintext, std::optional<std::string> channel) {
  SubmitResult r = net_->submit_cti(id_of(contributor), metadata, cti_fingerprint(plaintext),
                                    std::move(channel));
  plaintexts_[r.submission_id] = plaintext;
  return r;
}

void SimNetwork::attach(const std::string& contributor, const std::string& submission_id,
                        bool dangling) {
  const auto pkg = net_->exchange().package(submission_id);
  if (!pkg) fail(ErrorCode::NotFound, "no submission " + submission_id);
  if (pkg->slots.size() != kVerifierCount) {
    fail(ErrorCode::WrongState, "verifiers have not been assigned yet");
  }
  std::array<PublicKey, kVerifierCount> pubs;
  for (std::size_t i = 0; i < kVerifierCount; ++i) {
    pubs[i] = net_->registry().public_key_of(pkg->slots[i].verifier);
  }
  Actor& a = actor(contributor);
  ContentStore detached;
  ContentStore& target = dangling ? detached : replica(a.node);
  const EnvelopeSet env = seal(plaintext_of(submission_id), pubs,
                               net_->exchange().escrow_public_key(), rng_, target);
  net_->attach_envelope(id_of(contributor), submission_id, env);
}

std::optional<QualityDecision> SimNetwork::verdict(const std::string& verifier,
                                                   const std::string& submission_id,
                                                   std::array<std::uint32_t, 3> scores,
                                                   bool duplicate, const std::string& report,
                                                   Release release) {
  Actor& a = actor(verifier);
  const auto pkg = net_->exchange().package(submission_id);
  if (!pkg) fail(ErrorCode::NotFound, "no submission " + submission_id);
  VerdictInput in;
  in.verifier = id_of(verifier);
  in.submission_id = submission_id;
  in.accuracy = scores[0];
  in.usability = scores[1];
  in.relevance = scores[2];
  in.duplicate_flag = duplicate;
  in.report = to_bytes(report);

  const auto slot = pkg->slot_of(in.verifier);
  if (slot && pkg->envelope) {
    const SlotState& s = pkg->slots[*slot];
    SymmetricKey key;
    Bytes plain;
    try {
      if (s.sealed) {
        key = unwrap_key(pkg->envelope->wrapped_verifier_keys[*slot], a.keys.secret_key);
        plain = decrypt_object(key, replica(a.node).get(pkg->envelope->verifier_copies[*slot]));
      } else {
        key = unwrap_key(WrappedKey::from_hex(s.key_blob), a.keys.secret_key);
        plain = decrypt_object(key, replica(a.node).get(pkg->envelope->consumer_copy));
      }
    } catch (const Error& e) {
      fail(ErrorCode::InvariantViolation, verifier + " cannot open its assigned copy: " + e.what());
    }
    if (plain != plaintext_of(submission_id)) {
      fail(ErrorCode::InvariantViolation, verifier + " recovered a different plaintext");
    }
    if (release == Release::Valid && s.sealed) {
      in.key_release = wrap_key(key, net_->exchange().escrow_public_key(), rng_);
    }
  }
  if (release == Release::Wrong) {
    in.key_release = wrap_key(SymmetricKey::generate(rng_), net_->exchange().escrow_public_key(),
                              rng_);
  }
  return net_->submit_verdict(in);
}

std::pair<Delivery, Bytes> SimNetwork::deliver_and_open(const std::string& order_id) {
  const auto order = net_->exchange().order(order_id);
  if (!order) fail(ErrorCode::NotFound, "no order " + order_id);
  const std::string consumer = name_of(order->consumer);
  Actor& a = actor(consumer);
  Delivery d = net_->deliver_key(order->consumer, order_id);
  Bytes plain;
  try {
    const SymmetricKey key = unwrap_key(WrappedKey::from_hex(d.key_blob), a.keys.secret_key);
    plain = decrypt_object(key, replica(a.node).get(d.ciphertext));
  } catch (const Error& e) {
    fail(ErrorCode::InvariantViolation, std::string("delivered key does not open: ") + e.what());
  }
  if (plain != plaintext_of(order->submission_id)) {
    fail(ErrorCode::InvariantViolation, "delivered key opened a different plaintext");
  }
  return {std::move(d), std::move(plain)};
}

ReportReceipt SimNetwork::report(const std::string& contributor, const std::string& authority,
                                 const json& metadata, const Bytes& plaintext) {
  // The reporting path has no verifiers; the three verifier slots are sealed
  // to throwaway keys that nobody keeps.
  std::array<PublicKey, kVerifierCount> pubs;
  for (auto& p : pubs) p = gen_keypair(rng_).public_key;
  Actor& a = actor(contributor);
  const EnvelopeSet env =
      seal(plaintext, pubs, net_->exchange().escrow_public_key(), rng_, replica(a.node));
  ReportReceipt r = net_->report_to_authority(id_of(contributor), metadata, env, id_of(authority));
  report_plaintexts_[r.report_id] = plaintext;
  return r;
}

Bytes SimNetwork::open_report(const std::string& authority, const std::string& report_id) {
  Actor& a = actor(authority);
  const WrappedKey wk = net_->fetch_report_key(id_of(authority), report_id);
  const auto r = net_->exchange().report(report_id);
  Bytes plain;
  try {
    const SymmetricKey kc = unwrap_key(wk, a.keys.secret_key);
    plain = decrypt_object(kc, replica(a.node).get(r->envelope.consumer_copy));
  } catch (const Error& e) {
    fail(ErrorCode::InvariantViolation, std::string("report key does not open: ") + e.what());
  }
  if (plain != report_plaintexts_.at(report_id)) {
    fail(ErrorCode::InvariantViolation, "report key opened a different plaintext");
  }
  return plain;
}

const Bytes& SimNetwork::plaintext_of(const std::string& submission_id) const {
  auto it = plaintexts_.find(submission_id);
  if (it == plaintexts_.end()) fail(ErrorCode::NotFound, "no plaintext for " + submission_id);
  return it->second;
}

json SimNetwork::default_metadata(const std::string& label, TlpLevel tlp) {
  CtiMetadata m;
  m.title = "Advisory " + label;
  m.description = "Indicators and mitigations for " + label;
  m.industry = "energy";
  m.ics_type = "scada";
  m.vulnerability = "default-credentials";
  m.attack_type = "ransomware";
  m.tlp = tlp;
  return m.to_json();
}

}  // namespace ctinet::sim

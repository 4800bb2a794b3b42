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

#include "ctinet/network.hpp"

namespace ctinet {

namespace {

bool has_chain_files(const LedgerOptions& options) {
  if (!options.persist_dir || !std::filesystem::exists(*options.persist_dir)) return false;
  for (const auto& entry : std::filesystem::directory_iterator(*options.persist_dir)) {
    if (entry.path().extension() == ".chain") return true;
  }
  return false;
}

}  // namespace

nlohmann::json StateDigests::to_json() const {
  return nlohmann::json{{"ledger", ledger}, {"registry", registry}, {"exchange", exchange}};
}

Network::Network(NetworkConfig config, Clock clock, Rng rng, KeyPair escrow,
                 PublicKey authority_key)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      rng_(std::move(rng)),
      escrow_(escrow),
      store_(config_.max_object_size) {
  if (config_.store_file) store_.open_persistence(*config_.store_file);
  ledger_ = has_chain_files(config_.ledger) ? Ledger::load(config_.ledger, clock_)
                                            : std::make_unique<Ledger>(config_.ledger, clock_);
  registry_ = std::make_unique<Registry>(*ledger_, store_, config_.fees, authority_key);
  exchange_ = std::make_unique<Exchange>(*ledger_, store_, *registry_, config_.exchange, escrow_);
  for (const auto& tx : ledger_->all_transactions()) {
    registry_->apply(tx);
    exchange_->apply(tx);
  }
  ledger_->set_access_view(registry_.get());
  ledger_->set_listener([this](const Transaction& tx) {
    registry_->apply(tx);
    exchange_->apply(tx);
  });
}

Network::~Network() {
  ledger_->set_listener(nullptr);
  ledger_->set_access_view(nullptr);
}

AccountId Network::bootstrap_authority(const std::string& username, const PublicKey& key) {
  std::lock_guard lock(op_mu_);
  return registry_->bootstrap_authority(username, key);
}

AccountId Network::request_account(const RegistrationRequest& request) {
  std::lock_guard lock(op_mu_);
  return registry_->request_account(request, rng_);
}

AccountState Network::authority_verify(const AccountId& authority, const AccountId& account,
                                       bool approve) {
  std::lock_guard lock(op_mu_);
  return registry_->authority_verify(authority, account, approve);
}

std::string Network::certify_verifier(const AccountId& authority, const AccountId& account,
                                      ByteView credentials) {
  std::lock_guard lock(op_mu_);
  return registry_->certify_verifier(authority, account, credentials);
}

Receipt Network::pay_fee(const AccountId& account, FeeKind kind, std::int64_t amount_cents) {
  std::lock_guard lock(op_mu_);
  return registry_->pay_fee(account, kind, amount_cents);
}

VoteTally Network::vote_removal(const AccountId& voter, const AccountId& target, bool remove) {
  std::lock_guard lock(op_mu_);
  VoteTally tally = registry_->vote_removal(voter, target, remove);
  if (tally.removed) exchange_->reassign_removed(target, rng_);
  return tally;
}

std::string Network::create_channel(const AccountId& creator, TlpLevel tlp,
                                    std::set<AccountId> members,
                                    std::optional<std::string> channel_id) {
  std::lock_guard lock(op_mu_);
  return ledger_->create_channel(creator, tlp, std::move(members), std::move(channel_id));
}

void Network::add_member(const std::string& channel_id, const AccountId& by,
                         const AccountId& member) {
  std::lock_guard lock(op_mu_);
  ledger_->add_member(channel_id, by, member);
}

Receipt Network::submit_tx(const std::string& channel_id, TxDraft draft) {
  std::lock_guard lock(op_mu_);
  return ledger_->submit_tx(channel_id, std::move(draft));
}

SubmitResult Network::submit_cti(const AccountId& contributor, const nlohmann::json& metadata,
                                 const std::string& fingerprint,
                                 std::optional<std::string> channel) {
  std::lock_guard lock(op_mu_);
  SubmitResult r;
  r.submission_id = exchange_->submit_cti(contributor, metadata, fingerprint, std::move(channel));
  r.status = exchange_->package(r.submission_id)->status;
  if (config_.auto_progress && r.status == CtiStatus::Submitted) {
    r.verifiers = exchange_->assign_verifiers(r.submission_id, rng_);
    r.status = CtiStatus::UnderVerification;
  }
  return r;
}

std::array<AccountId, kVerifierCount> Network::assign_verifiers(const std::string& submission_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->assign_verifiers(submission_id, rng_);
}

void Network::attach_envelope(const AccountId& contributor, const std::string& submission_id,
                              const EnvelopeSet& envelope) {
  std::lock_guard lock(op_mu_);
  exchange_->attach_envelope(contributor, submission_id, envelope);
}

std::optional<QualityDecision> Network::submit_verdict(const VerdictInput& verdict) {
  std::lock_guard lock(op_mu_);
  exchange_->submit_verdict(verdict);
  if (config_.auto_progress &&
      exchange_->package(verdict.submission_id)->verdicts.size() == kVerifierCount) {
    return exchange_->finalize_verification(verdict.submission_id);
  }
  return std::nullopt;
}

QualityDecision Network::finalize_verification(const std::string& submission_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->finalize_verification(submission_id);
}

std::string Network::place_order(const AccountId& consumer, const std::string& submission_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->place_order(consumer, submission_id);
}

Delivery Network::deliver_key(const AccountId& actor, const std::string& order_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->deliver_key(actor, order_id, rng_);
}

OrderState Network::confirm_decryption(const AccountId& actor, const std::string& order_id,
                                       bool success, std::optional<std::uint32_t> rating) {
  std::lock_guard lock(op_mu_);
  return exchange_->confirm_decryption(actor, order_id, success, rating);
}

CrossCheck Network::crosscheck_ratings(const std::string& submission_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->crosscheck_ratings(submission_id);
}

ReportReceipt Network::report_to_authority(const AccountId& contributor,
                                           const nlohmann::json& metadata,
                                           const EnvelopeSet& envelope,
                                           const AccountId& authority) {
  std::lock_guard lock(op_mu_);
  return exchange_->report_to_authority(contributor, metadata, envelope, authority);
}

WrappedKey Network::fetch_report_key(const AccountId& authority, const std::string& report_id) {
  std::lock_guard lock(op_mu_);
  return exchange_->fetch_report_key(authority, report_id, rng_);
}

TickResult Network::tick() {
  std::lock_guard lock(op_mu_);
  TickResult r;
  const std::int64_t now = clock_();
  r.lapsed = registry_->lapse_check(now);
  r.exchange = exchange_->tick(now, rng_);
  return r;
}

StateDigests Network::digests() const {
  return StateDigests{ledger_->digest(), registry_->digest(), exchange_->digest()};
}

StateDigests Network::replay_digests() const {
  RegistryState registry;
  ExchangeState exchange;
  for (const auto& tx : ledger_->all_transactions()) {
    registry.apply(tx);
    exchange.apply(tx);
  }
  return StateDigests{ledger_->digest(), registry.digest(), exchange.digest()};
}

void Network::flush() {
  std::lock_guard lock(op_mu_);
  ledger_->flush();
}

}  // namespace ctinet

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

// Deterministic in-process network simulation.
//
// SimNetwork runs one Network on a virtual clock with a set of named actors,
// each holding its own keys and attached to one content-store replica. The
// actor-side work (sealing, unwrapping, decrypting) happens here, outside the
// network, the same way a real client would do it.
//
// Every random choice derives from the single seed.

#ifndef CTINET_SIMNET_HPP_
#define CTINET_SIMNET_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctinet/network.hpp"
#include "json.hpp"

namespace ctinet::sim {

inline constexpr std::int64_t kEpoch = 1'700'000'000;

struct Actor {
  std::string name;
  std::vector<Role> roles;
  KeyPair keys;
  AccountId account_id;
  std::size_t node = 0;
};

enum class Release { Valid, None, Wrong };

class SimNetwork {
 public:
  SimNetwork(std::uint64_t seed, NetworkConfig config, std::size_t replicas,
             const std::vector<std::pair<std::string, std::vector<Role>>>& actors);

  Network& net() { return *net_; }
  const Network& net() const { return *net_; }
  Rng& rng() { return rng_; }
  std::int64_t now() const { return *now_; }
  TickResult advance(std::int64_t seconds);
  ContentStore& replica(std::size_t node) { return *replicas_.at(node); }

  Actor& actor(const std::string& name);
  bool has_actor(const std::string& name) const { return actors_.contains(name); }
  const std::map<std::string, Actor>& actors() const { return actors_; }
  /// Actor name for an account id, or the id itself.
  std::string name_of(const AccountId& id) const;
  AccountId id_of(const std::string& name) const;
  /// The first bootstrapped Authority.
  const Actor& authority() const;

  AccountId register_actor(const std::string& name,
                           std::optional<std::vector<Role>> roles = std::nullopt,
                           std::optional<std::string> docs = std::nullopt);
  /// request -> approve -> registration fee -> certification if Verifier.
  void onboard(const std::string& name, std::optional<std::string> docs = std::nullopt);

  SubmitResult submit(const std::string& contributor, const nlohmann::json& metadata,
                      const Bytes& plaintext, std::optional<std::string> channel);
  void attach(const std::string& contributor, const std::string& submission_id,
              bool dangling = false);
  /// The verifier opens its copy, checks the plaintext, rates and releases.
  std::optional<QualityDecision> verdict(const std::string& verifier,
                                         const std::string& submission_id,
                                         std::array<std::uint32_t, 3> scores,
                                         bool duplicate, const std::string& report,
                                         Release release);
  /// Delivers the next key and has the consumer open it. Returns the
  /// recovered plaintext; InvariantViolation if it differs.
  std::pair<Delivery, Bytes> deliver_and_open(const std::string& order_id);
  ReportReceipt report(const std::string& contributor, const std::string& authority,
                       const nlohmann::json& metadata, const Bytes& plaintext);
  Bytes open_report(const std::string& authority, const std::string& report_id);

  const Bytes& plaintext_of(const std::string& submission_id) const;
  static nlohmann::json default_metadata(const std::string& label, TlpLevel tlp);

 private:
  std::shared_ptr<std::int64_t> now_;
  Rng rng_;
  Rng actor_rng_;
  std::vector<std::unique_ptr<ContentStore>> replicas_;
  std::unique_ptr<Network> net_;
  std::map<std::string, Actor> actors_;
  std::map<AccountId, std::string> names_;
  std::optional<std::string> authority_;
  std::map<std::string, Bytes> plaintexts_;
  std::map<std::string, Bytes> report_plaintexts_;
};

/// Parses a NetworkConfig from a scenario "config" object or a flat
/// key-value map (same keys).
NetworkConfig network_config_from_json(const nlohmann::json& config);

struct ScenarioScript {
  std::string name;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::size_t replicas = 3;
  std::vector<std::pair<std::string, std::vector<Role>>> actors;
  std::vector<nlohmann::json> steps;
  /// Not part of the script format: write chain files here when set.
  std::optional<std::filesystem::path> persist_dir;

  /// ScriptInvalid on any structural problem.
  static ScenarioScript from_json(const nlohmann::json& j);
  static ScenarioScript load(const std::filesystem::path& path);
};

struct StepResult {
  std::size_t index = 0;
  std::string op;
  std::string outcome;  // "ok" or an error code name
  nlohmann::json detail;
};

struct Trace {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<StepResult> steps;
  StateDigests digests;
  StateDigests replay;
  std::map<std::string, std::uint64_t> coverage;
  nlohmann::json channels;
  std::int64_t fees_collected_cents = 0;

  nlohmann::json to_json() const;
  std::string dump() const;
};

/// Runs every step against a fresh network. The first step whose outcome or
/// checks differ from the script raises ExpectationMismatch.
Trace run_scenario(const ScenarioScript& script);

struct FuzzOptions {
  /// Flip one bit in a committed block right after this op (test hook).
  std::optional<std::size_t> tamper_after;
  std::size_t check_every = 100;
  /// Called with the final network after the last check.
  std::function<void(Network&)> on_finish;
};

struct FuzzReport {
  std::uint64_t seed = 0;
  std::size_t ops = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t checks = 0;
  std::map<std::string, std::size_t> by_op;
  std::map<std::string, std::size_t> errors;
  bool success = true;
  std::string violation;
  StateDigests digests;

  nlohmann::json to_json() const;
};

FuzzReport fuzz_protocol(std::uint64_t seed, std::size_t n_ops,
                         const FuzzOptions& options = {});

}  // namespace ctinet::sim

#endif  // CTINET_SIMNET_HPP_

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

// HTTP/JSON node service over one Network.
//
// Clients do their own sealing and decryption; the node only ever sees
// ciphertext, wrapped keys and metadata. Sessions are bearer tokens issued
// by POST /login.

#ifndef CTINET_NODE_HPP_
#define CTINET_NODE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ctinet/network.hpp"
#include "json.hpp"

namespace ctinet::node {

struct NodeConfig {
  std::string host = "127.0.0.1";
  int port = 8640;  // 0 picks a free port
  std::filesystem::path data_dir;
  std::filesystem::path escrow_key;
  std::string authority_username = "authority";
  PublicKey authority_public_key;
  /// "scrypt$N$r$p$salt$hash" as produced by hash_password().
  std::string authority_password_hash;
  std::int64_t session_ttl_seconds = 24 * 3600;
  std::uint64_t scrypt_n = 16384;
  std::uint32_t scrypt_r = 8;
  std::uint32_t scrypt_p = 1;
  std::int64_t tick_interval_seconds = 60;
  std::optional<std::filesystem::path> console_dir;
  /// Protocol parameters, same keys as a scenario "config" object.
  nlohmann::json network = nlohmann::json::object();

  /// ConfigInvalid for unknown keys, bad values or unresolvable paths.
  static NodeConfig from_map(const std::map<std::string, std::string>& kv,
                             const std::filesystem::path& base_dir = {});
  /// `key = value` lines; '#' starts a comment.
  static NodeConfig load(const std::filesystem::path& path);
};

std::map<std::string, std::string> parse_key_values(const std::string& text);

std::string hash_password(std::string_view password, std::uint64_t n, std::uint32_t r,
                          std::uint32_t p, Rng& rng);
bool verify_password(std::string_view password, const std::string& encoded);

/// Writes {"public_key", "secret_key"} hex JSON with owner-only permissions.
void write_keyfile(const std::filesystem::path& path, const KeyPair& keys);
KeyPair read_keyfile(const std::filesystem::path& path);

/// HTTP status for an error code.
int http_status(ErrorCode code);

struct NodeOptions {
  /// Defaults to wall-clock seconds.
  std::optional<Clock> clock;
  /// Defaults to OS entropy.
  std::optional<Rng> rng;
  /// Run the periodic tick thread.
  bool background_tick = true;
};

class Node {
 public:
  /// Locks the data directory (DataDirLocked), loads keys and state.
  Node(NodeConfig config, NodeOptions options = {});
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Binds (PortInUse) and serves on a background thread.
  void start();
  /// Stops serving and flushes persistence. Idempotent.
  void stop();
  /// Blocks until the server thread exits.
  void wait();
  int port() const { return bound_port_; }

  Network& network() { return *net_; }

 private:
  struct Impl;
  NodeConfig config_;
  std::unique_ptr<Network> net_;
  std::unique_ptr<Impl> impl_;
  int lock_fd_ = -1;
  int bound_port_ = 0;
};

}  // namespace ctinet::node

#endif  // CTINET_NODE_HPP_

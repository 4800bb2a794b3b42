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

#include "ctinet/node.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include "ctinet/crypto.hpp"
#include "ctinet/simnet.hpp"
#include "httplib.h"

namespace ctinet::node {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& value, std::int64_t lo,
                       std::int64_t hi) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used == value.size() && v >= lo && v <= hi) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::ConfigInvalid, key + " must be an integer in [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "]");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

const std::set<std::string>& fee_keys() {
  static const std::set<std::string> keys = {"registration_fee",     "subscription_fee",
                                             "period",               "contributor_discount",
                                             "verifier_discount",    "discount_cap"};
  return keys;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      fail(ErrorCode::ConfigInvalid, "duplicate key " + key);
    }
  }
  return kv;
}

NodeConfig NodeConfig::from_map(const std::map<std::string, std::string>& kv,
                                const std::filesystem::path& base_dir) {
  NodeConfig c;
  bool have_key = false;
  for (const auto& [key, value] : kv) {
    if (key == "listen") {
      const auto colon = value.rfind(':');
      if (colon == std::string::npos) fail(ErrorCode::ConfigInvalid, "listen must be host:port");
      c.host = value.substr(0, colon);
      c.port = static_cast<int>(parse_int(key, value.substr(colon + 1), 0, 65535));
    } else if (key == "data_dir") {
      c.data_dir = resolve(base_dir, value);
    } else if (key == "escrow_key") {
      c.escrow_key = resolve(base_dir, value);
    } else if (key == "authority_username") {
      c.authority_username = value;
    } else if (key == "authority_public_key") {
      try {
        c.authority_public_key = PublicKey::from_hex(value);
      } catch (const Error&) {
        fail(ErrorCode::ConfigInvalid, "authority_public_key must be 64 hex characters");
      }
      have_key = true;
    } else if (key == "authority_password_hash") {
      c.authority_password_hash = value;
    } else if (key == "session_ttl_hours") {
      c.session_ttl_seconds = parse_int(key, value, 1, 24 * 365) * 3600;
    } else if (key == "scrypt_n") {
      c.scrypt_n = static_cast<std::uint64_t>(parse_int(key, value, 2, 1 << 22));
      if ((c.scrypt_n & (c.scrypt_n - 1)) != 0) {
        fail(ErrorCode::ConfigInvalid, "scrypt_n must be a power of two");
      }
    } else if (key == "scrypt_r") {
      c.scrypt_r = static_cast<std::uint32_t>(parse_int(key, value, 1, 64));
    } else if (key == "scrypt_p") {
      c.scrypt_p = static_cast<std::uint32_t>(parse_int(key, value, 1, 64));
    } else if (key == "tick_interval_seconds") {
      c.tick_interval_seconds = parse_int(key, value, 1, 86400);
    } else if (key == "console_dir") {
      c.console_dir = resolve(base_dir, value);
    } else if (key == "fee_schedule") {
      const auto path = resolve(base_dir, value);
      std::ifstream in(path);
      if (!in) fail(ErrorCode::ConfigInvalid, "cannot read fee schedule " + path.string());
      std::stringstream ss;
      ss << in.rdbuf();
      for (const auto& [fk, fv] : parse_key_values(ss.str())) {
        if (!fee_keys().contains(fk)) {
          fail(ErrorCode::ConfigInvalid, "fee schedule: unknown key " + fk);
        }
        c.network[fk] = fv;
      }
    } else {
      c.network[key] = value;
    }
  }
  if (c.data_dir.empty()) fail(ErrorCode::ConfigInvalid, "data_dir is required");
  if (c.escrow_key.empty()) fail(ErrorCode::ConfigInvalid, "escrow_key is required");
  if (!have_key) fail(ErrorCode::ConfigInvalid, "authority_public_key is required");
  if (c.authority_username.empty()) fail(ErrorCode::ConfigInvalid, "authority_username is empty");
  // Surfaces unknown keys and out-of-range thresholds now.
  (void)sim::network_config_from_json(c.network);
  return c;
}

NodeConfig NodeConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigInvalid, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_map(parse_key_values(ss.str()), path.parent_path());
}

std::string hash_password(std::string_view password, std::uint64_t n, std::uint32_t r,
                          std::uint32_t p, Rng& rng) {
  const Bytes salt = rng.bytes(16);
  const Bytes hash = crypto::scrypt(password, salt, n, r, p, 32);
  return "scrypt$" + std::to_string(n) + "$" + std::to_string(r) + "$" + std::to_string(p) + "$" +
         to_hex(salt) + "$" + to_hex(hash);
}

bool verify_password(std::string_view password, const std::string& encoded) {
  std::vector<std::string> parts;
  std::stringstream ss(encoded);
  for (std::string part; std::getline(ss, part, '$');) parts.push_back(part);
  if (parts.size() != 6 || parts[0] != "scrypt") return false;
  try {
    const std::uint64_t n = std::stoull(parts[1]);
    const std::uint64_t r = std::stoull(parts[2]);
    const std::uint64_t p = std::stoull(parts[3]);
    const Bytes salt = from_hex(parts[4]);
    const Bytes expected = from_hex(parts[5]);
    const Bytes got = crypto::scrypt(password, salt, n, r, p, expected.size());
    return crypto::equal(got, expected);
  } catch (const std::exception&) {
    return false;
  }
}

void write_keyfile(const std::filesystem::path& path, const KeyPair& keys) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) fail(ErrorCode::ConfigInvalid, "cannot write " + path.string());
  const std::string text = json{{"public_key", keys.public_key.hex()},
                                {"secret_key", keys.secret_key.hex()}}
                               .dump(2) +
                           "\n";
  const bool ok = ::write(fd, text.data(), text.size()) == static_cast<ssize_t>(text.size());
  ::close(fd);
  if (!ok) fail(ErrorCode::ConfigInvalid, "short write to " + path.string());
}

KeyPair read_keyfile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigInvalid, "cannot read key file " + path.string());
  try {
    const json j = json::parse(in);
    KeyPair k{PublicKey::from_hex(j.at("public_key").get<std::string>()),
              SecretKey::from_hex(j.at("secret_key").get<std::string>())};
    if (gen_keypair(ByteView(k.secret_key.bytes)).public_key != k.public_key) {
      fail(ErrorCode::ConfigInvalid, "key file public and secret halves do not match");
    }
    return k;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    fail(ErrorCode::ConfigInvalid, "malformed key file " + path.string());
  } catch (const std::exception&) {
    fail(ErrorCode::ConfigInvalid, "malformed key file " + path.string());
  }
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::AccessDenied:
    case ErrorCode::NotAuthority:
    case ErrorCode::NotActive:
    case ErrorCode::NotRegistered:
    case ErrorCode::NotAssigned:
      return 403;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownChannel:
    case ErrorCode::NotListed:
      return 404;
    case ErrorCode::DuplicateUsername:
    case ErrorCode::DuplicateChannelId:
    case ErrorCode::DuplicateVote:
    case ErrorCode::DuplicateVerdict:
    case ErrorCode::WrongState:
    case ErrorCode::VerdictsIncomplete:
    case ErrorCode::NoKeysRemaining:
    case ErrorCode::MembershipImmutable:
    case ErrorCode::InsufficientVerifiers:
    case ErrorCode::InsufficientRatings:
      return 409;
    case ErrorCode::ObjectTooLarge:
      return 413;
    case ErrorCode::Internal:
    case ErrorCode::InvariantViolation:
      return 500;
    default:
      return 400;
  }
}

// --- service ---------------------------------------------------------------

namespace {

struct Session {
  AccountId account_id;
  std::vector<std::string> roles;
  std::int64_t expiry = 0;
};

json error_body(ErrorCode code, const std::string& message) {
  return json{{"code", to_string(code)}, {"message", message}, {"detail", json::object()}};
}

json parse_body(const httplib::Request& req) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception&) {
    fail(ErrorCode::SchemaViolation, "request body must be JSON");
  }
  if (!j.is_object()) fail(ErrorCode::SchemaViolation, "request body must be a JSON object");
  return j;
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::SchemaViolation, std::string("missing field ") + key);
  return j[key];
}

std::string str_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) fail(ErrorCode::SchemaViolation, std::string(key) + " must be a string");
  return v.get<std::string>();
}

bool bool_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) fail(ErrorCode::SchemaViolation, std::string(key) + " must be a boolean");
  return v.get<bool>();
}

std::int64_t int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) {
    fail(ErrorCode::SchemaViolation, std::string(key) + " must be an integer");
  }
  return v.get<std::int64_t>();
}

std::uint32_t score_field(const json& j, const char* key) {
  const std::int64_t v = int_field(j, key);
  if (v < 0 || v > 1000) fail(ErrorCode::ScoreOutOfRange, std::string(key) + " out of range");
  return static_cast<std::uint32_t>(v);
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Node::Impl {
  Impl(Node& owner, Clock clock) : node(owner), clock(std::move(clock)), token_rng(Rng::from_os()) {}

  Node& node;
  Clock clock;
  httplib::Server server;
  std::thread server_thread;
  std::thread tick_thread;
  std::mutex tick_mu;
  std::condition_variable tick_cv;
  bool stopping = false;
  std::atomic<bool> stopped{false};

  std::mutex mu;  // sessions, credentials, token_rng
  Rng token_rng;
  std::map<std::string, Session> sessions;
  std::map<std::string, std::string> credentials;  // username -> password hash
  std::filesystem::path credentials_path;

  void load_credentials() {
    std::ifstream in(credentials_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        credentials[j.at("username").get<std::string>()] = j.at("hash").get<std::string>();
      } catch (const std::exception&) {
        // A torn final line from a crash; the account can re-register a password.
      }
    }
  }

  void store_credentials(const std::string& username, const std::string& hash) {
    std::ofstream out(credentials_path, std::ios::app);
    out << json{{"username", username}, {"hash", hash}}.dump() << "\n";
    out.flush();
    if (!out) fail(ErrorCode::Internal, "cannot persist credentials");
    credentials[username] = hash;
  }

  std::optional<Session> session_of(const httplib::Request& req) {
    const std::string h = req.get_header_value("Authorization");
    if (h.rfind("Bearer ", 0) != 0) return std::nullopt;
    std::lock_guard lock(mu);
    auto it = sessions.find(h.substr(7));
    if (it == sessions.end()) return std::nullopt;
    if (it->second.expiry <= clock()) {
      sessions.erase(it);
      return std::nullopt;
    }
    return it->second;
  }

  Session require_session(const httplib::Request& req) {
    auto s = session_of(req);
    if (!s) fail(ErrorCode::Unauthorized, "a valid session token is required");
    return *s;
  }

  bool is_authority(const AccountId& id) {
    const auto a = node.net_->registry().account(id);
    return a && a->has_role(Role::Authority);
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  Handler wrap(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_body(e.code(), e.what()));
      } catch (const json::exception& e) {
        reply(res, 400, error_body(ErrorCode::SchemaViolation, e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, error_body(ErrorCode::Internal, e.what()));
      }
    };
  }

  void routes();
  void tick_loop(std::int64_t interval);
};

void Node::Impl::routes() {
  Network& net = *node.net_;
  const NodeConfig& cfg = node.config_;

  server.Get("/health", wrap([&net](const httplib::Request&, httplib::Response& res) {
               json heights = json::object();
               for (const auto& ch : net.ledger().channel_ids()) {
                 heights[ch] = net.ledger().height(ch);
               }
               reply(res, 200, json{{"status", "ok"}, {"heights", heights}});
             }));

  server.Post("/register", wrap([this, &net, &cfg](const httplib::Request& req,
                                                   httplib::Response& res) {
                const json b = parse_body(req);
                RegistrationRequest r;
                r.username = str_field(b, "username");
                const std::string password = str_field(b, "password");
                if (password.size() < 8) {
                  fail(ErrorCode::SchemaViolation, "password must be at least 8 characters");
                }
                r.public_key = PublicKey::from_hex(str_field(b, "public_key"));
                r.id_docs = to_bytes(str_field(b, "id_docs"));
                const json& roles = field(b, "roles");
                if (!roles.is_array()) fail(ErrorCode::SchemaViolation, "roles must be an array");
                for (const auto& v : roles) {
                  auto role = v.is_string() ? role_from_string(v.get<std::string>()) : std::nullopt;
                  if (!role) fail(ErrorCode::SchemaViolation, "unknown role " + v.dump());
                  r.claimed_roles.push_back(*role);
                }
                std::string hash;
                {
                  std::lock_guard lock(mu);
                  hash = hash_password(password, cfg.scrypt_n, cfg.scrypt_r, cfg.scrypt_p,
                                       token_rng);
                }
                const AccountId id = net.request_account(r);
                std::lock_guard lock(mu);
                store_credentials(r.username, hash);
                reply(res, 201, json{{"account_id", id},
                                     {"state", to_string(net.registry().account(id)->state)}});
              }));

  server.Post("/login", wrap([this, &net, &cfg](const httplib::Request& req,
                                                httplib::Response& res) {
                const json b = parse_body(req);
                const std::string username = str_field(b, "username");
                const std::string password = str_field(b, "password");
                std::string hash;
                {
                  std::lock_guard lock(mu);
                  if (username == cfg.authority_username) {
                    hash = cfg.authority_password_hash;
                  } else if (auto it = credentials.find(username); it != credentials.end()) {
                    hash = it->second;
                  }
                }
                const auto account = net.registry().account_by_username(username);
                if (hash.empty() || !account || !verify_password(password, hash)) {
                  fail(ErrorCode::Unauthorized, "unknown username or wrong password");
                }
                Session s{account->account_id, {}, clock() + cfg.session_ttl_seconds};
                for (Role role : account->roles) s.roles.emplace_back(to_string(role));
                std::string token;
                {
                  std::lock_guard lock(mu);
                  token = to_hex(token_rng.bytes(32));
                  sessions[token] = s;
                }
                reply(res, 200, json{{"token", token},
                                     {"account_id", s.account_id},
                                     {"roles", s.roles},
                                     {"expires_at", s.expiry}});
              }));

  server.Post("/logout", wrap([this](const httplib::Request& req, httplib::Response& res) {
                require_session(req);
                std::lock_guard lock(mu);
                sessions.erase(req.get_header_value("Authorization").substr(7));
                reply(res, 200, json{{"ok", true}});
              }));

  server.Get("/accounts/me", wrap([this, &net](const httplib::Request& req,
                                               httplib::Response& res) {
               const Session s = require_session(req);
               const auto a = net.registry().account(s.account_id);
               if (!a) fail(ErrorCode::NotRegistered, "account is gone");
               json j = a->to_json(is_authority(s.account_id));
               j["discount_cap"] = net.registry().fees().discount_cap;
               reply(res, 200, j);
             }));

  server.Get("/fees/due", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const auto kind = fee_kind_from_string(req.get_param_value("kind"));
               if (!kind) fail(ErrorCode::SchemaViolation, "kind must be registration or subscription");
               reply(res, 200, json{{"amount_cents", net.registry().amount_due(s.account_id, *kind)}});
             }));

  server.Post("/fees/pay", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const auto kind = fee_kind_from_string(str_field(b, "kind"));
                if (!kind) fail(ErrorCode::SchemaViolation, "kind must be registration or subscription");
                const Receipt r = net.pay_fee(s.account_id, *kind, int_field(b, "amount_cents"));
                const auto a = net.registry().account(s.account_id);
                reply(res, 200, json{{"tx_id", r.tx_id},
                                     {"state", to_string(a->state)},
                                     {"subscription_expiry", a->subscription_expiry}});
              }));

  server.Post("/authority/verify", wrap([this, &net](const httplib::Request& req,
                                                     httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const AccountState st = net.authority_verify(s.account_id, str_field(b, "account_id"),
                                                             bool_field(b, "approve"));
                reply(res, 200, json{{"state", to_string(st)}});
              }));

  server.Post("/authority/certify", wrap([this, &net](const httplib::Request& req,
                                                      httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const std::string cert = net.certify_verifier(
                    s.account_id, str_field(b, "account_id"), to_bytes(str_field(b, "credentials")));
                reply(res, 200, json{{"cert_id", cert}});
              }));

  server.Get("/authority/pending", wrap([this, &net](const httplib::Request& req,
                                                     httplib::Response& res) {
               const Session s = require_session(req);
               if (!is_authority(s.account_id)) fail(ErrorCode::NotAuthority, "Authority only");
               json out = json::array();
               for (const auto& id : net.registry().pending()) {
                 out.push_back(net.registry().account(id)->to_json(true));
               }
               reply(res, 200, out);
             }));

  server.Get(R"(/authority/identity/([A-Za-z0-9-]+))",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const Bytes sealed = net.registry().identity_record(s.account_id, req.matches[1]);
               reply(res, 200, json{{"sealed", to_hex(sealed)}});
             }));

  server.Post("/content", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                require_session(req);
                const ContentId id = net.store().put(to_bytes(req.body));
                reply(res, 201, json{{"cid", id.str()}});
              }));

  server.Get(R"(/content/([A-Za-z0-9]+))",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               require_session(req);
               const Bytes data = net.store().get(std::string_view(req.matches[1].str()));
               res.status = 200;
               res.set_content(std::string(data.begin(), data.end()), "application/octet-stream");
             }));

  server.Post("/cti", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                std::optional<std::string> channel;
                if (b.contains("channel")) channel = str_field(b, "channel");
                const SubmitResult r = net.submit_cti(s.account_id, field(b, "metadata"),
                                                      str_field(b, "fingerprint"), channel);
                json out{{"submission_id", r.submission_id}, {"status", to_string(r.status)}};
                if (r.verifiers) out["verifiers"] = *r.verifiers;
                reply(res, 201, out);
              }));

  server.Get(R"(/cti/([A-Za-z0-9-]+))",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const auto pkg = net.exchange().package(req.matches[1]);
               if (!pkg) fail(ErrorCode::NotFound, "no such submission");
               const bool own = pkg->contributor == s.account_id || is_authority(s.account_id);
               if (!own && !net.ledger().check_access(s.account_id, pkg->home_channel,
                                                      AccessMode::Read).allowed) {
                 fail(ErrorCode::AccessDenied, "no read access to the submission's channel");
               }
               json out{{"submission_id", pkg->submission_id},
                        {"status", to_string(pkg->status)},
                        {"tlp", to_string(pkg->tlp)},
                        {"home_channel", pkg->home_channel},
                        {"metadata", pkg->metadata},
                        {"verdicts", pkg->verdicts.size()}};
               if (own) out["package"] = pkg->to_json();
               reply(res, 200, out);
             }));

  server.Post(R"(/cti/([A-Za-z0-9-]+)/envelope)",
              wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                net.attach_envelope(s.account_id, req.matches[1],
                                    EnvelopeSet::from_json(field(b, "envelope")));
                reply(res, 200, json{{"status", to_string(
                                                    net.exchange().package(req.matches[1])->status)}});
              }));

  server.Get("/assignments", wrap([this, &net](const httplib::Request& req,
                                               httplib::Response& res) {
               const Session s = require_session(req);
               const auto a = net.registry().account(s.account_id);
               if (!a || !a->has_role(Role::Verifier)) {
                 fail(ErrorCode::AccessDenied, "the assignment queue is for Verifiers");
               }
               reply(res, 200, net.exchange().assignments(s.account_id));
             }));

  server.Post("/verdicts", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                VerdictInput v;
                v.verifier = s.account_id;
                v.submission_id = str_field(b, "submission_id");
                v.accuracy = score_field(b, "accuracy");
                v.usability = score_field(b, "usability");
                v.relevance = score_field(b, "relevance");
                v.duplicate_flag = b.contains("duplicate") && bool_field(b, "duplicate");
                v.report = to_bytes(str_field(b, "report"));
                if (b.contains("key_release")) {
                  v.key_release = WrappedKey::from_hex(str_field(b, "key_release"));
                }
                const auto d = net.submit_verdict(v);
                json out{{"verdicts", net.exchange().package(v.submission_id)->verdicts.size()}};
                if (d) out["decision"] = d->to_json();
                reply(res, 201, out);
              }));

  server.Get("/marketplace", wrap([this, &net](const httplib::Request& req,
                                               httplib::Response& res) {
               const auto s = session_of(req);
               std::map<std::string, std::string> kv;
               std::optional<std::string> channel;
               for (const auto& [k, v] : req.params) {
                 if (k == "channel") {
                   channel = v;
                 } else if (!v.empty()) {
                   kv[k] = v;
                 }
               }
               const Principal who = s ? Principal{s->account_id} : std::nullopt;
               json out = json::array();
               for (const auto& l : net.exchange().list_marketplace(
                        who, ListingFilter::from_map(kv), channel)) {
                 out.push_back(l.to_json());
               }
               reply(res, 200, out);
             }));

  server.Post("/orders", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const std::string id = net.place_order(s.account_id, str_field(b, "submission_id"));
                reply(res, 201, net.exchange().order(id)->to_json());
              }));

  auto own_order = [this, &net](const Session& s, const std::string& id) {
    const auto o = net.exchange().order(id);
    if (!o) fail(ErrorCode::NotFound, "no such order");
    if (o->consumer != s.account_id) fail(ErrorCode::AccessDenied, "not your order");
    return *o;
  };

  server.Get(R"(/orders/([A-Za-z0-9-]+))",
             wrap([this, own_order](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               reply(res, 200, own_order(s, req.matches[1]).to_json());
             }));

  // While a key is outstanding this re-serves it; after a failed attempt (or
  // before the first) it delivers the next one.
  server.Get(R"(/orders/([A-Za-z0-9-]+)/key)",
             wrap([this, &net, own_order](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const Order o = own_order(s, req.matches[1]);
               if (o.state == OrderState::KeyDelivered && !o.deliveries.empty()) {
                 reply(res, 200, o.deliveries.back().to_json());
                 return;
               }
               reply(res, 200, net.deliver_key(s.account_id, o.order_id).to_json());
             }));

  server.Post(R"(/orders/([A-Za-z0-9-]+)/confirm)",
              wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                std::optional<std::uint32_t> rating;
                if (b.contains("rating") && !b["rating"].is_null()) {
                  rating = score_field(b, "rating");
                }
                const OrderState st =
                    net.confirm_decryption(s.account_id, req.matches[1], bool_field(b, "success"), rating);
                reply(res, 200, json{{"state", to_string(st)}});
              }));

  server.Post("/ratings/crosscheck", wrap([this, &net](const httplib::Request& req,
                                                       httplib::Response& res) {
                const Session s = require_session(req);
                if (!net.registry().is_active(s.account_id)) {
                  fail(ErrorCode::NotActive, "an Active account is required");
                }
                const json b = parse_body(req);
                reply(res, 200, net.crosscheck_ratings(str_field(b, "submission_id")).to_json());
              }));

  server.Post("/channels", wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const auto tlp = tlp_from_string(str_field(b, "tlp"));
                if (!tlp) fail(ErrorCode::SchemaViolation, "unknown tlp");
                const json& m = field(b, "members");
                if (!m.is_array()) fail(ErrorCode::SchemaViolation, "members must be an array");
                std::set<AccountId> members;
                for (const auto& v : m) {
                  if (!v.is_string()) fail(ErrorCode::SchemaViolation, "members must be account ids");
                  members.insert(v.get<std::string>());
                }
                std::optional<std::string> id;
                if (b.contains("channel_id")) id = str_field(b, "channel_id");
                const std::string ch = net.create_channel(s.account_id, *tlp, members, id);
                reply(res, 201, json{{"channel_id", ch}});
              }));

  server.Post(R"(/channels/([A-Za-z0-9._-]+)/members)",
              wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                net.add_member(req.matches[1], s.account_id, str_field(b, "account_id"));
                reply(res, 200, json{{"members", net.ledger().channel(req.matches[1]).members}});
              }));

  server.Get(R"(/channels/([A-Za-z0-9._-]+)/members)",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const AccessDecision d =
                   net.ledger().check_access(s.account_id, req.matches[1], AccessMode::Read);
               if (!d.allowed) fail(ErrorCode::AccessDenied, std::string(to_string(d.reason)));
               const Channel c = net.ledger().channel(req.matches[1]);
               reply(res, 200, json{{"channel_id", c.channel_id},
                                    {"tlp", to_string(c.tlp)},
                                    {"members", c.members}});
             }));

  server.Get(R"(/channels/([A-Za-z0-9._-]+)/txs)",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               TxFilter f;
               if (req.has_param("kind")) {
                 f.kind = tx_kind_from_string(req.get_param_value("kind"));
                 if (!f.kind) fail(ErrorCode::SchemaViolation, "unknown tx kind");
               }
               auto ts = [&req](const char* key) -> std::optional<std::uint64_t> {
                 if (!req.has_param(key)) return std::nullopt;
                 try {
                   return std::stoull(req.get_param_value(key));
                 } catch (const std::exception&) {
                   fail(ErrorCode::SchemaViolation, std::string(key) + " must be an integer");
                 }
               };
               f.since_timestamp = ts("since");
               f.until_timestamp = ts("until");
               json out = json::array();
               for (const auto& tx : net.ledger().read(req.matches[1], s.account_id, f)) {
                 out.push_back(tx.to_json());
               }
               reply(res, 200, out);
             }));

  server.Post("/reports/authority", wrap([this, &net](const httplib::Request& req,
                                                      httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const ReportReceipt r = net.report_to_authority(
                    s.account_id, field(b, "metadata"), EnvelopeSet::from_json(field(b, "envelope")),
                    str_field(b, "authority"));
                reply(res, 201, json{{"report_id", r.report_id},
                                     {"channel_id", r.channel_id},
                                     {"tx_id", r.tx_id},
                                     {"timestamp", r.timestamp}});
              }));

  server.Get(R"(/reports/([A-Za-z0-9-]+)/key)",
             wrap([this, &net](const httplib::Request& req, httplib::Response& res) {
               const Session s = require_session(req);
               const WrappedKey k = net.fetch_report_key(s.account_id, req.matches[1]);
               const auto r = net.exchange().report(req.matches[1]);
               reply(res, 200, json{{"key_blob", k.hex()},
                                    {"ciphertext", r->envelope.consumer_copy.str()}});
             }));

  server.Post("/votes/removal", wrap([this, &net](const httplib::Request& req,
                                                  httplib::Response& res) {
                const Session s = require_session(req);
                const json b = parse_body(req);
                const VoteTally t =
                    net.vote_removal(s.account_id, str_field(b, "target"), bool_field(b, "remove"));
                reply(res, 200, json{{"target", t.target},
                                     {"remove_votes", t.remove_votes},
                                     {"keep_votes", t.keep_votes},
                                     {"active_count", t.active_count},
                                     {"removed", t.removed}});
              }));

  server.Get("/export/white", wrap([&net](const httplib::Request&, httplib::Response& res) {
               json blocks = json::array();
               for (const auto& b : net.ledger().blocks(std::string(kPublicChannel))) {
                 blocks.push_back(b.to_json());
               }
               reply(res, 200, json{{"channel", kPublicChannel}, {"blocks", blocks}});
             }));

  if (cfg.console_dir) server.set_mount_point("/console", cfg.console_dir->string());
}

void Node::Impl::tick_loop(std::int64_t interval) {
  std::unique_lock lock(tick_mu);
  while (!stopping) {
    tick_cv.wait_for(lock, std::chrono::seconds(interval));
    if (stopping) break;
    lock.unlock();
    try {
      node.net_->tick();
    } catch (const std::exception&) {
      // The next tick retries.
    }
    lock.lock();
  }
}

Node::Node(NodeConfig config, NodeOptions options) : config_(std::move(config)) {
  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir, ec);
  const auto lock_path = config_.data_dir / "LOCK";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (lock_fd_ < 0) {
    fail(ErrorCode::DataDirLocked, "data directory " + config_.data_dir.string() + " is not writable");
  }
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    fail(ErrorCode::DataDirLocked, "data directory " + config_.data_dir.string() +
                                       " is in use by another node");
  }
  try {
    if (::access(config_.data_dir.c_str(), W_OK) != 0) {
      fail(ErrorCode::DataDirLocked, "data directory " + config_.data_dir.string() +
                                         " is not writable");
    }
    const KeyPair escrow = read_keyfile(config_.escrow_key);
    NetworkConfig nc = sim::network_config_from_json(config_.network);
    if (!config_.network.contains("auto_progress")) nc.auto_progress = true;
    nc.ledger.persist_dir = config_.data_dir / "chain";
    std::filesystem::create_directories(*nc.ledger.persist_dir);
    nc.store_file = config_.data_dir / "objects.bin";

    Clock clock = options.clock ? *options.clock : Clock([] {
      return static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                            std::chrono::system_clock::now().time_since_epoch())
                                            .count());
    });
    Rng rng = options.rng ? *options.rng : Rng::from_os();
    net_ = std::make_unique<Network>(std::move(nc), clock, std::move(rng), escrow,
                                     config_.authority_public_key);
    if (const auto a = net_->registry().account_by_username(config_.authority_username)) {
      if (a->public_key != config_.authority_public_key.hex()) {
        fail(ErrorCode::ConfigInvalid, "authority_public_key differs from the registered Authority");
      }
    } else {
      net_->bootstrap_authority(config_.authority_username, config_.authority_public_key);
    }
    impl_ = std::make_unique<Impl>(*this, clock);
    impl_->credentials_path = config_.data_dir / "credentials.jsonl";
    impl_->load_credentials();
    impl_->routes();
    if (options.background_tick) {
      const std::int64_t interval = config_.tick_interval_seconds;
      impl_->tick_thread = std::thread([this, interval] { impl_->tick_loop(interval); });
    }
  } catch (...) {
    net_.reset();
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw;
  }
}

Node::~Node() {
  stop();
  wait();
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Node::start() {
  if (config_.port == 0) {
    bound_port_ = impl_->server.bind_to_any_port(config_.host);
    if (bound_port_ <= 0) fail(ErrorCode::PortInUse, "cannot bind " + config_.host);
  } else {
    if (!impl_->server.bind_to_port(config_.host, config_.port)) {
      fail(ErrorCode::PortInUse,
           "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    bound_port_ = config_.port;
  }
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void Node::stop() {
  if (!impl_ || impl_->stopped.exchange(true)) return;
  {
    std::lock_guard lock(impl_->tick_mu);
    impl_->stopping = true;
  }
  impl_->tick_cv.notify_all();
  impl_->server.stop();
  if (impl_->tick_thread.joinable()) impl_->tick_thread.join();
  net_->flush();
}

void Node::wait() {
  if (impl_ && impl_->server_thread.joinable()) impl_->server_thread.join();
}

}  // namespace ctinet::node

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

#include <fstream>

#include "ctinet/node.hpp"
#include "ctinet/simnet.hpp"
#include "httplib.h"
#include "test_util.hpp"

using namespace ctinet;
using ctinet::test::error_of;
using ctinet::test::TempDir;
using json = nlohmann::json;

namespace {

constexpr std::int64_t kNow = 1'700'000'000;
constexpr std::uint64_t kNetSeed = 5;
constexpr const char* kAuthorityPassword = "correct horse battery";

struct Reply {
  int status = 0;
  json body;
};

/// A node on a temp data dir with a fixed clock and seeded rng.
struct NodeEnv {
  TempDir dir{"node"};
  Rng rng = Rng::from_u64(42);
  KeyPair escrow = gen_keypair(rng);
  KeyPair authority = gen_keypair(rng);
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(kNow);
  std::unique_ptr<node::Node> node;
  std::unique_ptr<httplib::Client> cli;

  NodeEnv() {
    node::write_keyfile(dir.path() / "escrow.key", escrow);
    start();
  }

  node::NodeConfig config() const {
    Rng salt = Rng::from_u64(1);
    return node::NodeConfig::from_map(
        {{"listen", "127.0.0.1:0"},
         {"data_dir", (dir.path() / "data").string()},
         {"escrow_key", (dir.path() / "escrow.key").string()},
         {"authority_public_key", authority.public_key.hex()},
         {"authority_password_hash", node::hash_password(kAuthorityPassword, 16, 8, 1, salt)},
         {"scrypt_n", "16"}});
  }

  void start() {
    auto clock = now;
    node::NodeOptions o;
    o.clock = [clock] { return *clock; };
    o.rng = Rng::from_u64(kNetSeed);
    o.background_tick = false;
    node = std::make_unique<node::Node>(config(), o);
    node->start();
    cli = std::make_unique<httplib::Client>("127.0.0.1", node->port());
  }

  void restart() {
    cli.reset();
    node.reset();
    start();
  }

  static Reply reply_of(const httplib::Result& r) {
    REQUIRE(r);
    Reply out{r->status, json()};
    if (!r->body.empty() && r->get_header_value("Content-Type") == "application/json") {
      out.body = json::parse(r->body);
    }
    if (out.body.is_null()) out.body = r->body;
    return out;
  }
  static httplib::Headers auth(const std::string& token) {
    if (token.empty()) return {};
    return {{"Authorization", "Bearer " + token}};
  }
  Reply get(const std::string& path, const std::string& token = {}) {
    return reply_of(cli->Get(path, auth(token)));
  }
  Reply post(const std::string& path, const json& body, const std::string& token = {}) {
    return reply_of(cli->Post(path, auth(token), body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const Bytes& body, const std::string& token) {
    return reply_of(cli->Post(path, auth(token), to_string(body), "application/octet-stream"));
  }
};

/// The client side of one protocol run, executed against either the HTTP
/// API or a Network directly. Both must end in the same state.
class Driver {
 public:
  virtual ~Driver() = default;
  virtual AccountId register_account(const std::string& name, Role role, const PublicKey& key) = 0;
  virtual void approve(const AccountId& id) = 0;
  virtual void pay_registration(const std::string& name, const AccountId& id) = 0;
  virtual void certify(const AccountId& id) = 0;
  virtual SubmitResult submit(const std::string& name, const json& metadata,
                              const std::string& fingerprint) = 0;
  virtual void attach(const std::string& name, const std::string& sid, const EnvelopeSet& env,
                      const ContentStore& local) = 0;
  /// (ciphertext cid, key blob) of the verifier's copy.
  virtual std::pair<std::string, std::string> assignment(const std::string& name,
                                                         const std::string& sid) = 0;
  virtual Bytes content(const std::string& name, const std::string& cid) = 0;
  virtual void verdict(const std::string& name, const VerdictInput& v) = 0;
  virtual std::string order(const std::string& name, const std::string& sid) = 0;
  virtual Delivery key(const std::string& name, const std::string& oid) = 0;
  virtual std::string confirm(const std::string& name, const std::string& oid, bool ok,
                              std::optional<std::uint32_t> rating) = 0;
  virtual StateDigests digests() = 0;
};

class HttpDriver : public Driver {
 public:
  explicit HttpDriver(NodeEnv& env) : env_(env) {
    const Reply r = env_.post("/login", {{"username", "authority"}, {"password", kAuthorityPassword}});
    REQUIRE(r.status == 200);
    tokens_["authority"] = r.body["token"];
  }

  AccountId register_account(const std::string& name, Role role, const PublicKey& key) override {
    const Reply r = env_.post("/register", {{"username", name},
                                            {"password", "pw-" + name + "-secret"},
                                            {"public_key", key.hex()},
                                            {"id_docs", "passport:" + name},
                                            {"roles", {to_string(role)}}});
    REQUIRE(r.status == 201);
    CHECK(r.body["state"] == "Pending");
    return r.body["account_id"];
  }
  void approve(const AccountId& id) override {
    const Reply r = env_.post("/authority/verify", {{"account_id", id}, {"approve", true}},
                              tokens_["authority"]);
    REQUIRE(r.status == 200);
    CHECK(r.body["state"] == "Verified");
  }
  void pay_registration(const std::string& name, const AccountId&) override {
    const Reply login =
        env_.post("/login", {{"username", name}, {"password", "pw-" + name + "-secret"}});
    REQUIRE(login.status == 200);
    tokens_[name] = login.body["token"];
    const Reply due = env_.get("/fees/due?kind=registration", tokens_[name]);
    REQUIRE(due.status == 200);
    const Reply r = env_.post("/fees/pay",
                              {{"kind", "registration"}, {"amount_cents", due.body["amount_cents"]}},
                              tokens_[name]);
    REQUIRE(r.status == 200);
    CHECK(r.body["state"] == "Active");
  }
  void certify(const AccountId& id) override {
    const Reply r = env_.post("/authority/certify", {{"account_id", id}, {"credentials", "cert:" + id}},
                              tokens_["authority"]);
    REQUIRE(r.status == 200);
  }
  SubmitResult submit(const std::string& name, const json& metadata,
                      const std::string& fingerprint) override {
    const Reply r = env_.post("/cti", {{"metadata", metadata}, {"fingerprint", fingerprint}},
                              tokens_[name]);
    REQUIRE(r.status == 201);
    SubmitResult out{r.body["submission_id"], *cti_status_from_string(r.body["status"].get<std::string>()),
                     std::nullopt};
    if (r.body.contains("verifiers")) out.verifiers = r.body["verifiers"].get<std::array<AccountId, 3>>();
    return out;
  }
  void attach(const std::string& name, const std::string& sid, const EnvelopeSet& env,
              const ContentStore& local) override {
    for (const ContentId& cid : env.content_ids()) {
      const Reply up = env_.post_raw("/content", local.get(cid), tokens_[name]);
      REQUIRE(up.status == 201);
      CHECK(up.body["cid"] == cid.str());
    }
    const Reply r = env_.post("/cti/" + sid + "/envelope", {{"envelope", env.to_json()}}, tokens_[name]);
    REQUIRE(r.status == 200);
    CHECK(r.body["status"] == "UnderVerification");
  }
  std::pair<std::string, std::string> assignment(const std::string& name,
                                                 const std::string& sid) override {
    const Reply r = env_.get("/assignments", tokens_[name]);
    REQUIRE(r.status == 200);
    for (const auto& a : r.body) {
      if (a["submission_id"] == sid) return {a["ciphertext"], a["key_blob"]};
    }
    FAIL("no assignment for " << name);
    return {};
  }
  Bytes content(const std::string& name, const std::string& cid) override {
    const auto res = env_.cli->Get("/content/" + cid, NodeEnv::auth(tokens_[name]));
    REQUIRE(res);
    REQUIRE(res->status == 200);
    return to_bytes(res->body);
  }
  void verdict(const std::string& name, const VerdictInput& v) override {
    json b{{"submission_id", v.submission_id},
           {"accuracy", v.accuracy},
           {"usability", v.usability},
           {"relevance", v.relevance},
           {"duplicate", v.duplicate_flag},
           {"report", to_string(v.report)}};
    if (v.key_release) b["key_release"] = v.key_release->hex();
    const Reply r = env_.post("/verdicts", b, tokens_[name]);
    REQUIRE(r.status == 201);
  }
  std::string order(const std::string& name, const std::string& sid) override {
    const Reply m = env_.get("/marketplace?industry=energy", tokens_[name]);
    REQUIRE(m.status == 200);
    REQUIRE(m.body.size() == 1);
    const Reply r = env_.post("/orders", {{"submission_id", sid}}, tokens_[name]);
    REQUIRE(r.status == 201);
    return r.body["order_id"];
  }
  Delivery key(const std::string& name, const std::string& oid) override {
    const Reply r = env_.get("/orders/" + oid + "/key", tokens_[name]);
    REQUIRE(r.status == 200);
    // Re-fetching before confirming serves the same key.
    CHECK(env_.get("/orders/" + oid + "/key", tokens_[name]).body == r.body);
    return Delivery{r.body["source"], r.body["slot"], r.body["key_blob"], r.body["ciphertext"]};
  }
  std::string confirm(const std::string& name, const std::string& oid, bool ok,
                      std::optional<std::uint32_t> rating) override {
    json b{{"success", ok}};
    if (rating) b["rating"] = *rating;
    const Reply r = env_.post("/orders/" + oid + "/confirm", b, tokens_[name]);
    REQUIRE(r.status == 200);
    return r.body["state"];
  }
  StateDigests digests() override {
    env_.node->network().flush();
    return env_.node->network().digests();
  }

 private:
  NodeEnv& env_;
  std::map<std::string, std::string> tokens_;
};

class DirectDriver : public Driver {
 public:
  DirectDriver(const KeyPair& escrow, const KeyPair& authority) {
    NetworkConfig nc = sim::network_config_from_json(json::object());
    nc.auto_progress = true;
    net_ = std::make_unique<Network>(std::move(nc), [] { return kNow; }, Rng::from_u64(kNetSeed),
                                     escrow, authority.public_key);
    authority_ = net_->bootstrap_authority("authority", authority.public_key);
  }

  AccountId register_account(const std::string& name, Role role, const PublicKey& key) override {
    const AccountId id =
        net_->request_account(RegistrationRequest{name, to_bytes("passport:" + name), {role}, key});
    ids_[name] = id;
    return id;
  }
  void approve(const AccountId& id) override { net_->authority_verify(authority_, id, true); }
  void pay_registration(const std::string&, const AccountId& id) override {
    net_->pay_fee(id, FeeKind::Registration, net_->registry().amount_due(id, FeeKind::Registration));
  }
  void certify(const AccountId& id) override {
    net_->certify_verifier(authority_, id, to_bytes("cert:" + id));
  }
  SubmitResult submit(const std::string& name, const json& metadata,
                      const std::string& fingerprint) override {
    return net_->submit_cti(ids_.at(name), metadata, fingerprint);
  }
  void attach(const std::string& name, const std::string& sid, const EnvelopeSet& env,
              const ContentStore& local) override {
    for (const ContentId& cid : env.content_ids()) net_->store().put(local.get(cid));
    net_->attach_envelope(ids_.at(name), sid, env);
  }
  std::pair<std::string, std::string> assignment(const std::string& name,
                                                 const std::string& sid) override {
    for (const auto& a : net_->exchange().assignments(ids_.at(name))) {
      if (a["submission_id"] == sid) return {a["ciphertext"], a["key_blob"]};
    }
    FAIL("no assignment for " << name);
    return {};
  }
  Bytes content(const std::string&, const std::string& cid) override {
    return net_->store().get(std::string_view(cid));
  }
  void verdict(const std::string&, const VerdictInput& v) override { net_->submit_verdict(v); }
  std::string order(const std::string& name, const std::string& sid) override {
    return net_->place_order(ids_.at(name), sid);
  }
  Delivery key(const std::string& name, const std::string& oid) override {
    return net_->deliver_key(ids_.at(name), oid);
  }
  std::string confirm(const std::string& name, const std::string& oid, bool ok,
                      std::optional<std::uint32_t> rating) override {
    return std::string(to_string(net_->confirm_decryption(ids_.at(name), oid, ok, rating)));
  }
  StateDigests digests() override { return net_->digests(); }

 private:
  std::unique_ptr<Network> net_;
  AccountId authority_;
  std::map<std::string, AccountId> ids_;
};

/// Registration through one accepted CTI, one failed key and a confirmed
/// purchase. Returns the recovered plaintext.
Bytes run_flow(Driver& d, const PublicKey& escrow_pub) {
  Rng client = Rng::from_u64(77);
  std::map<std::string, KeyPair> keys;
  std::map<AccountId, std::string> names;
  const std::vector<std::pair<std::string, Role>> people = {
      {"alice", Role::Contributor}, {"bob", Role::Consumer}, {"v0", Role::Verifier},
      {"v1", Role::Verifier},       {"v2", Role::Verifier}};
  for (const auto& [name, role] : people) {
    keys[name] = gen_keypair(client);
    const AccountId id = d.register_account(name, role, keys[name].public_key);
    names[id] = name;
    d.approve(id);
    d.pay_registration(name, id);
    if (role == Role::Verifier) d.certify(id);
  }
  const Bytes plain = to_bytes("CTI: modbus write storm against PLC bank 3");
  const SubmitResult s =
      d.submit("alice", sim::SimNetwork::default_metadata("storm", TlpLevel::Green),
               cti_fingerprint(plain));
  REQUIRE(s.verifiers);
  std::array<PublicKey, 3> pubs;
  for (std::size_t i = 0; i < 3; ++i) pubs[i] = keys.at(names.at((*s.verifiers)[i])).public_key;
  ContentStore local;
  const EnvelopeSet env = seal(plain, pubs, escrow_pub, client, local);
  d.attach("alice", s.submission_id, env, local);

  for (const AccountId& v : *s.verifiers) {
    const std::string& name = names.at(v);
    const auto [cid, blob] = d.assignment(name, s.submission_id);
    const SymmetricKey kv = unwrap_key(WrappedKey::from_hex(blob), keys.at(name).secret_key);
    CHECK(decrypt_object(kv, d.content(name, cid)) == plain);
    d.verdict(name, VerdictInput{v, s.submission_id, 4, 5, 4, false, to_bytes("ok from " + name),
                                 wrap_key(kv, escrow_pub, client)});
  }

  const std::string oid = d.order("bob", s.submission_id);
  const Delivery first = d.key("bob", oid);
  CHECK(first.source == "consumer");
  CHECK(d.confirm("bob", oid, false, std::nullopt) == "Failed");
  const Delivery second = d.key("bob", oid);
  CHECK(second.source == "verifier");
  const SymmetricKey k = unwrap_key(WrappedKey::from_hex(second.key_blob), keys.at("bob").secret_key);
  const Bytes recovered = decrypt_object(k, d.content("bob", second.ciphertext));
  CHECK(d.confirm("bob", oid, true, 5) == "Confirmed");
  return recovered;
}

}  // namespace

TEST_CASE("config parsing") {
  CHECK(node::parse_key_values("# c\n a = 1 \nb=x # tail\n\n") ==
        std::map<std::string, std::string>{{"a", "1"}, {"b", "x"}});
  CHECK(error_of([] { node::parse_key_values("a = 1\na = 2\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(error_of([] { node::parse_key_values("novalue\n"); }) == ErrorCode::ConfigInvalid);

  const std::map<std::string, std::string> base = {
      {"data_dir", "d"}, {"escrow_key", "e.key"}, {"authority_public_key", std::string(64, 'a')}};
  const auto c = node::NodeConfig::from_map(base, "/srv/ctinet");
  CHECK(c.data_dir == "/srv/ctinet/d");
  CHECK(c.port == 8640);
  auto with = [&](const std::string& k, const std::string& v) {
    auto m = base;
    m[k] = v;
    return error_of([&] { node::NodeConfig::from_map(m); });
  };
  CHECK(with("bogus_key", "1") == ErrorCode::ConfigInvalid);
  CHECK(with("listen", "nowhere") == ErrorCode::ConfigInvalid);
  CHECK(with("listen", "127.0.0.1:70000") == ErrorCode::ConfigInvalid);
  CHECK(with("scrypt_n", "1000") == ErrorCode::ConfigInvalid);
  CHECK(with("authority_public_key", "zz") == ErrorCode::ConfigInvalid);
  CHECK(with("quality_threshold", "9") == ErrorCode::ConfigInvalid);
  CHECK(with("fee_schedule", "/nonexistent") == ErrorCode::ConfigInvalid);
  for (const char* required : {"data_dir", "escrow_key", "authority_public_key"}) {
    auto m = base;
    m.erase(required);
    CHECK(error_of([&] { node::NodeConfig::from_map(m); }) == ErrorCode::ConfigInvalid);
  }

  TempDir dir("cfg");
  std::ofstream(dir.path() / "fees.conf") << "registration_fee = 60.00\ndiscount_cap = 40\n";
  std::ofstream(dir.path() / "node.conf")
      << "data_dir = data\nescrow_key = e.key\nauthority_public_key = " << std::string(64, 'b')
      << "\nlisten = 0.0.0.0:9000\nfee_schedule = fees.conf\n";
  const auto loaded = node::NodeConfig::load(dir.path() / "node.conf");
  CHECK(loaded.port == 9000);
  CHECK(loaded.data_dir == dir.path() / "data");
  CHECK(sim::network_config_from_json(loaded.network).fees.discount_cap == 40);
  CHECK(sim::network_config_from_json(loaded.network).fees.registration_fee == 6000);
}

TEST_CASE("passwords and key files") {
  Rng rng = Rng::from_u64(3);
  const std::string h = node::hash_password("hunter2hunter2", 16, 8, 1, rng);
  CHECK(h.rfind("scrypt$16$8$1$", 0) == 0);
  CHECK(node::verify_password("hunter2hunter2", h));
  CHECK_FALSE(node::verify_password("hunter2hunter3", h));
  CHECK_FALSE(node::verify_password("x", "garbage"));

  TempDir dir("keys");
  const KeyPair k = gen_keypair(rng);
  node::write_keyfile(dir.path() / "k.json", k);
  const KeyPair back = node::read_keyfile(dir.path() / "k.json");
  CHECK(back.public_key == k.public_key);
  CHECK(back.secret_key == k.secret_key);
  CHECK((std::filesystem::status(dir.path() / "k.json").permissions() &
         std::filesystem::perms::group_all) == std::filesystem::perms::none);
}

TEST_CASE("http status mapping") {
  CHECK(node::http_status(ErrorCode::Unauthorized) == 401);
  CHECK(node::http_status(ErrorCode::AccessDenied) == 403);
  CHECK(node::http_status(ErrorCode::NotListed) == 404);
  CHECK(node::http_status(ErrorCode::WrongState) == 409);
  CHECK(node::http_status(ErrorCode::SchemaViolation) == 400);
  CHECK(node::http_status(ErrorCode::Internal) == 500);
}

TEST_CASE("data directory locking") {
  NodeEnv env;
  auto cfg = env.config();
  node::NodeOptions o;
  o.background_tick = false;
  CHECK(error_of([&] { node::Node second(cfg, o); }) == ErrorCode::DataDirLocked);

  std::ofstream(env.dir.path() / "plainfile") << "x";
  cfg.data_dir = env.dir.path() / "plainfile" / "data";
  CHECK(error_of([&] { node::Node bad(cfg, o); }) == ErrorCode::DataDirLocked);
}

TEST_CASE("health, sessions and public endpoints") {
  NodeEnv env;
  const Reply h = env.get("/health");
  CHECK(h.status == 200);
  CHECK(h.body["status"] == "ok");
  CHECK(h.body["heights"]["network"] == 2);  // genesis + Authority bootstrap

  CHECK(env.get("/accounts/me").status == 401);
  CHECK(env.get("/accounts/me", "not-a-token").status == 401);
  CHECK(env.post("/login", {{"username", "authority"}, {"password", "wrong password"}}).status == 401);
  const Reply login =
      env.post("/login", {{"username", "authority"}, {"password", kAuthorityPassword}});
  REQUIRE(login.status == 200);
  const std::string token = login.body["token"];
  CHECK(env.get("/accounts/me", token).body["state"] == "Active");

  const Reply bad_json = env.reply_of(env.cli->Post("/register", "{", "application/json"));
  CHECK(bad_json.status == 400);
  CHECK(bad_json.body["code"] == "SchemaViolation");

  CHECK(env.get("/marketplace").status == 200);
  CHECK(env.get("/marketplace?vendor=x").status == 400);
  CHECK(env.get("/marketplace?channel=network").status == 403);
  const Reply w = env.get("/export/white");
  CHECK(w.status == 200);
  CHECK(w.body["channel"] == "public");
  CHECK(w.body["blocks"].size() == 1);

  CHECK(env.get("/channels/network/txs", token).status == 200);
  CHECK(env.get("/channels/nope/txs", token).status == 404);

  // Sessions expire.
  *env.now += 25 * 3600;
  CHECK(env.get("/accounts/me", token).status == 401);
}

TEST_CASE("HTTP errors carry the protocol code") {
  NodeEnv env;
  const KeyPair k = gen_keypair(env.rng);
  const json reg{{"username", "alice"},
                 {"password", "alicealice"},
                 {"public_key", k.public_key.hex()},
                 {"id_docs", "passport:A"},
                 {"roles", {"Contributor"}}};
  CHECK(env.post("/register", reg).status == 201);
  const Reply dup = env.post("/register", reg);
  CHECK(dup.status == 409);
  CHECK(dup.body["code"] == "DuplicateUsername");
  json no_docs = reg;
  no_docs["username"] = "bob";
  no_docs["id_docs"] = "";
  CHECK(env.post("/register", no_docs).body["code"] == "MissingDocuments");

  const std::string t = env.post("/login", {{"username", "alice"}, {"password", "alicealice"}}).body["token"];
  const Reply cti = env.post("/cti", {{"metadata", sim::SimNetwork::default_metadata("x", TlpLevel::Green)},
                                      {"fingerprint", cti_fingerprint(to_bytes("x"))}},
                             t);
  CHECK(cti.status == 403);
  CHECK(cti.body["code"] == "NotActive");
  CHECK(env.get("/authority/pending", t).body["code"] == "NotAuthority");
  CHECK(env.get("/assignments", t).status == 403);
}

TEST_CASE("HTTP API and direct calls reach the same state") {
  NodeEnv env;
  HttpDriver http(env);
  const Bytes via_http = run_flow(http, env.escrow.public_key);
  DirectDriver direct(env.escrow, env.authority);
  const Bytes via_direct = run_flow(direct, env.escrow.public_key);
  CHECK(via_http == via_direct);
  CHECK(to_string(via_http) == "CTI: modbus write storm against PLC bank 3");
  CHECK(http.digests() == direct.digests());

  // State and logins survive a restart.
  const StateDigests before = http.digests();
  env.restart();
  CHECK(env.node->network().digests() == before);
  CHECK(env.post("/login", {{"username", "bob"}, {"password", "pw-bob-secret"}}).status == 200);
  CHECK(env.get("/health").body["heights"]["network"].get<int>() > 1);
}

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

#include "ctinet/envelope.hpp"
#include "test_util.hpp"

using namespace ctinet;
using ctinet::test::error_of;

namespace {

struct Party {
  KeyPair v[3];
  KeyPair escrow;
  std::array<PublicKey, 3> pubs() const {
    return {v[0].public_key, v[1].public_key, v[2].public_key};
  }
};

Party make_party(Rng& rng) {
  Party p;
  for (auto& k : p.v) k = gen_keypair(rng);
  p.escrow = gen_keypair(rng);
  return p;
}

bool contains(const std::string& hay, const Bytes& needle) {
  return hay.find(to_string(needle)) != std::string::npos;
}

}  // namespace

TEST_CASE("gen_keypair") {
  const Bytes seed(32, 7);
  CHECK(gen_keypair(ByteView(seed)) == gen_keypair(ByteView(seed)));
  CHECK(gen_keypair().public_key != gen_keypair().public_key);
  const Bytes short_seed(31, 7);
  CHECK(error_of([&] { gen_keypair(ByteView(short_seed)); }) == ErrorCode::BadSeedLength);
}

TEST_CASE("seal then every verifier recovers the plaintext") {
  Rng rng = Rng::from_u64(11);
  ContentStore store;
  const Party p = make_party(rng);
  const Bytes plain = to_bytes("IOC: modbus write to coil 0x0010 from 203.0.113.9");
  const auto pubs = p.pubs();
  const EnvelopeSet env = seal(plain, pubs, p.escrow.public_key, rng, store);
  CHECK(env.algo_id == "x25519-aes256gcm/v1");
  for (std::size_t i = 0; i < 3; ++i) {
    const SymmetricKey kv = unwrap_key(env.wrapped_verifier_keys[i], p.v[i].secret_key);
    CHECK(decrypt_object(kv, store.get(env.verifier_copies[i])) == plain);
  }
  const KeyPair consumer = gen_keypair(rng);
  const WrappedKey rewrapped = rewrap_for(consumer.public_key, env.escrow_wrapped_consumer_key,
                                          p.escrow.secret_key, rng);
  const SymmetricKey kc = unwrap_key(rewrapped, consumer.secret_key);
  CHECK(decrypt_object(kc, store.get(env.consumer_copy)) == plain);
}

TEST_CASE("seal preconditions") {
  Rng rng = Rng::from_u64(12);
  ContentStore store;
  const Party p = make_party(rng);
  auto pubs = p.pubs();
  CHECK(error_of([&] { seal(Bytes{}, pubs, p.escrow.public_key, rng, store); }) ==
        ErrorCode::EmptyPlaintext);
  std::array<PublicKey, 3> dup = {pubs[0], pubs[0], pubs[2]};
  CHECK(error_of([&] { seal(to_bytes("x"), dup, p.escrow.public_key, rng, store); }) ==
        ErrorCode::DuplicateRecipients);
  std::array<PublicKey, 2> two = {pubs[0], pubs[1]};
  CHECK(error_of([&] { seal(to_bytes("x"), two, p.escrow.public_key, rng, store); }) ==
        ErrorCode::WrongRecipientCount);
}

TEST_CASE("a verifier key does not open another verifier's copy") {
  Rng rng = Rng::from_u64(13);
  ContentStore store;
  const Party p = make_party(rng);
  const auto pubs = p.pubs();
  const EnvelopeSet env = seal(to_bytes("scada historian creds"), pubs, p.escrow.public_key,
                               rng, store);
  const SymmetricKey kv2 = unwrap_key(env.wrapped_verifier_keys[1], p.v[1].secret_key);
  CHECK(error_of([&] { decrypt_object(kv2, store.get(env.verifier_copies[0])); }) ==
        ErrorCode::DecryptAuthFailure);
  CHECK(error_of([&] { unwrap_key(env.wrapped_verifier_keys[0], p.v[1].secret_key); }) ==
        ErrorCode::UnwrapAuthFailure);
}

TEST_CASE("wrap and unwrap") {
  Rng rng = Rng::from_u64(14);
  const KeyPair a = gen_keypair(rng);
  const KeyPair b = gen_keypair(rng);
  const SymmetricKey k = SymmetricKey::generate(rng);
  const WrappedKey w1 = wrap_key(k, a.public_key, rng);
  const WrappedKey w2 = wrap_key(k, a.public_key, rng);
  CHECK(w1.bytes.size() == kWrappedKeySize);
  CHECK(w1 != w2);
  CHECK(unwrap_key(w1, a.secret_key) == k);
  CHECK(unwrap_key(w2, a.secret_key) == k);
  CHECK(error_of([&] { unwrap_key(w1, b.secret_key); }) == ErrorCode::UnwrapAuthFailure);
  WrappedKey bad = w1;
  bad.bytes[50] ^= 0x80;
  CHECK(error_of([&] { unwrap_key(bad, a.secret_key); }) == ErrorCode::UnwrapAuthFailure);
}

TEST_CASE("rewrap failures") {
  Rng rng = Rng::from_u64(15);
  const KeyPair escrow = gen_keypair(rng);
  const KeyPair c1 = gen_keypair(rng);
  const KeyPair c2 = gen_keypair(rng);
  const SymmetricKey kc = SymmetricKey::generate(rng);
  WrappedKey blob = wrap_key(kc, escrow.public_key, rng);
  const WrappedKey for_c1 = rewrap_for(c1.public_key, blob, escrow.secret_key, rng);
  CHECK(unwrap_key(for_c1, c1.secret_key) == kc);
  CHECK(error_of([&] { unwrap_key(for_c1, c2.secret_key); }) == ErrorCode::UnwrapAuthFailure);
  blob.bytes[40] ^= 1;
  CHECK(error_of([&] { rewrap_for(c1.public_key, blob, escrow.secret_key, rng); }) ==
        ErrorCode::UnwrapAuthFailure);
}

TEST_CASE("ciphertext object layout is nonce then ciphertext and tag") {
  Rng rng = Rng::from_u64(16);
  const SymmetricKey k = SymmetricKey::generate(rng);
  const Bytes plain = to_bytes("0123456789");
  const Bytes obj = encrypt_object(k, plain, rng);
  CHECK(obj.size() == 12 + plain.size() + 16);
  CHECK(decrypt_object(k, obj) == plain);
}

TEST_CASE("serialized envelopes never contain the plaintext") {
  Rng rng = Rng::from_u64(17);
  ContentStore store;
  const Party p = make_party(rng);
  const auto pubs = p.pubs();
  for (int i = 0; i < 20; ++i) {
    const Bytes marker = rng.bytes(64);
    const EnvelopeSet env = seal(marker, pubs, p.escrow.public_key, rng, store);
    const std::string dumped = env.to_json().dump();
    CHECK_FALSE(contains(dumped, marker));
    CHECK_FALSE(dumped.find(to_hex(marker)) != std::string::npos);
    CHECK(EnvelopeSet::from_json(env.to_json()) == env);
  }
}

TEST_CASE("sealing is deterministic under a seeded rng") {
  auto run = [] {
    Rng rng = Rng::from_u64(18);
    ContentStore store;
    const Party p = make_party(rng);
    const auto pubs = p.pubs();
    return seal(to_bytes("same input"), pubs, p.escrow.public_key, rng, store).to_json().dump();
  };
  CHECK(run() == run());
}

TEST_CASE("envelope json parsing is strict") {
  Rng rng = Rng::from_u64(19);
  ContentStore store;
  const Party p = make_party(rng);
  const auto pubs = p.pubs();
  const auto j = seal(to_bytes("x"), pubs, p.escrow.public_key, rng, store).to_json();
  auto extra = j;
  extra["plaintext"] = "x";
  CHECK(error_of([&] { EnvelopeSet::from_json(extra); }) == ErrorCode::SchemaViolation);
  auto algo = j;
  algo["algo_id"] = "rsa/v0";
  CHECK(error_of([&] { EnvelopeSet::from_json(algo); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("single recipient sealed box") {
  Rng rng = Rng::from_u64(20);
  const KeyPair authority = gen_keypair(rng);
  const KeyPair other = gen_keypair(rng);
  const Bytes docs = to_bytes("passport:X123;business-reg:ACME");
  const Bytes sealed = seal_to(authority.public_key, docs, rng);
  CHECK(open_sealed(authority.secret_key, sealed) == docs);
  CHECK_THROWS_AS(open_sealed(other.secret_key, sealed), Error);
}

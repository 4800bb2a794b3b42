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

#include <algorithm>
#include <cstring>
#include <set>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

constexpr std::string_view kWrapInfo = "ctinet/key-wrap/v1";
constexpr std::size_t kEphOffset = 0;
constexpr std::size_t kNonceOffset = 32;
constexpr std::size_t kBodyOffset = 44;

template <std::size_t N>
std::array<std::uint8_t, N> fixed_from_hex(std::string_view hex,
                                           const char* what) {
  if (!is_lower_hex(hex, 2 * N)) {
    fail(ErrorCode::SchemaViolation, std::string(what) + " must be " +
                                         std::to_string(2 * N) + " hex chars");
  }
  const Bytes raw = ctinet::from_hex(hex);
  std::array<std::uint8_t, N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

Bytes wrap_context(ByteView eph_pub, ByteView recipient_pub) {
  Bytes ctx(eph_pub.size() + recipient_pub.size());
  std::copy(eph_pub.begin(), eph_pub.end(), ctx.begin());
  std::copy(recipient_pub.begin(), recipient_pub.end(),
            ctx.begin() + static_cast<std::ptrdiff_t>(eph_pub.size()));
  return ctx;
}

}  // namespace

PublicKey PublicKey::from_hex(std::string_view hex) {
  return PublicKey{fixed_from_hex<32>(hex, "public key")};
}

SecretKey SecretKey::from_hex(std::string_view hex) {
  return SecretKey{fixed_from_hex<32>(hex, "secret key")};
}

SymmetricKey SymmetricKey::generate(Rng& rng) {
  SymmetricKey k;
  rng.fill(k.bytes);
  return k;
}

WrappedKey WrappedKey::from_hex(std::string_view hex) {
  if (!is_lower_hex(hex, 2 * kWrappedKeySize)) {
    fail(ErrorCode::SchemaViolation, "wrapped key must be " +
                                         std::to_string(kWrappedKeySize) +
                                         " bytes of lowercase hex");
  }
  return WrappedKey{ctinet::from_hex(hex)};
}

KeyPair gen_keypair(std::optional<ByteView> seed) {
  KeyPair kp;
  if (seed) {
    if (seed->size() != 32) {
      fail(ErrorCode::BadSeedLength, "keypair seed must be 32 bytes, got " +
                                         std::to_string(seed->size()));
    }
    std::copy(seed->begin(), seed->end(), kp.secret_key.bytes.begin());
  } else {
    crypto::os_random(kp.secret_key.bytes);
  }
  kp.public_key.bytes = crypto::x25519_public_from_secret(kp.secret_key.bytes);
  return kp;
}

KeyPair gen_keypair(Rng& rng) {
  const auto seed = rng.seed_bytes();
  return gen_keypair(ByteView(seed));
}

WrappedKey wrap_key(const SymmetricKey& key, const PublicKey& recipient,
                    Rng& rng) {
  const KeyPair eph = gen_keypair(rng);
  const auto shared =
      crypto::x25519_shared(eph.secret_key.bytes, recipient.bytes);
  if (!shared) fail(ErrorCode::SchemaViolation, "unusable recipient public key");
  const Bytes ctx = wrap_context(eph.public_key.bytes, recipient.bytes);
  const Bytes wrap = crypto::hkdf_sha256(*shared, ctx, kWrapInfo, 32);
  const Bytes nonce = rng.bytes(crypto::kAeadNonceSize);

  WrappedKey out;
  out.bytes.reserve(kWrappedKeySize);
  out.bytes.insert(out.bytes.end(), eph.public_key.bytes.begin(),
                   eph.public_key.bytes.end());
  out.bytes.insert(out.bytes.end(), nonce.begin(), nonce.end());
  const Bytes body = crypto::aead_seal(wrap, nonce, key.bytes, ctx);
  out.bytes.insert(out.bytes.end(), body.begin(), body.end());
  return out;
}

SymmetricKey unwrap_key(const WrappedKey& blob, const SecretKey& secret) {
  if (blob.bytes.size() != kWrappedKeySize) {
    fail(ErrorCode::UnwrapAuthFailure, "wrapped key has the wrong length");
  }
  const ByteView all(blob.bytes);
  const ByteView eph_pub = all.subspan(kEphOffset, 32);
  const ByteView nonce = all.subspan(kNonceOffset, crypto::kAeadNonceSize);
  const ByteView body = all.subspan(kBodyOffset);

  const auto self_pub = crypto::x25519_public_from_secret(secret.bytes);
  const auto shared = crypto::x25519_shared(secret.bytes, eph_pub);
  if (!shared) fail(ErrorCode::UnwrapAuthFailure, "invalid ephemeral key");
  const Bytes ctx = wrap_context(eph_pub, self_pub);
  const Bytes wrap = crypto::hkdf_sha256(*shared, ctx, kWrapInfo, 32);
  const auto key = crypto::aead_open(wrap, nonce, body, ctx);
  if (!key || key->size() != 32) {
    fail(ErrorCode::UnwrapAuthFailure, "wrapped key failed authentication");
  }
  SymmetricKey out;
  std::copy(key->begin(), key->end(), out.bytes.begin());
  return out;
}

WrappedKey rewrap_for(const PublicKey& recipient, const WrappedKey& escrow_blob,
                      const SecretKey& escrow_secret, Rng& rng) {
  const SymmetricKey key = unwrap_key(escrow_blob, escrow_secret);
  return wrap_key(key, recipient, rng);
}

Bytes encrypt_object(const SymmetricKey& key, ByteView plaintext, Rng& rng) {
  Bytes out = rng.bytes(crypto::kAeadNonceSize);
  const Bytes body = crypto::aead_seal(
      key.bytes, ByteView(out).first(crypto::kAeadNonceSize), plaintext, {});
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Bytes decrypt_object(const SymmetricKey& key, ByteView object) {
  if (object.size() < crypto::kAeadNonceSize + crypto::kAeadTagSize) {
    fail(ErrorCode::DecryptAuthFailure, "ciphertext object is truncated");
  }
  auto plain = crypto::aead_open(key.bytes,
                                 object.first(crypto::kAeadNonceSize),
                                 object.subspan(crypto::kAeadNonceSize), {});
  if (!plain) {
    fail(ErrorCode::DecryptAuthFailure, "ciphertext failed authentication");
  }
  return *std::move(plain);
}

EnvelopeSet seal(ByteView plaintext, std::span<const PublicKey> verifier_pubs,
                 const PublicKey& escrow_pub, Rng& rng, ContentStore& store) {
  if (plaintext.empty()) fail(ErrorCode::EmptyPlaintext, "plaintext is empty");
  if (verifier_pubs.size() != kVerifierCount) {
    fail(ErrorCode::WrongRecipientCount,
         "expected 3 verifier keys, got " + std::to_string(verifier_pubs.size()));
  }
  std::set<std::string> distinct;
  for (const auto& pk : verifier_pubs) distinct.insert(pk.hex());
  if (distinct.size() != kVerifierCount) {
    fail(ErrorCode::DuplicateRecipients, "verifier keys must be distinct");
  }

  const SymmetricKey consumer_key = SymmetricKey::generate(rng);
  std::array<SymmetricKey, kVerifierCount> verifier_keys;
  for (auto& k : verifier_keys) k = SymmetricKey::generate(rng);

  const ContentId consumer_copy =
      store.put(encrypt_object(consumer_key, plaintext, rng));
  std::array<std::optional<ContentId>, kVerifierCount> copies;
  std::array<WrappedKey, kVerifierCount> wrapped;
  for (std::size_t i = 0; i < kVerifierCount; ++i) {
    copies[i] = store.put(encrypt_object(verifier_keys[i], plaintext, rng));
    wrapped[i] = wrap_key(verifier_keys[i], verifier_pubs[i], rng);
  }
  WrappedKey escrow = wrap_key(consumer_key, escrow_pub, rng);

  return EnvelopeSet{consumer_copy,
                     {*copies[0], *copies[1], *copies[2]},
                     std::move(wrapped),
                     std::move(escrow),
                     std::string(kAlgoId)};
}

Bytes seal_to(const PublicKey& recipient, ByteView plaintext, Rng& rng) {
  const SymmetricKey key = SymmetricKey::generate(rng);
  Bytes out = wrap_key(key, recipient, rng).bytes;
  const Bytes body = encrypt_object(key, plaintext, rng);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Bytes open_sealed(const SecretKey& secret, ByteView sealed) {
  if (sealed.size() < kWrappedKeySize) {
    fail(ErrorCode::UnwrapAuthFailure, "sealed box is truncated");
  }
  WrappedKey wrapped{Bytes(sealed.begin(), sealed.begin() + kWrappedKeySize)};
  const SymmetricKey key = unwrap_key(wrapped, secret);
  return decrypt_object(key, sealed.subspan(kWrappedKeySize));
}

nlohmann::json EnvelopeSet::to_json() const {
  nlohmann::json j;
  j["algo_id"] = algo_id;
  j["consumer_copy"] = consumer_copy.str();
  j["escrow_wrapped_consumer_key"] = escrow_wrapped_consumer_key.hex();
  j["verifier_copies"] = nlohmann::json::array();
  j["wrapped_verifier_keys"] = nlohmann::json::array();
  for (std::size_t i = 0; i < kVerifierCount; ++i) {
    j["verifier_copies"].push_back(verifier_copies[i].str());
    j["wrapped_verifier_keys"].push_back(wrapped_verifier_keys[i].hex());
  }
  return j;
}

EnvelopeSet EnvelopeSet::from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& why) {
    fail(ErrorCode::SchemaViolation, "envelope: " + why);
  };
  if (!j.is_object() || j.size() != 5) bad("expected exactly 5 fields");
  for (const char* field : {"algo_id", "consumer_copy",
                            "escrow_wrapped_consumer_key", "verifier_copies",
                            "wrapped_verifier_keys"}) {
    if (!j.contains(field)) bad(std::string("missing ") + field);
  }
  if (!j["algo_id"].is_string() || j["algo_id"].get<std::string>() != kAlgoId) {
    bad("unsupported algo_id");
  }
  const auto& copies = j["verifier_copies"];
  const auto& keys = j["wrapped_verifier_keys"];
  if (!copies.is_array() || copies.size() != kVerifierCount ||
      !keys.is_array() || keys.size() != kVerifierCount) {
    bad("need exactly 3 verifier copies and 3 wrapped keys");
  }
  auto cid = [&](const nlohmann::json& v) {
    if (!v.is_string()) bad("content ids must be strings");
    auto id = ContentId::try_parse(v.get<std::string>());
    if (!id) bad("malformed content id");
    return *id;
  };
  auto blob = [&](const nlohmann::json& v) {
    if (!v.is_string()) bad("wrapped keys must be hex strings");
    return WrappedKey::from_hex(v.get<std::string>());
  };
  return EnvelopeSet{
      cid(j["consumer_copy"]),
      {cid(copies[0]), cid(copies[1]), cid(copies[2])},
      {blob(keys[0]), blob(keys[1]), blob(keys[2])},
      blob(j["escrow_wrapped_consumer_key"]),
      std::string(kAlgoId)};
}

std::vector<ContentId> EnvelopeSet::content_ids() const {
  std::vector<ContentId> out{consumer_copy};
  out.insert(out.end(), verifier_copies.begin(), verifier_copies.end());
  return out;
}

}  // namespace ctinet

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

// Hybrid encryption for CTI payloads.
//
// A contributor seals one plaintext into four ciphertext copies, each under
// its own fresh 32-byte key: a consumer copy under kc and one verifier copy
// under each of kv1..kv3. Each kvi is wrapped to verifier i's X25519 public
// key; kc is wrapped to the network escrow key so the exchange can later
// rewrap it for paying consumers without ever holding it on the ledger.
//
// Wire layouts (bit-exact):
//   ciphertext object : [12-byte nonce][AES-256-GCM ciphertext || 16-byte tag]
//   wrapped key blob  : [32-byte ephemeral X25519 public key][12-byte nonce]
//                       [AES-256-GCM(key) || 16-byte tag]           (92 bytes)
// The wrap key is HKDF-SHA256(ikm = X25519(eph, recipient),
// salt = eph_pub || recipient_pub, info = "ctinet/key-wrap/v1"), with the
// same eph_pub || recipient_pub bound as AEAD associated data.

#ifndef CTINET_ENVELOPE_HPP_
#define CTINET_ENVELOPE_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>

#include "ctinet/common.hpp"
#include "ctinet/content_store.hpp"
#include "ctinet/rng.hpp"
#include "json.hpp"

namespace ctinet {

inline constexpr std::string_view kAlgoId = "x25519-aes256gcm/v1";
inline constexpr std::size_t kWrappedKeySize = 32 + 12 + 32 + 16;
inline constexpr std::size_t kVerifierCount = 3;

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static PublicKey from_hex(std::string_view hex);
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct SecretKey {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static SecretKey from_hex(std::string_view hex);
  friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;

  friend bool operator==(const KeyPair&, const KeyPair&) = default;
};

struct SymmetricKey {
  std::array<std::uint8_t, 32> bytes{};

  static SymmetricKey generate(Rng& rng);
  friend bool operator==(const SymmetricKey&, const SymmetricKey&) = default;
};

struct WrappedKey {
  Bytes bytes;

  std::string hex() const { return to_hex(bytes); }
  /// Checks the 92-byte layout; SchemaViolation otherwise.
  static WrappedKey from_hex(std::string_view hex);
  friend bool operator==(const WrappedKey&, const WrappedKey&) = default;
};

struct EnvelopeSet {
  ContentId consumer_copy;
  std::array<ContentId, kVerifierCount> verifier_copies;
  std::array<WrappedKey, kVerifierCount> wrapped_verifier_keys;
  WrappedKey escrow_wrapped_consumer_key;
  std::string algo_id{kAlgoId};

  nlohmann::json to_json() const;
  /// Strict parse: exact field set, CIDv0 ids, 92-byte blobs, known algo_id.
  static EnvelopeSet from_json(const nlohmann::json& j);
  std::vector<ContentId> content_ids() const;

  friend bool operator==(const EnvelopeSet&, const EnvelopeSet&) = default;
};

/// With a seed the keypair is a pure function of it (simnet); without one
/// the secret comes from the OS CSPRNG.
KeyPair gen_keypair(std::optional<ByteView> seed = std::nullopt);
KeyPair gen_keypair(Rng& rng);

WrappedKey wrap_key(const SymmetricKey& key, const PublicKey& recipient,
                    Rng& rng);
/// UnwrapAuthFailure on a wrong secret or any corruption of the blob.
SymmetricKey unwrap_key(const WrappedKey& blob, const SecretKey& secret);
/// Unwraps an escrow blob and wraps the same key to `recipient`.
WrappedKey rewrap_for(const PublicKey& recipient, const WrappedKey& escrow_blob,
                      const SecretKey& escrow_secret, Rng& rng);

Bytes encrypt_object(const SymmetricKey& key, ByteView plaintext, Rng& rng);
/// DecryptAuthFailure when the key does not match or the object is damaged.
Bytes decrypt_object(const SymmetricKey& key, ByteView object);

/// Seals `plaintext` for three distinct verifiers plus the escrow and puts
/// the four ciphertexts into `store`.
EnvelopeSet seal(ByteView plaintext, std::span<const PublicKey> verifier_pubs,
                 const PublicKey& escrow_pub, Rng& rng, ContentStore& store);

/// One-recipient sealed box: [wrapped key][ciphertext object]. Used for the
/// Authority-only identity records.
Bytes seal_to(const PublicKey& recipient, ByteView plaintext, Rng& rng);
Bytes open_sealed(const SecretKey& secret, ByteView sealed);

}  // namespace ctinet

#endif  // CTINET_ENVELOPE_HPP_

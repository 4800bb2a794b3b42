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

// Thin RAII wrappers over the OpenSSL primitives the protocol needs.

#ifndef CTINET_CRYPTO_HPP_
#define CTINET_CRYPTO_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "ctinet/common.hpp"

namespace ctinet::crypto {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;
inline constexpr std::size_t kX25519KeySize = 32;

using Digest = std::array<std::uint8_t, kDigestSize>;

Digest sha256(ByteView data);
inline Digest sha256(std::string_view text) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()),
                         text.size()));
}
std::string sha256_hex(std::string_view text);

/// Incremental SHA-256 for hashing framed multi-part inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(ByteView data);
  Sha256& update(std::string_view text);
  Digest finish();

 private:
  void* ctx_;
};

Bytes hkdf_sha256(ByteView ikm, ByteView salt, std::string_view info,
                  std::size_t length);

/// AES-256-GCM. Returns ciphertext || tag.
Bytes aead_seal(ByteView key, ByteView nonce, ByteView plaintext, ByteView aad);
/// Returns nullopt when the tag does not authenticate.
std::optional<Bytes> aead_open(ByteView key, ByteView nonce,
                               ByteView ciphertext_and_tag, ByteView aad);

std::array<std::uint8_t, kX25519KeySize> x25519_public_from_secret(
    ByteView secret);
/// nullopt for a low-order peer point (all-zero shared secret).
std::optional<std::array<std::uint8_t, kX25519KeySize>> x25519_shared(
    ByteView secret, ByteView peer_public);

void os_random(std::span<std::uint8_t> out);

Bytes scrypt(std::string_view password, ByteView salt, std::uint64_t n,
             std::uint64_t r, std::uint64_t p, std::size_t length);

/// Constant-time comparison.
bool equal(ByteView a, ByteView b);

}  // namespace ctinet::crypto

#endif  // CTINET_CRYPTO_HPP_

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

#include "ctinet/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/params.h>
#include <openssl/rand.h>

#include <memory>

namespace ctinet::crypto {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* key) const { EVP_PKEY_free(key); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* ctx) const { EVP_PKEY_CTX_free(ctx); }
};
struct KdfDeleter {
  void operator()(EVP_KDF* kdf) const { EVP_KDF_free(kdf); }
};
struct KdfCtxDeleter {
  void operator()(EVP_KDF_CTX* ctx) const { EVP_KDF_CTX_free(ctx); }
};

using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;
using Pkey = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

[[noreturn]] void openssl_failure(const char* what) {
  fail(ErrorCode::Internal, std::string("openssl: ") + what);
}

void require_size(ByteView v, std::size_t n, const char* what) {
  if (v.size() != n) openssl_failure(what);
}

Pkey x25519_private(ByteView secret) {
  require_size(secret, kX25519KeySize, "x25519 secret size");
  Pkey key(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr,
                                        secret.data(), secret.size()));
  if (!key) openssl_failure("x25519 private key");
  return key;
}

}  // namespace

Digest sha256(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    openssl_failure("sha256");
  }
  return out;
}

std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr ||
      EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(),
                        nullptr) != 1) {
    openssl_failure("sha256 init");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(ByteView data) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(),
                       data.size()) != 1) {
    openssl_failure("sha256 update");
  }
  return *this;
}

Sha256& Sha256::update(std::string_view text) {
  return update(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()),
                         text.size()));
}

Digest Sha256::finish() {
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len) !=
      1) {
    openssl_failure("sha256 final");
  }
  return out;
}

Bytes hkdf_sha256(ByteView ikm, ByteView salt, std::string_view info,
                  std::size_t length) {
  std::unique_ptr<EVP_KDF, KdfDeleter> kdf(
      EVP_KDF_fetch(nullptr, "HKDF", nullptr));
  if (!kdf) openssl_failure("hkdf fetch");
  std::unique_ptr<EVP_KDF_CTX, KdfCtxDeleter> ctx(EVP_KDF_CTX_new(kdf.get()));
  if (!ctx) openssl_failure("hkdf ctx");

  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string("digest", digest_name, 0),
      OSSL_PARAM_construct_octet_string(
          "key", const_cast<std::uint8_t*>(ikm.data()), ikm.size()),
      OSSL_PARAM_construct_octet_string(
          "salt", const_cast<std::uint8_t*>(salt.data()), salt.size()),
      OSSL_PARAM_construct_octet_string(
          "info", const_cast<char*>(info.data()), info.size()),
      OSSL_PARAM_construct_end(),
  };
  Bytes out(length);
  if (EVP_KDF_derive(ctx.get(), out.data(), out.size(), params) != 1) {
    openssl_failure("hkdf derive");
  }
  return out;
}

Bytes aead_seal(ByteView key, ByteView nonce, ByteView plaintext,
                ByteView aad) {
  require_size(key, kAeadKeySize, "aead key size");
  require_size(nonce, kAeadNonceSize, "aead nonce size");
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("cipher ctx");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    openssl_failure("gcm init");
  }
  int len = 0;
  if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                        static_cast<int>(aad.size())) != 1) {
    openssl_failure("gcm aad");
  }
  Bytes out(plaintext.size() + kAeadTagSize);
  if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    openssl_failure("gcm update");
  }
  int total = len;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) {
    openssl_failure("gcm final");
  }
  total += len;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagSize,
                          out.data() + total) != 1) {
    openssl_failure("gcm tag");
  }
  return out;
}

std::optional<Bytes> aead_open(ByteView key, ByteView nonce,
                               ByteView ciphertext_and_tag, ByteView aad) {
  require_size(key, kAeadKeySize, "aead key size");
  if (nonce.size() != kAeadNonceSize ||
      ciphertext_and_tag.size() < kAeadTagSize) {
    return std::nullopt;
  }
  const std::size_t body = ciphertext_and_tag.size() - kAeadTagSize;
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("cipher ctx");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    openssl_failure("gcm init");
  }
  int len = 0;
  if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                        static_cast<int>(aad.size())) != 1) {
    return std::nullopt;
  }
  Bytes out(body);
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext_and_tag.data(),
                        static_cast<int>(body)) != 1) {
    return std::nullopt;
  }
  int total = len;
  Bytes tag(ciphertext_and_tag.begin() + static_cast<std::ptrdiff_t>(body),
            ciphertext_and_tag.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagSize,
                          tag.data()) != 1) {
    return std::nullopt;
  }
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) {
    return std::nullopt;
  }
  out.resize(static_cast<std::size_t>(total + len));
  return out;
}

std::array<std::uint8_t, kX25519KeySize> x25519_public_from_secret(
    ByteView secret) {
  Pkey key = x25519_private(secret);
  std::array<std::uint8_t, kX25519KeySize> out{};
  std::size_t len = out.size();
  if (EVP_PKEY_get_raw_public_key(key.get(), out.data(), &len) != 1 ||
      len != out.size()) {
    openssl_failure("x25519 public key");
  }
  return out;
}

std::optional<std::array<std::uint8_t, kX25519KeySize>> x25519_shared(
    ByteView secret, ByteView peer_public) {
  if (peer_public.size() != kX25519KeySize) return std::nullopt;
  Pkey self = x25519_private(secret);
  Pkey peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr,
                                        peer_public.data(), peer_public.size()));
  if (!peer) return std::nullopt;
  PkeyCtx ctx(EVP_PKEY_CTX_new(self.get(), nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
      EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) != 1) {
    return std::nullopt;
  }
  std::array<std::uint8_t, kX25519KeySize> out{};
  std::size_t len = out.size();
  // Fails on low-order points, which yield an all-zero secret.
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    return std::nullopt;
  }
  return out;
}

void os_random(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    openssl_failure("RAND_bytes");
  }
}

Bytes scrypt(std::string_view password, ByteView salt, std::uint64_t n,
             std::uint64_t r, std::uint64_t p, std::size_t length) {
  Bytes out(length);
  const std::uint64_t max_mem = 1ULL << 30;
  if (EVP_PBE_scrypt(password.data(), password.size(), salt.data(),
                     salt.size(), n, r, p, max_mem, out.data(),
                     out.size()) != 1) {
    fail(ErrorCode::ConfigInvalid, "invalid scrypt parameters");
  }
  return out;
}

bool equal(ByteView a, ByteView b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace ctinet::crypto

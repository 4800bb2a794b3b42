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

#include "ctinet/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <memory>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};

}  // namespace

Rng::Rng(const Seed& seed) : key_(seed) {}

Rng Rng::from_u64(std::uint64_t seed) {
  crypto::Sha256 h;
  h.update(std::string_view("ctinet/rng/v1"));
  std::array<std::uint8_t, 8> le{};
  for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  h.update(le);
  return Rng(h.finish());
}

Rng Rng::from_os() {
  Seed seed{};
  crypto::os_random(seed);
  return Rng(seed);
}

void Rng::refill() {
  // 16-byte IV for EVP_chacha20: 4-byte LE block counter then 12-byte nonce.
  // The nonce carries our own 64-bit chunk counter so chunks never overlap.
  std::array<std::uint8_t, 16> iv{};
  for (int i = 0; i < 8; ++i) {
    iv[4 + i] = static_cast<std::uint8_t>(block_counter_ >> (8 * i));
  }
  ++block_counter_;

  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_chacha20(), nullptr,
                                 key_.data(), iv.data()) != 1) {
    fail(ErrorCode::Internal, "openssl: chacha20 init");
  }
  std::array<std::uint8_t, 4096> zeros{};
  int len = 0;
  if (EVP_EncryptUpdate(ctx.get(), buffer_.data(), &len, zeros.data(),
                        static_cast<int>(zeros.size())) != 1) {
    fail(ErrorCode::Internal, "openssl: chacha20 update");
  }
  offset_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out) {
  std::size_t written = 0;
  while (written < out.size()) {
    if (offset_ == buffer_.size()) refill();
    const std::size_t n =
        std::min(out.size() - written, buffer_.size() - offset_);
    std::memcpy(out.data() + written, buffer_.data() + offset_, n);
    offset_ += n;
    written += n;
  }
}

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

Rng::Seed Rng::seed_bytes() {
  Seed out{};
  fill(out);
  return out;
}

std::uint64_t Rng::next_u64() {
  std::array<std::uint8_t, 8> raw{};
  fill(raw);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
  return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) fail(ErrorCode::Internal, "uniform bound must be positive");
  // Reject the tail that would bias the modulus.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

Rng Rng::fork(std::string_view label) {
  const Seed material = seed_bytes();
  crypto::Sha256 h;
  h.update(material);
  h.update(label);
  return Rng(h.finish());
}

}  // namespace ctinet

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

#ifndef CTINET_RNG_HPP_
#define CTINET_RNG_HPP_

#include <array>
#include <cstdint>
#include <string_view>

#include "ctinet/common.hpp"

namespace ctinet {

/// Seedable CSPRNG: a ChaCha20 keystream keyed by a 32-byte seed.
///
/// Every random choice in the protocol (key generation, nonces, ephemeral
/// wrap keys, verifier draws) takes an Rng&, so a simnet run is a pure
/// function of its seed. Production callers use Rng::from_os().
class Rng {
 public:
  using Seed = std::array<std::uint8_t, 32>;

  explicit Rng(const Seed& seed);
  static Rng from_u64(std::uint64_t seed);
  static Rng from_os();

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  Seed seed_bytes();
  std::uint64_t next_u64();
  /// Uniform in [0, bound) by rejection sampling; bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  /// Independent child stream; the label separates sibling streams.
  Rng fork(std::string_view label);

 private:
  void refill();

  Seed key_;
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t offset_ = 4096;
};

}  // namespace ctinet

#endif  // CTINET_RNG_HPP_

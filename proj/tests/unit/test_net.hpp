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

// A Network on a hand-driven clock for engine-level tests.

#ifndef CTINET_TESTS_TEST_NET_HPP_
#define CTINET_TESTS_TEST_NET_HPP_

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "ctinet/network.hpp"
#include "test_util.hpp"

namespace ctinet::test {

inline constexpr std::int64_t kStart = 1'700'000'000;

struct TestNet {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(kStart);
  Rng rng;
  KeyPair escrow;
  KeyPair authority_keys;
  std::unique_ptr<Network> net;
  AccountId authority;
  std::map<AccountId, KeyPair> keys;

  explicit TestNet(std::uint64_t seed = 1, NetworkConfig config = {})
      : rng(Rng::from_u64(seed)),
        escrow(gen_keypair(rng)),
        authority_keys(gen_keypair(rng)) {
    auto clock = now;
    net = std::make_unique<Network>(std::move(config), [clock] { return *clock; },
                                    rng.fork("network"), escrow, authority_keys.public_key);
    authority = net->bootstrap_authority("authority", authority_keys.public_key);
    keys[authority] = authority_keys;
  }

  void advance_days(std::int64_t days) { *now += days * kSecondsPerDay; }

  AccountId request(const std::string& name, std::vector<Role> roles,
                    const std::string& docs = "passport:P-1") {
    const KeyPair k = gen_keypair(rng);
    const AccountId id =
        net->request_account(RegistrationRequest{name, to_bytes(docs), std::move(roles), k.public_key});
    keys[id] = k;
    return id;
  }

  /// request -> approve -> registration fee -> certification for verifiers.
  AccountId onboard(const std::string& name, std::vector<Role> roles) {
    const bool verifier = std::find(roles.begin(), roles.end(), Role::Verifier) != roles.end();
    const AccountId id = request(name, roles);
    net->authority_verify(authority, id, true);
    net->pay_fee(id, FeeKind::Registration, net->registry().amount_due(id, FeeKind::Registration));
    if (verifier) net->certify_verifier(authority, id, to_bytes("cert:" + name));
    return id;
  }

  Account account(const AccountId& id) const { return *net->registry().account(id); }
};

}  // namespace ctinet::test

#endif  // CTINET_TESTS_TEST_NET_HPP_

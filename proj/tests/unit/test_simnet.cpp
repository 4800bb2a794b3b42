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

#include <chrono>

#include "ctinet/simnet.hpp"
#include "test_util.hpp"

using namespace ctinet;
using ctinet::test::error_of;
using ctinet::test::load_json;
using json = nlohmann::json;

namespace {

const char* const kScenarios[] = {
    "scenario1_identity_confidentiality", "scenario2_legal_reporting",
    "scenario3_standard_format",          "scenario4_sybil",
    "scenario5_incentives",               "scenario6_quality",
};

sim::ScenarioScript script(const std::string& name) {
  return sim::ScenarioScript::from_json(load_json("scenarios/" + name + ".json"));
}

json minimal() {
  return json{{"name", "mini"},
              {"seed", 1},
              {"actors", json::array({json{{"name", "authority"}, {"roles", {"Authority"}}},
                                      json{{"name", "alice"}, {"roles", {"Contributor"}}}})},
              {"steps", json::array({json{{"op", "onboard"}, {"actor", "alice"}}})}};
}

}  // namespace

TEST_CASE("bundled scenarios pass and are deterministic") {
  std::set<std::string> covered;
  std::map<std::string, std::int64_t> fees;
  for (const char* name : kScenarios) {
    CAPTURE(name);
    const auto started = std::chrono::steady_clock::now();
    const sim::Trace a = sim::run_scenario(script(name));
    const auto elapsed = std::chrono::steady_clock::now() - started;
    CHECK(elapsed < std::chrono::seconds(30));
    const sim::Trace b = sim::run_scenario(script(name));
    CHECK(a.dump() == b.dump());
    CHECK(a.digests == a.replay);
    for (const auto& [kind, n] : a.coverage) {
      if (n > 0) covered.insert(kind);
    }
    fees[name] = a.fees_collected_cents;
  }
  CHECK(covered.size() == kTxKindCount);
  CHECK(fees["scenario1_identity_confidentiality"] == 105000);
  CHECK(fees["scenario2_legal_reporting"] == 45000);
  CHECK(fees["scenario3_standard_format"] == 105000);
  CHECK(fees["scenario4_sybil"] == 175000);
  CHECK(fees["scenario5_incentives"] == 92200);
  CHECK(fees["scenario6_quality"] == 135000);
}

TEST_CASE("seed override changes the trace but not the outcome") {
  sim::ScenarioScript s = script("scenario1_identity_confidentiality");
  const sim::Trace a = sim::run_scenario(s);
  s.seed += 1;
  const sim::Trace b = sim::run_scenario(s);
  CHECK(a.steps.size() == b.steps.size());
  CHECK(a.digests.ledger != b.digests.ledger);
}

TEST_CASE("ScriptInvalid") {
  CHECK_NOTHROW(sim::run_scenario(sim::ScenarioScript::from_json(minimal())));
  auto broken = [](auto mutate) {
    json j = minimal();
    mutate(j);
    return error_of([&] { sim::run_scenario(sim::ScenarioScript::from_json(j)); });
  };
  CHECK(broken([](json& j) { j["seed"] = -1; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["seed"] = "x"; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["steps"][0]["op"] = "teleport"; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["steps"][0]["actor"] = "mallory"; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["steps"][0].erase("actor"); }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["actors"].push_back(j["actors"][1]); }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["actors"][1]["roles"] = {"Wizard"}; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["steps"][0]["expect"] = "NoSuchCode"; }) == ErrorCode::ScriptInvalid);
  CHECK(broken([](json& j) { j["config"] = {{"verifier_count", 3}, {"bogus", 1}}; }) ==
        ErrorCode::ConfigInvalid);
  CHECK(error_of([] { sim::ScenarioScript::load("/nonexistent/x.json"); }) != ErrorCode::Internal);
}

TEST_CASE("ExpectationMismatch") {
  json j = minimal();
  j["steps"][0]["expect"] = "NotActive";
  CHECK(error_of([&] { sim::run_scenario(sim::ScenarioScript::from_json(j)); }) ==
        ErrorCode::ExpectationMismatch);
  j = minimal();
  j["steps"].push_back(json{{"op", "onboard"}, {"actor", "alice"}});
  CHECK(error_of([&] { sim::run_scenario(sim::ScenarioScript::from_json(j)); }) ==
        ErrorCode::ExpectationMismatch);
  j["steps"][1]["expect"] = "DuplicateUsername";
  CHECK_NOTHROW(sim::run_scenario(sim::ScenarioScript::from_json(j)));
}

TEST_CASE("fuzz regression: seed 7, 10^4 ops") {
  const json pinned = load_json("tests/fixtures/fuzz_seed7.json");
  const sim::FuzzReport r = sim::fuzz_protocol(7, 10000);
  INFO(r.violation);
  REQUIRE(r.success);
  CHECK(r.ops == 10000);
  CHECK(r.accepted == pinned["accepted"].get<std::size_t>());
  CHECK(r.rejected == pinned["rejected"].get<std::size_t>());
  CHECK(r.digests.to_json() == pinned["digests"]);
  CHECK(r.checks > 100);
  CHECK(r.errors.count("Internal") == 0);
}

TEST_CASE("fuzz is deterministic and seed sensitive") {
  const auto a = sim::fuzz_protocol(11, 2000);
  const auto b = sim::fuzz_protocol(11, 2000);
  const auto c = sim::fuzz_protocol(12, 2000);
  CHECK(a.success);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.digests.ledger != c.digests.ledger);
}

TEST_CASE("fuzz detects an injected tamper") {
  for (std::size_t at : {50u, 400u, 1500u}) {
    CAPTURE(at);
    sim::FuzzOptions o;
    o.tamper_after = at;
    o.check_every = 0;
    const auto r = sim::fuzz_protocol(7, 2000, o);
    CHECK_FALSE(r.success);
    CHECK_FALSE(r.violation.empty());
  }
}

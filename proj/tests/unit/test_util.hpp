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

// Shared helpers for the unit tests.

#ifndef CTINET_TESTS_TEST_UTIL_HPP_
#define CTINET_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <unistd.h>

#include "ctinet/common.hpp"
#include "ctinet/ledger.hpp"
#include "doctest.h"
#include "json.hpp"

namespace doctest {
template <>
struct StringMaker<ctinet::ErrorCode> {
  static String convert(ctinet::ErrorCode code) {
    return String(std::string(ctinet::to_string(code)).c_str());
  }
};
}  // namespace doctest

namespace ctinet::test {

inline std::filesystem::path source_dir() { return CTINET_SOURCE_DIR; }

inline nlohmann::json load_json(const std::filesystem::path& rel) {
  std::ifstream in(source_dir() / rel);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ctinet-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Access view backed by a plain map; unknown accounts are Unknown.
struct MapAccessView : AccessView {
  std::map<AccountId, Standing> standings;
  Standing standing(const AccountId& a) const override {
    auto it = standings.find(a);
    return it == standings.end() ? Standing::Unknown : it->second;
  }
};

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Internal;
}

}  // namespace ctinet::test

#endif  // CTINET_TESTS_TEST_UTIL_HPP_

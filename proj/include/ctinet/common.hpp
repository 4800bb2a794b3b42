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

#ifndef CTINET_COMMON_HPP_
#define CTINET_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctinet {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Account identifiers are opaque pseudonymous strings ("acct-...").
using AccountId = std::string;

/// A principal that may be anonymous (no account). Only WHITE reads accept it.
using Principal = std::optional<AccountId>;

/// Seconds on the network clock. Simnet drives it virtually, the node uses
/// the system clock.
using Clock = std::function<std::int64_t()>;

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Every failure the protocol can report. The string form (see to_string)
/// is the stable wire name used in API errors and scenario expectations.
enum class ErrorCode {
  // content_store
  EmptyPayload,
  ObjectTooLarge,
  NotFound,
  MalformedId,
  // envelope
  BadSeedLength,
  EmptyPlaintext,
  DuplicateRecipients,
  WrongRecipientCount,
  UnwrapAuthFailure,
  DecryptAuthFailure,
  // ledger
  NotRegistered,
  EmptyMembership,
  DuplicateChannelId,
  AccessDenied,
  SchemaViolation,
  UnknownChannel,
  MembershipImmutable,
  // registry
  MissingDocuments,
  DuplicateUsername,
  NotAuthority,
  WrongState,
  MissingCredentials,
  WrongAmount,
  SelfVote,
  DuplicateVote,
  NotActive,
  // exchange
  NotAnonymized,
  DanglingContent,
  InsufficientVerifiers,
  NotAssigned,
  DuplicateVerdict,
  ScoreOutOfRange,
  VerdictsIncomplete,
  NotListed,
  NoKeysRemaining,
  MissingRating,
  InsufficientRatings,
  // simnet
  ScriptInvalid,
  ExpectationMismatch,
  InvariantViolation,
  // node
  ConfigInvalid,
  PortInUse,
  DataDirLocked,
  Unauthorized,
  UsageError,
  Internal,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

std::string to_hex(ByteView bytes);
/// Strict lowercase hex decoding; throws SchemaViolation on anything else.
Bytes from_hex(std::string_view hex);
bool is_lower_hex(std::string_view text, std::size_t expected_len = 0);

inline Bytes to_bytes(std::string_view text) {
  return Bytes(text.begin(), text.end());
}

inline std::string to_string(ByteView bytes) {
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace ctinet

#endif  // CTINET_COMMON_HPP_

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

#include "ctinet/common.hpp"

#include <array>
#include <utility>

namespace ctinet {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 46> kErrorNames{{
    {ErrorCode::EmptyPayload, "EmptyPayload"},
    {ErrorCode::ObjectTooLarge, "ObjectTooLarge"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::MalformedId, "MalformedId"},
    {ErrorCode::BadSeedLength, "BadSeedLength"},
    {ErrorCode::EmptyPlaintext, "EmptyPlaintext"},
    {ErrorCode::DuplicateRecipients, "DuplicateRecipients"},
    {ErrorCode::WrongRecipientCount, "WrongRecipientCount"},
    {ErrorCode::UnwrapAuthFailure, "UnwrapAuthFailure"},
    {ErrorCode::DecryptAuthFailure, "DecryptAuthFailure"},
    {ErrorCode::NotRegistered, "NotRegistered"},
    {ErrorCode::EmptyMembership, "EmptyMembership"},
    {ErrorCode::DuplicateChannelId, "DuplicateChannelId"},
    {ErrorCode::AccessDenied, "AccessDenied"},
    {ErrorCode::SchemaViolation, "SchemaViolation"},
    {ErrorCode::UnknownChannel, "UnknownChannel"},
    {ErrorCode::MembershipImmutable, "MembershipImmutable"},
    {ErrorCode::MissingDocuments, "MissingDocuments"},
    {ErrorCode::DuplicateUsername, "DuplicateUsername"},
    {ErrorCode::NotAuthority, "NotAuthority"},
    {ErrorCode::WrongState, "WrongState"},
    {ErrorCode::MissingCredentials, "MissingCredentials"},
    {ErrorCode::WrongAmount, "WrongAmount"},
    {ErrorCode::SelfVote, "SelfVote"},
    {ErrorCode::DuplicateVote, "DuplicateVote"},
    {ErrorCode::NotActive, "NotActive"},
    {ErrorCode::NotAnonymized, "NotAnonymized"},
    {ErrorCode::DanglingContent, "DanglingContent"},
    {ErrorCode::InsufficientVerifiers, "InsufficientVerifiers"},
    {ErrorCode::NotAssigned, "NotAssigned"},
    {ErrorCode::DuplicateVerdict, "DuplicateVerdict"},
    {ErrorCode::ScoreOutOfRange, "ScoreOutOfRange"},
    {ErrorCode::VerdictsIncomplete, "VerdictsIncomplete"},
    {ErrorCode::NotListed, "NotListed"},
    {ErrorCode::NoKeysRemaining, "NoKeysRemaining"},
    {ErrorCode::MissingRating, "MissingRating"},
    {ErrorCode::InsufficientRatings, "InsufficientRatings"},
    {ErrorCode::ScriptInvalid, "ScriptInvalid"},
    {ErrorCode::ExpectationMismatch, "ExpectationMismatch"},
    {ErrorCode::InvariantViolation, "InvariantViolation"},
    {ErrorCode::ConfigInvalid, "ConfigInvalid"},
    {ErrorCode::PortInUse, "PortInUse"},
    {ErrorCode::DataDirLocked, "DataDirLocked"},
    {ErrorCode::Unauthorized, "Unauthorized"},
    {ErrorCode::UsageError, "UsageError"},
    {ErrorCode::Internal, "Internal"},
}};

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kErrorNames) {
    if (c == code) return name;
  }
  return "Internal";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kErrorNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

std::string to_hex(ByteView bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

bool is_lower_hex(std::string_view text, std::size_t expected_len) {
  if (text.size() % 2 != 0) return false;
  if (expected_len != 0 && text.size() != expected_len) return false;
  for (char c : text) {
    if (hex_value(c) < 0) return false;
  }
  return true;
}

Bytes from_hex(std::string_view hex) {
  if (!is_lower_hex(hex)) {
    fail(ErrorCode::SchemaViolation, "malformed hex string");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(hex_value(hex[2 * i]) << 4 |
                                       hex_value(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace ctinet

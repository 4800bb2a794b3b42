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

#include "ctinet/content_store.hpp"

#include <algorithm>
#include <array>
#include <mutex>

#include "ctinet/crypto.hpp"

namespace ctinet {

namespace {

constexpr std::string_view kAlphabet =
    "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
constexpr std::uint8_t kSha256Code = 0x12;
constexpr std::uint8_t kSha256Length = 0x20;
constexpr std::size_t kMultihashSize = 34;

int alphabet_index(char c) {
  const auto pos = kAlphabet.find(c);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

Bytes multihash(ByteView payload) {
  const auto digest = crypto::sha256(payload);
  Bytes out;
  out.reserve(kMultihashSize);
  out.push_back(kSha256Code);
  out.push_back(kSha256Length);
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

}  // namespace

std::string base58_encode(ByteView bytes) {
  const auto zeros = static_cast<std::size_t>(
      std::find_if(bytes.begin(), bytes.end(), [](auto b) { return b != 0; }) -
      bytes.begin());
  // Base-256 to base-58 by repeated long division on a little-endian digit
  // buffer.
  std::vector<std::uint8_t> digits;
  digits.reserve(bytes.size() * 138 / 100 + 1);
  for (std::size_t i = zeros; i < bytes.size(); ++i) {
    int carry = bytes[i];
    for (auto& d : digits) {
      carry += d << 8;
      d = static_cast<std::uint8_t>(carry % 58);
      carry /= 58;
    }
    while (carry > 0) {
      digits.push_back(static_cast<std::uint8_t>(carry % 58));
      carry /= 58;
    }
  }
  std::string out(zeros, '1');
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    out.push_back(kAlphabet[*it]);
  }
  return out;
}

std::optional<Bytes> base58_decode(std::string_view text) {
  const auto zeros = static_cast<std::size_t>(
      std::find_if(text.begin(), text.end(), [](char c) { return c != '1'; }) -
      text.begin());
  std::vector<std::uint8_t> bytes;  // little-endian base-256
  for (std::size_t i = zeros; i < text.size(); ++i) {
    const int v = alphabet_index(text[i]);
    if (v < 0) return std::nullopt;
    int carry = v;
    for (auto& b : bytes) {
      carry += b * 58;
      b = static_cast<std::uint8_t>(carry & 0xff);
      carry >>= 8;
    }
    while (carry > 0) {
      bytes.push_back(static_cast<std::uint8_t>(carry & 0xff));
      carry >>= 8;
    }
  }
  Bytes out(zeros, 0);
  out.insert(out.end(), bytes.rbegin(), bytes.rend());
  return out;
}

std::optional<ContentId> ContentId::try_parse(std::string_view text) {
  if (text.size() != kLength) return std::nullopt;
  const auto raw = base58_decode(text);
  if (!raw || raw->size() != kMultihashSize || (*raw)[0] != kSha256Code ||
      (*raw)[1] != kSha256Length) {
    return std::nullopt;
  }
  // Reject non-canonical spellings so the string form stays unique.
  if (base58_encode(*raw) != text) return std::nullopt;
  return ContentId(std::string(text));
}

ContentId ContentId::parse(std::string_view text) {
  auto id = try_parse(text);
  if (!id) {
    fail(ErrorCode::MalformedId,
         "not a CIDv0 sha2-256 identifier: '" + std::string(text.substr(0, 64)) +
             "'");
  }
  return *std::move(id);
}

ContentId ContentId::of(ByteView payload) {
  return ContentId(base58_encode(multihash(payload)));
}

ContentStore::ContentStore(std::size_t max_object_size)
    : max_object_size_(max_object_size) {}

ContentStore::~ContentStore() {
  if (log_ != nullptr) std::fclose(log_);
}

void ContentStore::open_persistence(const std::filesystem::path& path) {
  std::unique_lock lock(mu_);
  if (log_ != nullptr) fail(ErrorCode::Internal, "persistence already open");

  std::uintmax_t good_end = 0;
  if (std::filesystem::exists(path)) {
    std::FILE* in = std::fopen(path.c_str(), "rb");
    if (in == nullptr) {
      fail(ErrorCode::DataDirLocked, "cannot read " + path.string());
    }
    for (;;) {
      std::array<std::uint8_t, 4> prefix{};
      if (std::fread(prefix.data(), 1, 4, in) != 4) break;
      const std::uint32_t len = std::uint32_t{prefix[0]} << 24 |
                                std::uint32_t{prefix[1]} << 16 |
                                std::uint32_t{prefix[2]} << 8 | prefix[3];
      Bytes payload(len);
      if (len == 0 || std::fread(payload.data(), 1, len, in) != len) break;
      objects_.emplace(ContentId::of(payload).str(), std::move(payload));
      good_end += 4 + len;
    }
    std::fclose(in);
    std::filesystem::resize_file(path, good_end);
  }
  log_ = std::fopen(path.c_str(), "ab");
  if (log_ == nullptr) {
    fail(ErrorCode::DataDirLocked, "cannot open " + path.string());
  }
}

void ContentStore::add_peer(ContentStore* peer) {
  std::unique_lock lock(mu_);
  if (peer != nullptr && peer != this) peers_.push_back(peer);
}

bool ContentStore::insert_local(const ContentId& id, ByteView payload) {
  std::unique_lock lock(mu_);
  auto [it, inserted] = objects_.try_emplace(id.str());
  if (!inserted) return false;
  it->second.assign(payload.begin(), payload.end());
  if (log_ != nullptr) {
    const auto len = static_cast<std::uint32_t>(payload.size());
    const std::array<std::uint8_t, 4> prefix{
        static_cast<std::uint8_t>(len >> 24), static_cast<std::uint8_t>(len >> 16),
        static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)};
    if (std::fwrite(prefix.data(), 1, 4, log_) != 4 ||
        std::fwrite(payload.data(), 1, payload.size(), log_) != payload.size() ||
        std::fflush(log_) != 0) {
      fail(ErrorCode::Internal, "content log write failed");
    }
  }
  return true;
}

ContentId ContentStore::put(ByteView payload) {
  if (payload.empty()) fail(ErrorCode::EmptyPayload, "payload is empty");
  if (payload.size() > max_object_size_) {
    fail(ErrorCode::ObjectTooLarge,
         "payload of " + std::to_string(payload.size()) +
             " bytes exceeds the " + std::to_string(max_object_size_) +
             " byte limit");
  }
  ContentId id = ContentId::of(payload);
  insert_local(id, payload);
  std::vector<ContentStore*> peers;
  {
    std::shared_lock lock(mu_);
    peers = peers_;
  }
  for (ContentStore* peer : peers) peer->insert_local(id, payload);
  return id;
}

std::optional<Bytes> ContentStore::lookup_local(const ContentId& id) const {
  std::shared_lock lock(mu_);
  auto it = objects_.find(id.str());
  if (it == objects_.end()) return std::nullopt;
  if (ContentId::of(it->second) != id) return std::nullopt;
  return it->second;
}

Bytes ContentStore::get(const ContentId& id) const {
  if (auto local = lookup_local(id)) return *std::move(local);
  std::vector<ContentStore*> peers;
  {
    std::shared_lock lock(mu_);
    peers = peers_;
  }
  for (const ContentStore* peer : peers) {
    if (auto remote = peer->lookup_local(id)) {
      std::unique_lock lock(mu_);
      objects_[id.str()] = *remote;
      return *std::move(remote);
    }
  }
  fail(ErrorCode::NotFound, "no intact object for " + id.str());
}

Bytes ContentStore::get(std::string_view id) const {
  return get(ContentId::parse(id));
}

bool ContentStore::contains(const ContentId& id) const {
  return lookup_local(id).has_value();
}

bool ContentStore::verify(const ContentId& id, ByteView payload) const {
  return ContentId::of(payload) == id;
}

bool ContentStore::verify(std::string_view id, ByteView payload) const {
  return verify(ContentId::parse(id), payload);
}

std::size_t ContentStore::object_count() const {
  std::shared_lock lock(mu_);
  return objects_.size();
}

void ContentStore::corrupt_for_testing(const ContentId& id, Bytes bytes) {
  std::unique_lock lock(mu_);
  objects_[id.str()] = std::move(bytes);
}

}  // namespace ctinet

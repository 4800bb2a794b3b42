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

// Content-addressed object store for encrypted CTI payloads and reports.
//
// Objects are keyed by CIDv0 identifiers: base58btc(0x12 0x20 || sha256(b)),
// always 46 characters starting with "Qm". The key is re-derived from the
// bytes on every get, so the store never hands out bytes that do not match
// the id they were requested under.
//
// Persistence (optional): an append-only file of records
//   [4-byte big-endian length][payload bytes]
// The index is not stored; it is rebuilt by re-hashing every record on load.

#ifndef CTINET_CONTENT_STORE_HPP_
#define CTINET_CONTENT_STORE_HPP_

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctinet/common.hpp"

namespace ctinet {

std::string base58_encode(ByteView bytes);
/// nullopt if any character is outside the base58btc alphabet.
std::optional<Bytes> base58_decode(std::string_view text);

class ContentId {
 public:
  static constexpr std::size_t kLength = 46;

  /// Validates length, alphabet and the 0x12 0x20 multihash prefix.
  static ContentId parse(std::string_view text);
  static std::optional<ContentId> try_parse(std::string_view text);
  static ContentId of(ByteView payload);

  const std::string& str() const { return value_; }

  friend bool operator==(const ContentId&, const ContentId&) = default;
  friend auto operator<=>(const ContentId&, const ContentId&) = default;

 private:
  explicit ContentId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

class ContentStore {
 public:
  static constexpr std::size_t kDefaultMaxObjectSize = 64u << 20;

  explicit ContentStore(std::size_t max_object_size = kDefaultMaxObjectSize);
  ~ContentStore();
  ContentStore(const ContentStore&) = delete;
  ContentStore& operator=(const ContentStore&) = delete;

  /// Loads existing records from `path` (if present) and appends new puts
  /// to it from then on. Records whose length prefix runs past the end of
  /// the file are treated as a torn write and truncated away.
  void open_persistence(const std::filesystem::path& path);

  /// Replicas receive every local put; gets that miss locally are fetched
  /// from peers, hash-checked and cached.
  void add_peer(ContentStore* peer);

  ContentId put(ByteView payload);
  Bytes get(const ContentId& id) const;
  Bytes get(std::string_view id) const;
  bool contains(const ContentId& id) const;
  bool verify(const ContentId& id, ByteView payload) const;
  bool verify(std::string_view id, ByteView payload) const;

  std::size_t object_count() const;
  std::size_t max_object_size() const { return max_object_size_; }

  /// Test hook: overwrite stored bytes without re-keying.
  void corrupt_for_testing(const ContentId& id, Bytes bytes);

 private:
  bool insert_local(const ContentId& id, ByteView payload);
  std::optional<Bytes> lookup_local(const ContentId& id) const;

  std::size_t max_object_size_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::string, Bytes> objects_;
  std::vector<ContentStore*> peers_;
  std::FILE* log_ = nullptr;
};

}  // namespace ctinet

#endif  // CTINET_CONTENT_STORE_HPP_

/*
 * Copyright 2026 The fedcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "fedcl/autodiff.hpp"

namespace fedcl {

inline constexpr int kServerId = -1;

enum class MessageKind { parameters, embedding, embedding_gradient, deployment };
std::string to_string(MessageKind kind);

/// One payload crossing a site boundary. Only a digest of the payload is
/// kept; the payload itself stays with the simulation.
struct Message {
  MessageKind kind = MessageKind::parameters;
  int from = 0;
  int to = 0;
  std::string component;  // "F", "Cls", or "embedding"
  bool noised = false;
  Index size = 0;
  std::uint64_t checksum = 0;
};

/// Site-local record of digests of raw (pre-noise) payloads. Used only to
/// verify that no raw payload ever appears in a cross-site message.
class PrivacyAudit {
 public:
  void record_raw(std::uint64_t digest) {
    std::lock_guard lock(mutex_);
    raw_.insert(digest);
  }
  bool seen_raw(std::uint64_t digest) const {
    std::lock_guard lock(mutex_);
    return raw_.count(digest) != 0;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return raw_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_set<std::uint64_t> raw_;
};

}  // namespace fedcl

// digest.hpp: 64-bit content digests for corpora, models and configs.
//
// FNV-1a is used as a fast, fully deterministic content key.  It is not a
// cryptographic hash; it guards against accidental mispairing, not attack.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace audemu {

class Digest {
 public:
  Digest() = default;

  void update_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ull;
    }
  }

  void update(std::uint64_t v) { update_bytes(&v, sizeof(v)); }
  void update(std::int64_t v) { update_bytes(&v, sizeof(v)); }
  void update(int v) { update(static_cast<std::int64_t>(v)); }

  void update(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    update(bits);
  }

  void update(std::string_view s) {
    update(static_cast<std::uint64_t>(s.size()));
    update_bytes(s.data(), s.size());
  }

  void update(std::span<const double> v) {
    update(static_cast<std::uint64_t>(v.size()));
    for (double x : v) update(x);
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ull;  // FNV offset basis
};

inline std::uint64_t digest_of(std::span<const double> v) {
  Digest d;
  d.update(v);
  return d.value();
}

inline std::string digest_hex(std::uint64_t v) {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace audemu

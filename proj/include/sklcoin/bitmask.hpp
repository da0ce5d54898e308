// Copyright 2026 The SklCoin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include "sklcoin/bytes.hpp"

namespace sklcoin {

// Participation bitmask, one bit per signing-group member, indexed by
// group position. Serialized little-endian bit order, padded to whole bytes.
class Bitmask {
public:
    Bitmask() = default;
    explicit Bitmask(size_t n) : bits_(n, false) {}

    static Bitmask all_set(size_t n) {
        Bitmask m(n);
        m.bits_.assign(n, true);
        return m;
    }

    size_t size() const { return bits_.size(); }
    bool test(size_t i) const { return bits_.at(i); }
    void set(size_t i, bool v = true) { bits_.at(i) = v; }

    size_t popcount() const {
        size_t c = 0;
        for (bool b : bits_) c += b ? 1 : 0;
        return c;
    }

    Bytes to_bytes() const {
        Bytes out((bits_.size() + 7) / 8, 0);
        for (size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i]) out[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
        return out;
    }

    static Bitmask from_bytes(const Bytes& b, size_t n) {
        Bitmask m(n);
        for (size_t i = 0; i < n; ++i)
            m.bits_[i] = (i / 8 < b.size()) && ((b[i / 8] >> (i % 8)) & 1u);
        return m;
    }

    bool operator==(const Bitmask&) const = default;

private:
    std::vector<bool> bits_;
};

}  // namespace sklcoin

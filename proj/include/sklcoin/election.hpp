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

#include <cstdint>
#include <vector>

#include "sklcoin/ledger.hpp"

namespace sklcoin {

// SplitMix64. Fixed by the protocol: every honest node must produce the
// same stream for the same seed, on every platform.
class Prng {
public:
    explicit Prng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [1, L] via rejection sampling: accept u only if
    // u < L*floor(2^64/L).
    uint64_t next_in_range(uint64_t L);

private:
    uint64_t state_;
};

// SHA-256 of the chain tip; the shared election randomness.
using CommonSeed = Hash256;

CommonSeed common_seed(const Chain& chain);

// L = sum of stakes cells, each holding the owning stakeholder's key;
// stakeholder i occupies exactly S_i cells.
using MemoryMap = std::vector<GroupPoint>;

struct LeaderSchedule {
    std::vector<GroupPoint> leaders;  // current slot's leader, then fallbacks
    bool operator==(const LeaderSchedule&) const = default;
};

// Prng seeded with the first 8 bytes of cs (big-endian); stakes are placed
// in stakeholder-list order, redrawing while the drawn cell is occupied.
MemoryMap build_memory_map(const StakeholderList& stakeholders, const CommonSeed& cs);

// Fresh Prng seeded with (cs as a 256-bit big-endian integer) mod L; each
// draw selects map[next_in_range(L) - 1].
LeaderSchedule leader_schedule(const MemoryMap& map, const CommonSeed& cs, size_t horizon);

// Top group_size stakeholders by stake, ties broken by appearance order.
// Output order defines the signing-group bitmask positions.
std::vector<GroupPoint> signing_group(const StakeholderList& stakeholders, size_t group_size);

// (cs as 256-bit big-endian) mod L; the schedule Prng seed.
uint64_t seed_mod(const CommonSeed& cs, uint64_t L);

}  // namespace sklcoin

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

#include "sklcoin/election.hpp"

#include <algorithm>
#include <stdexcept>

namespace sklcoin {

uint64_t Prng::next_in_range(uint64_t L) {
    if (L == 0) throw std::invalid_argument("range must be >= 1");
    // limit = L * floor(2^64 / L), computed in 128 bits so the L-power-of-two
    // case (limit == 2^64, accept everything) comes out right.
    const unsigned __int128 limit =
        (unsigned __int128)L * (((unsigned __int128)1 << 64) / L);
    for (;;) {
        const uint64_t u = next();
        if ((unsigned __int128)u < limit) return u % L + 1;
    }
}

CommonSeed common_seed(const Chain& chain) {
    return block_hash(chain.tip());
}

namespace {

uint64_t first8_be(const CommonSeed& cs) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | cs[i];
    return v;
}

}  // namespace

uint64_t seed_mod(const CommonSeed& cs, uint64_t L) {
    if (L == 0) throw std::invalid_argument("L must be >= 1");
    unsigned __int128 r = 0;
    for (uint8_t b : cs) r = ((r << 8) | b) % L;
    return static_cast<uint64_t>(r);
}

MemoryMap build_memory_map(const StakeholderList& stakeholders, const CommonSeed& cs) {
    uint64_t L = 0;
    for (const Stakeholder& s : stakeholders) L += s.stake;
    if (L == 0) throw std::invalid_argument("no stake in the system");
    MemoryMap map(L, GroupPoint::identity());
    std::vector<bool> occupied(L, false);
    Prng prng(first8_be(cs));
    for (const Stakeholder& s : stakeholders) {
        for (uint64_t k = 0; k < s.stake; ++k) {
            uint64_t cell;
            do {
                cell = prng.next_in_range(L) - 1;
            } while (occupied[cell]);
            occupied[cell] = true;
            map[cell] = s.pub;
        }
    }
    return map;
}

LeaderSchedule leader_schedule(const MemoryMap& map, const CommonSeed& cs, size_t horizon) {
    const uint64_t L = map.size();
    if (L == 0) throw std::invalid_argument("empty memory map");
    if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
    Prng prng(seed_mod(cs, L));
    LeaderSchedule sched;
    sched.leaders.reserve(horizon);
    for (size_t i = 0; i < horizon; ++i)
        sched.leaders.push_back(map[prng.next_in_range(L) - 1]);
    return sched;
}

std::vector<GroupPoint> signing_group(const StakeholderList& stakeholders, size_t group_size) {
    if (group_size == 0) throw std::invalid_argument("group_size must be >= 1");
    std::vector<size_t> order(stakeholders.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return stakeholders[a].stake > stakeholders[b].stake;
    });
    const size_t n = std::min(group_size, stakeholders.size());
    std::vector<GroupPoint> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(stakeholders[order[i]].pub);
    return out;
}

}  // namespace sklcoin

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

#include <optional>
#include <variant>
#include <vector>

#include "sklcoin/group.hpp"

namespace sklcoin {

// One member's commitment in the Commitment phase. The random scalar v
// stays private to the signer; only V = v*G travels.
struct Commitment {
    size_t index = 0;
    GroupPoint V;
    Scalar v;
};

// Aggregate signature (V, r, Z): aggregate commitment, aggregate response,
// participation bitmask.
struct CollectiveSignature {
    GroupPoint V;
    Scalar r;
    Bitmask Z;
    bool operator==(const CollectiveSignature&) const = default;

    Bytes serialize() const;
    static std::optional<CollectiveSignature> deserialize(const Bytes& b, size_t group_size);
};

// PBFT-style super-majority quorum: m - floor((m-1)/3) of m.
size_t min_participants_for(size_t group_size);
size_t max_faulty_for(size_t group_size);  // f = floor((m-1)/3)

Commitment make_commitment(const KeyPair& member, std::span<const uint8_t> rng_seed);

// V = sum of V_j, Z = set of contributing indices.
// Throws std::invalid_argument on duplicate or out-of-range index.
std::pair<GroupPoint, Bitmask> aggregate_commitments(
    const std::vector<Commitment>& commitments, size_t group_size);

// c = H(V || A || M) where A is the aggregate key of the FULL signing group.
Scalar challenge(const GroupPoint& V, const GroupPoint& A, std::span<const uint8_t> msg);

// r_i = v_i + c*a_i
Scalar respond(const Commitment& commitment, const KeyPair& member, const Scalar& c);

Scalar aggregate_responses(const std::vector<Scalar>& responses);

// Accepts iff popcount(Z) >= min_participants and r*G == V + c*A_Z with
// c = H(V || A || M), A over all group keys, A_Z over the bitmask.
bool cosi_verify(const CollectiveSignature& sig, const std::vector<GroupPoint>& group_pubs,
                 std::span<const uint8_t> msg, size_t min_participants);

enum class CosiError {
    LeaderOffline,
    InsufficientParticipation,
};

using CosiResult = std::variant<CollectiveSignature, CosiError>;

// In-process run of the four phases (Announcement, Commitment, Challenge,
// Response). Members outside `online` neither commit nor respond. The
// networked variant lives in the consensus engine; this one backs unit
// tests and the signing benchmark.
CosiResult run_cosi_round(size_t leader_index, std::span<const uint8_t> msg,
                          const Bitmask& online, const std::vector<KeyPair>& group,
                          size_t min_participants, uint64_t commit_seed = 0);

}  // namespace sklcoin

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

#include "sklcoin/cosi.hpp"

#include <stdexcept>

namespace sklcoin {

Bytes CollectiveSignature::serialize() const {
    Bytes out;
    append_bytes(out, V.enc);
    append_bytes(out, r.le);
    append_bytes(out, Z.to_bytes());
    return out;
}

std::optional<CollectiveSignature> CollectiveSignature::deserialize(const Bytes& b,
                                                                    size_t group_size) {
    const size_t mask_bytes = (group_size + 7) / 8;
    if (b.size() != 64 + mask_bytes) return std::nullopt;
    CollectiveSignature sig;
    std::copy(b.begin(), b.begin() + 32, sig.V.enc.begin());
    std::copy(b.begin() + 32, b.begin() + 64, sig.r.le.begin());
    sig.Z = Bitmask::from_bytes(Bytes(b.begin() + 64, b.end()), group_size);
    return sig;
}

size_t max_faulty_for(size_t group_size) {
    return group_size == 0 ? 0 : (group_size - 1) / 3;
}

size_t min_participants_for(size_t group_size) {
    return group_size - max_faulty_for(group_size);
}

Commitment make_commitment(const KeyPair& member, std::span<const uint8_t> rng_seed) {
    Commitment c;
    c.v = hash_to_scalar(rng_seed);
    c.V = GroupPoint::base_mul(c.v);
    return c;
}

std::pair<GroupPoint, Bitmask> aggregate_commitments(
    const std::vector<Commitment>& commitments, size_t group_size) {
    GroupPoint V = GroupPoint::identity();
    Bitmask Z(group_size);
    for (const Commitment& c : commitments) {
        if (c.index >= group_size) throw std::invalid_argument("commitment index out of range");
        if (Z.test(c.index)) throw std::invalid_argument("duplicate commitment index");
        Z.set(c.index);
        V = V + c.V;
    }
    return {V, Z};
}

Scalar challenge(const GroupPoint& V, const GroupPoint& A, std::span<const uint8_t> msg) {
    Bytes buf;
    append_bytes(buf, V.enc);
    append_bytes(buf, A.enc);
    append_bytes(buf, msg);
    return hash_to_scalar(buf);
}

Scalar respond(const Commitment& commitment, const KeyPair& member, const Scalar& c) {
    return commitment.v + c * member.secret;
}

Scalar aggregate_responses(const std::vector<Scalar>& responses) {
    Scalar r = Scalar::zero();
    for (const Scalar& ri : responses) r = r + ri;
    return r;
}

bool cosi_verify(const CollectiveSignature& sig, const std::vector<GroupPoint>& group_pubs,
                 std::span<const uint8_t> msg, size_t min_participants) {
    if (sig.Z.size() != group_pubs.size()) return false;
    if (sig.Z.popcount() < min_participants) return false;
    if (!sig.V.is_identity() && !sig.V.is_valid()) return false;
    for (const GroupPoint& p : group_pubs)
        if (!p.is_valid()) return false;
    GroupPoint A = aggregate_keys(group_pubs, Bitmask::all_set(group_pubs.size()));
    GroupPoint A_Z = aggregate_keys(group_pubs, sig.Z);
    Scalar c = challenge(sig.V, A, msg);
    GroupPoint lhs = GroupPoint::base_mul(sig.r);
    GroupPoint rhs = sig.V + A_Z.mul(c);
    return lhs == rhs;
}

CosiResult run_cosi_round(size_t leader_index, std::span<const uint8_t> msg,
                          const Bitmask& online, const std::vector<KeyPair>& group,
                          size_t min_participants, uint64_t commit_seed) {
    if (online.size() != group.size()) throw std::invalid_argument("online mask size mismatch");
    if (leader_index >= group.size() || !online.test(leader_index))
        return CosiError::LeaderOffline;

    // Announcement: leader broadcasts msg; offline members never answer.
    // Commitment: each online member picks v_i and sends V_i = v_i*G.
    std::vector<Commitment> commitments;
    for (size_t i = 0; i < group.size(); ++i) {
        if (!online.test(i)) continue;
        Bytes seed;
        append_u64le(seed, commit_seed);
        append_u64le(seed, i);
        append_bytes(seed, msg);
        Commitment c = make_commitment(group[i], seed);
        c.index = i;
        commitments.push_back(std::move(c));
    }
    if (commitments.size() < min_participants) return CosiError::InsufficientParticipation;

    auto [V, Z] = aggregate_commitments(commitments, group.size());

    // Challenge binds the FULL group key.
    GroupPoint A = GroupPoint::identity();
    for (const KeyPair& kp : group) A = A + kp.pub;
    Scalar c = challenge(V, A, msg);

    // Response: committed members answer; an online member that committed
    // always responds here, so Z matches the responders exactly.
    std::vector<Scalar> responses;
    for (const Commitment& cm : commitments)
        responses.push_back(respond(cm, group[cm.index], c));
    Scalar r = aggregate_responses(responses);

    return CollectiveSignature{V, r, Z};
}

}  // namespace sklcoin

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

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "sklcoin/bitmask.hpp"
#include "sklcoin/bytes.hpp"

namespace sklcoin {

// Scalar modulo the prime order of the ristretto255 group.
// Canonical encoding: 32 bytes little-endian, fully reduced.
struct Scalar {
    std::array<uint8_t, 32> le{};

    static Scalar zero() { return {}; }
    static Scalar from_u64(uint64_t v);
    // Reduces a 512-bit little-endian integer modulo the group order.
    static Scalar reduce_wide(std::span<const uint8_t> wide64);
    // Interprets 32 bytes as a big-endian integer and reduces mod q.
    static Scalar reduce_be32(std::span<const uint8_t> be32);

    bool is_zero() const;

    Scalar operator+(const Scalar& o) const;
    Scalar operator-(const Scalar& o) const;
    Scalar operator*(const Scalar& o) const;
    bool operator==(const Scalar&) const = default;
};

// Element of the prime-order ristretto255 group, built on the twisted
// Edwards curve over 2^255-19. Canonical encoding: 32 bytes; the
// all-zero string encodes the identity.
struct GroupPoint {
    std::array<uint8_t, 32> enc{};

    static GroupPoint identity() { return {}; }
    static GroupPoint base_mul(const Scalar& s);  // s*G

    bool is_identity() const;
    bool is_valid() const;

    GroupPoint operator+(const GroupPoint& o) const;
    GroupPoint mul(const Scalar& s) const;  // s*P
    bool operator==(const GroupPoint&) const = default;
    auto operator<=>(const GroupPoint&) const = default;
};

struct KeyPair {
    Scalar secret;
    GroupPoint pub;  // secret*G
};

struct SchnorrSignature {
    Scalar s;
    Scalar e;
    bool operator==(const SchnorrSignature&) const = default;
};

Hash256 sha256(std::span<const uint8_t> data);

// SHA-256 of `data`, digest interpreted as a big-endian integer, reduced mod q.
Scalar hash_to_scalar(std::span<const uint8_t> data);

// Deterministic keypair from a 32-byte seed: hash to scalar, rehashing on the
// (negligible) zero outcome.
KeyPair keygen(const std::array<uint8_t, 32>& seed);

// Deterministic nonce from (secret, msg); used wherever reproducible
// signatures are needed.
Scalar derive_nonce(const Scalar& secret, std::span<const uint8_t> msg);

// Plain Schnorr over the group: R = k*G, e = H(R||M), s = k - e*d.
// Throws std::invalid_argument on a zero nonce.
SchnorrSignature schnorr_sign(const KeyPair& kp, std::span<const uint8_t> msg,
                              const Scalar& nonce);

// Checks H(s*G + e*Q || M) == e.
bool schnorr_verify(const GroupPoint& pub, std::span<const uint8_t> msg,
                    const SchnorrSignature& sig);

// Sum of pubs[i] over set bits of mask; identity for an all-clear mask.
// Throws std::invalid_argument on length mismatch.
GroupPoint aggregate_keys(const std::vector<GroupPoint>& pubs, const Bitmask& mask);

}  // namespace sklcoin

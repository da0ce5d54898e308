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

#include <openssl/sha.h>

#include <stdexcept>

#include "doctest.h"
#include "sklcoin/election.hpp"
#include "sklcoin/group.hpp"

using namespace sklcoin;

namespace {

Hash256 openssl_sha256(const Bytes& data) {
    Hash256 out;
    SHA256(data.data(), data.size(), out.data());
    return out;
}

std::array<uint8_t, 32> seed_from(uint64_t n) {
    std::array<uint8_t, 32> s{};
    for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(n >> (8 * i));
    return s;
}

Bytes random_bytes(Prng& rng, size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<uint8_t>(rng.next());
    return b;
}

}  // namespace

TEST_CASE("sha256 matches an independent implementation") {
    Prng rng(7);
    for (int i = 0; i < 20; ++i) {
        Bytes data = random_bytes(rng, i * 13);
        CHECK(sha256(data) == openssl_sha256(data));
    }
}

TEST_CASE("hash_to_scalar reduces the digest as a big-endian integer") {
    // Values computed independently: digest as big-endian integer mod the
    // group order, emitted little-endian.
    auto check = [](const char* msg, const char* le_hex) {
        Bytes m(msg, msg + std::string(msg).size());
        CHECK(to_hex(hash_to_scalar(m).le) == le_hex);
    };
    check("abc", "7efa6ff33fbd46eb66bd739512a56eca2222ae5dde404141eacf018fbf16780a");
    check("", "5f21e162aa2d94d393ff107bb7977c0323b96f99c8f4fb9a141cfc9842c4b003");
    check("sklcoin", "95deba3ef9e043b3ed38de57bac449c57ae1c6ebdfc69b0617ee67e797f9130a");
}

TEST_CASE("keygen is deterministic and seed-sensitive") {
    KeyPair a = keygen(seed_from(0));
    KeyPair a2 = keygen(seed_from(0));
    CHECK(a.secret == a2.secret);
    CHECK(a.pub == a2.pub);
    CHECK(a.pub == GroupPoint::base_mul(a.secret));
    KeyPair b = keygen(seed_from(1));
    CHECK(a.pub != b.pub);
}

TEST_CASE("schnorr round-trip, determinism, and negatives") {
    KeyPair kp = keygen(seed_from(10));
    KeyPair other = keygen(seed_from(11));
    Bytes msg = {'h', 'i'};
    Scalar k = derive_nonce(kp.secret, msg);
    SchnorrSignature sig = schnorr_sign(kp, msg, k);
    CHECK(schnorr_verify(kp.pub, msg, sig));
    CHECK(sig == schnorr_sign(kp, msg, k));
    CHECK_FALSE(schnorr_verify(other.pub, msg, sig));

    Bytes flipped = msg;
    flipped[0] ^= 1;
    CHECK_FALSE(schnorr_verify(kp.pub, flipped, sig));

    SchnorrSignature bumped = sig;
    bumped.s = bumped.s + Scalar::from_u64(1);
    CHECK_FALSE(schnorr_verify(kp.pub, msg, bumped));

    CHECK_THROWS_AS(schnorr_sign(kp, msg, Scalar::zero()), std::invalid_argument);
}

TEST_CASE("schnorr rejects random single perturbations") {
    KeyPair kp = keygen(seed_from(20));
    Prng rng(99);
    for (int i = 0; i < 100; ++i) {
        Bytes msg = random_bytes(rng, 16);
        SchnorrSignature sig = schnorr_sign(kp, msg, derive_nonce(kp.secret, msg));
        REQUIRE(schnorr_verify(kp.pub, msg, sig));
        switch (rng.next() % 3) {
            case 0: msg[rng.next() % msg.size()] ^= uint8_t(1u << (rng.next() % 8)); break;
            case 1: sig.s = sig.s + Scalar::from_u64(rng.next_in_range(1000)); break;
            case 2: sig.e = sig.e + Scalar::from_u64(rng.next_in_range(1000)); break;
        }
        CHECK_FALSE(schnorr_verify(kp.pub, msg, sig));
    }
}

TEST_CASE("signature algebra: s*G + e*Q recovers the nonce point") {
    KeyPair kp = keygen(seed_from(30));
    Bytes msg = {'x', 'y', 'z'};
    Scalar k = derive_nonce(kp.secret, msg);
    SchnorrSignature sig = schnorr_sign(kp, msg, k);
    GroupPoint R = GroupPoint::base_mul(k);
    CHECK(GroupPoint::base_mul(sig.s) + kp.pub.mul(sig.e) == R);
}

TEST_CASE("aggregate_keys sums over set bits") {
    KeyPair k1 = keygen(seed_from(40));
    KeyPair k2 = keygen(seed_from(41));
    KeyPair k3 = keygen(seed_from(42));
    std::vector<GroupPoint> pubs = {k1.pub, k2.pub, k3.pub};

    Bitmask one(3);
    one.set(1);
    CHECK(aggregate_keys(pubs, one) == pubs[1]);
    CHECK(aggregate_keys(pubs, Bitmask(3)) == GroupPoint::identity());

    Bitmask outer(3);
    outer.set(0);
    outer.set(2);
    // Independent check through scalar arithmetic: (a1+a3)*G.
    CHECK(aggregate_keys(pubs, outer) == GroupPoint::base_mul(k1.secret + k3.secret));

    std::vector<GroupPoint> permuted = {k3.pub, k2.pub, k1.pub};
    CHECK(aggregate_keys(permuted, outer) == aggregate_keys(pubs, outer));

    CHECK_THROWS_AS(aggregate_keys(pubs, Bitmask(2)), std::invalid_argument);
}

TEST_CASE("hex helpers round-trip") {
    Bytes b = {0x00, 0xde, 0xad, 0xbe, 0xef, 0xff};
    CHECK(to_hex(b) == "00deadbeefff");
    CHECK(from_hex("00deadbeefff") == b);
}

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

#include "sklcoin/group.hpp"

#include <sodium.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace sklcoin {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

}  // namespace

std::string to_hex(std::span<const uint8_t> b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xf]);
    }
    return s;
}

Bytes from_hex(const std::string& s) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("bad hex digit");
    };
    if (s.size() % 2 != 0) throw std::invalid_argument("odd hex length");
    Bytes out(s.size() / 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>(nibble(s[2 * i]) << 4 | nibble(s[2 * i + 1]));
    return out;
}

Scalar Scalar::from_u64(uint64_t v) {
    Scalar s;
    for (int i = 0; i < 8; ++i) s.le[i] = static_cast<uint8_t>(v >> (8 * i));
    return s;
}

Scalar Scalar::reduce_wide(std::span<const uint8_t> wide64) {
    ensure_sodium();
    if (wide64.size() != 64) throw std::invalid_argument("wide scalar must be 64 bytes");
    Scalar out;
    crypto_core_ristretto255_scalar_reduce(out.le.data(), wide64.data());
    return out;
}

Scalar Scalar::reduce_be32(std::span<const uint8_t> be32) {
    if (be32.size() != 32) throw std::invalid_argument("expected 32 bytes");
    std::array<uint8_t, 64> wide{};
    for (int i = 0; i < 32; ++i) wide[i] = be32[31 - i];
    return reduce_wide(wide);
}

bool Scalar::is_zero() const {
    return std::all_of(le.begin(), le.end(), [](uint8_t b) { return b == 0; });
}

Scalar Scalar::operator+(const Scalar& o) const {
    ensure_sodium();
    Scalar out;
    crypto_core_ristretto255_scalar_add(out.le.data(), le.data(), o.le.data());
    return out;
}

Scalar Scalar::operator-(const Scalar& o) const {
    ensure_sodium();
    Scalar out;
    crypto_core_ristretto255_scalar_sub(out.le.data(), le.data(), o.le.data());
    return out;
}

Scalar Scalar::operator*(const Scalar& o) const {
    ensure_sodium();
    Scalar out;
    crypto_core_ristretto255_scalar_mul(out.le.data(), le.data(), o.le.data());
    return out;
}

bool GroupPoint::is_identity() const {
    return std::all_of(enc.begin(), enc.end(), [](uint8_t b) { return b == 0; });
}

bool GroupPoint::is_valid() const {
    ensure_sodium();
    return crypto_core_ristretto255_is_valid_point(enc.data()) == 1;
}

GroupPoint GroupPoint::base_mul(const Scalar& s) {
    ensure_sodium();
    if (s.is_zero()) return identity();
    GroupPoint out;
    if (crypto_scalarmult_ristretto255_base(out.enc.data(), s.le.data()) != 0)
        throw std::runtime_error("base_mul failed");
    return out;
}

GroupPoint GroupPoint::operator+(const GroupPoint& o) const {
    ensure_sodium();
    if (is_identity()) return o;
    if (o.is_identity()) return *this;
    GroupPoint out;
    if (crypto_core_ristretto255_add(out.enc.data(), enc.data(), o.enc.data()) != 0)
        throw std::invalid_argument("point addition on invalid encoding");
    return out;
}

GroupPoint GroupPoint::mul(const Scalar& s) const {
    ensure_sodium();
    if (s.is_zero() || is_identity()) return identity();
    GroupPoint out;
    if (crypto_scalarmult_ristretto255(out.enc.data(), s.le.data(), enc.data()) != 0)
        throw std::invalid_argument("scalar mult on invalid encoding");
    return out;
}

Hash256 sha256(std::span<const uint8_t> data) {
    ensure_sodium();
    Hash256 h;
    crypto_hash_sha256(h.data(), data.data(), data.size());
    return h;
}

Scalar hash_to_scalar(std::span<const uint8_t> data) {
    return Scalar::reduce_be32(sha256(data));
}

KeyPair keygen(const std::array<uint8_t, 32>& seed) {
    Hash256 buf = seed;
    Scalar secret;
    for (;;) {
        buf = sha256(buf);
        secret = Scalar::reduce_be32(buf);
        if (!secret.is_zero()) break;
    }
    return {secret, GroupPoint::base_mul(secret)};
}

Scalar derive_nonce(const Scalar& secret, std::span<const uint8_t> msg) {
    Bytes buf;
    append_bytes(buf, secret.le);
    append_bytes(buf, msg);
    Scalar k = hash_to_scalar(buf);
    while (k.is_zero()) {
        buf = Bytes(sha256(buf).begin(), sha256(buf).end());
        k = hash_to_scalar(buf);
    }
    return k;
}

SchnorrSignature schnorr_sign(const KeyPair& kp, std::span<const uint8_t> msg,
                              const Scalar& nonce) {
    if (nonce.is_zero()) throw std::invalid_argument("zero nonce");
    GroupPoint r_point = GroupPoint::base_mul(nonce);
    Bytes buf;
    append_bytes(buf, r_point.enc);
    append_bytes(buf, msg);
    Scalar e = hash_to_scalar(buf);
    Scalar s = nonce - e * kp.secret;
    return {s, e};
}

bool schnorr_verify(const GroupPoint& pub, std::span<const uint8_t> msg,
                    const SchnorrSignature& sig) {
    if (!pub.is_valid()) return false;
    GroupPoint r_v = GroupPoint::base_mul(sig.s) + pub.mul(sig.e);
    Bytes buf;
    append_bytes(buf, r_v.enc);
    append_bytes(buf, msg);
    Scalar e_v = hash_to_scalar(buf);
    return e_v == sig.e;
}

GroupPoint aggregate_keys(const std::vector<GroupPoint>& pubs, const Bitmask& mask) {
    if (pubs.size() != mask.size())
        throw std::invalid_argument("mask length must equal key count");
    GroupPoint acc = GroupPoint::identity();
    for (size_t i = 0; i < pubs.size(); ++i)
        if (mask.test(i)) acc = acc + pubs[i];
    return acc;
}

}  // namespace sklcoin

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

#include <cstdio>

#include "doctest.h"
#include "sklcoin/cosi.hpp"
#include "sklcoin/ledger.hpp"

using namespace sklcoin;

namespace {

std::array<uint8_t, 32> seed_from(uint64_t n) {
    std::array<uint8_t, 32> s{};
    for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(n >> (8 * i));
    return s;
}

const KeyPair kA = keygen(seed_from(201));
const KeyPair kB = keygen(seed_from(202));
const KeyPair kC = keygen(seed_from(203));

// Builds a fully signed block on top of `chain` using `signers` as the
// signing group.
Block signed_block(const Chain& chain, const KeyPair& leader,
                   const std::vector<KeyPair>& signers, std::vector<Transaction> txs,
                   uint64_t slot) {
    Block b;
    b.parent_hash = block_hash(chain.tip());
    b.slot = slot;
    b.leader = leader.pub;
    b.transactions = std::move(txs);
    const size_t minp = min_participants_for(signers.size());
    b.prepare_sig = std::get<CollectiveSignature>(run_cosi_round(
        0, b.proposal_bytes(), Bitmask::all_set(signers.size()), signers, minp, slot));
    b.commit_sig = std::get<CollectiveSignature>(run_cosi_round(
        0, b.commit_message_bytes(), Bitmask::all_set(signers.size()), signers, minp, slot + 1));
    return b;
}

}  // namespace

TEST_CASE("normal transaction moves balance and bumps the nonce") {
    AccountTable state;
    state[kA.pub] = {10, 0, 0};
    Transaction tx = make_signed_tx(kA, kB.pub, TxKind::Normal, 5, 1, 0);
    REQUIRE_FALSE(validate_transaction(state, tx).has_value());
    apply_transaction(state, tx);
    CHECK(state[kA.pub].balance == 4);
    CHECK(state[kA.pub].next_nonce == 1);
    CHECK(state[kB.pub].balance == 5);
}

TEST_CASE("amount plus fee beyond balance is rejected") {
    AccountTable state;
    state[kA.pub] = {10, 0, 0};
    Transaction tx = make_signed_tx(kA, kB.pub, TxKind::Normal, 10, 1, 0);
    CHECK(validate_transaction(state, tx) == TxError::InsufficientBalance);
}

TEST_CASE("transaction validation catches forgery, stale nonce, zero amount") {
    AccountTable state;
    state[kA.pub] = {10, 0, 3};
    Transaction tx = make_signed_tx(kA, kB.pub, TxKind::Normal, 1, 0, 3);
    CHECK_FALSE(validate_transaction(state, tx).has_value());

    Transaction tampered = tx;
    tampered.amount = 2;
    CHECK(validate_transaction(state, tampered) == TxError::BadSignature);

    Transaction stale = make_signed_tx(kA, kB.pub, TxKind::Normal, 1, 0, 2);
    CHECK(validate_transaction(state, stale) == TxError::BadNonce);

    Transaction zero = make_signed_tx(kA, kB.pub, TxKind::Normal, 0, 0, 3);
    CHECK(validate_transaction(state, zero) == TxError::BadAmount);
}

TEST_CASE("stake-to-self converts balance into stake") {
    AccountTable state;
    state[kA.pub] = {10, 0, 0};
    Transaction tx = make_signed_tx(kA, kA.pub, TxKind::Stake, 3, 1, 0);
    REQUIRE_FALSE(validate_transaction(state, tx).has_value());
    apply_transaction(state, tx);
    // Hand-replayed: 10 - 3 - 1 fee = 6 balance, +3 stake.
    CHECK(state[kA.pub].balance == 6);
    CHECK(state[kA.pub].stake == 3);
}

TEST_CASE("transaction encoding round-trips") {
    Transaction tx = make_signed_tx(kA, kB.pub, TxKind::Stake, 7, 2, 9);
    Bytes enc = tx.encode();
    size_t consumed = 0;
    auto back = Transaction::decode(enc.data(), enc.size(), consumed);
    REQUIRE(back.has_value());
    CHECK(consumed == enc.size());
    CHECK(*back == tx);
}

TEST_CASE("block_hash is deterministic, content-sensitive, and matches a reference hash") {
    Block g = make_genesis_block({{kA.pub, 100, 5}});
    CHECK(block_hash(g) == block_hash(g));

    Block g2 = g;
    g2.allocations[0].balance ^= 1;
    CHECK(block_hash(g) != block_hash(g2));

    Bytes enc = g.encode();
    Hash256 ref;
    SHA256(enc.data(), enc.size(), ref.data());
    CHECK(block_hash(g) == ref);
}

TEST_CASE("block encoding round-trips with both collective signatures") {
    Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 100, 5}, {kB.pub, 50, 2}}));
    std::vector<KeyPair> signers = {kA, kB, kC};
    Block b = signed_block(chain, kA, signers,
                           {make_signed_tx(kA, kB.pub, TxKind::Normal, 3, 1, 0)}, 1);
    Bytes enc = b.encode();
    auto back = Block::decode(enc);
    REQUIRE(back.has_value());
    CHECK(*back == b);
    Bytes truncated(enc.begin(), enc.end() - 1);
    CHECK_FALSE(Block::decode(truncated).has_value());
}

TEST_CASE("append credits the leader with total fees") {
    Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 100, 5}, {kB.pub, 50, 2}}));
    std::vector<KeyPair> signers = {kA, kB};
    Block b = signed_block(chain, kC, signers,
                           {make_signed_tx(kA, kB.pub, TxKind::Normal, 1, 2, 0),
                            make_signed_tx(kB, kA.pub, TxKind::Normal, 1, 3, 0)},
                           1);
    REQUIRE_FALSE(chain.validate_content(b).has_value());
    chain.append(b);
    CHECK(chain.state().at(kC.pub).balance == 5);
    CHECK(chain.height() == 1);

    Block empty = signed_block(chain, kC, signers, {}, 2);
    chain.append(empty);
    CHECK(chain.state().at(kC.pub).balance == 5);
}

TEST_CASE("state after three blocks matches a hand-replayed oracle") {
    Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 100, 5}, {kB.pub, 50, 2}}));
    std::vector<KeyPair> signers = {kA, kB};
    chain.append(signed_block(chain, kA, signers,
                              {make_signed_tx(kA, kB.pub, TxKind::Normal, 10, 1, 0)}, 1));
    chain.append(signed_block(chain, kB, signers,
                              {make_signed_tx(kB, kB.pub, TxKind::Stake, 4, 1, 0)}, 2));
    chain.append(signed_block(chain, kA, signers,
                              {make_signed_tx(kA, kC.pub, TxKind::Normal, 2, 1, 1)}, 3));
    // Oracle, replayed by hand:
    // A: 100 -11 (tx1) +1 (fee b1) -3 (tx3) +1 (fee b3) = 88, stake 5, nonce 2
    // B: 50 +10 (tx1) -5 (tx2) +1 (fee b2) = 56, stake 2+4=6, nonce 1
    // C: balance 2
    CHECK(chain.state().at(kA.pub).balance == 88);
    CHECK(chain.state().at(kA.pub).stake == 5);
    CHECK(chain.state().at(kA.pub).next_nonce == 2);
    CHECK(chain.state().at(kB.pub).balance == 56);
    CHECK(chain.state().at(kB.pub).stake == 6);
    CHECK(chain.state().at(kC.pub).balance == 2);

    uint64_t total = 0;
    for (const auto& [pub, acct] : chain.state()) total += acct.balance + acct.stake;
    CHECK(total == 100 + 5 + 50 + 2);
}

TEST_CASE("compute_stakeholders orders by first stake appearance") {
    SUBCASE("genesis only") {
        Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 10, 7}, {kB.pub, 10, 0}}));
        auto sh = compute_stakeholders(chain);
        REQUIRE(sh.size() == 1);
        CHECK(sh[0].pub == kA.pub);
        CHECK(sh[0].stake == 7);
    }
    SUBCASE("no stake anywhere") {
        Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 10, 0}}));
        CHECK(compute_stakeholders(chain).empty());
    }
    SUBCASE("later stake transactions keep appearance order") {
        Chain chain =
            Chain::from_genesis(make_genesis_block({{kA.pub, 100, 3}, {kB.pub, 100, 0}}));
        std::vector<KeyPair> signers = {kA, kB};
        chain.append(signed_block(chain, kA, signers,
                                  {make_signed_tx(kB, kB.pub, TxKind::Stake, 2, 0, 0)}, 1));
        chain.append(signed_block(chain, kA, signers,
                                  {make_signed_tx(kA, kA.pub, TxKind::Stake, 5, 0, 0)}, 2));
        auto sh = compute_stakeholders(chain);
        REQUIRE(sh.size() == 2);
        CHECK(sh[0].pub == kA.pub);
        CHECK(sh[0].stake == 8);
        CHECK(sh[1].pub == kB.pub);
        CHECK(sh[1].stake == 2);
    }
}

TEST_CASE("validate_block checks leader, signatures, and transactions") {
    Chain chain = Chain::from_genesis(make_genesis_block({{kA.pub, 100, 5}, {kB.pub, 50, 2}}));
    std::vector<KeyPair> signers = {kA, kB, kC};
    std::vector<GroupPoint> group = {kA.pub, kB.pub, kC.pub};
    std::vector<GroupPoint> leaders = {kA.pub, kB.pub};
    const size_t minp = min_participants_for(3);

    Block ok = signed_block(chain, kA, signers,
                            {make_signed_tx(kA, kB.pub, TxKind::Normal, 3, 1, 0)}, 1);
    CHECK_FALSE(chain.validate_block(ok, leaders, 2, group, minp).has_value());

    Block outsider = signed_block(chain, kC, signers, {}, 1);
    CHECK(chain.validate_block(outsider, leaders, 2, group, minp) == BlockError::WrongLeader);
    Block fallback_too_deep = signed_block(chain, kB, signers, {}, 1);
    CHECK(chain.validate_block(fallback_too_deep, leaders, 1, group, minp) ==
          BlockError::WrongLeader);

    // Double spend: two transactions that together overdraw A's balance.
    Block dbl = signed_block(chain, kA, signers,
                             {make_signed_tx(kA, kB.pub, TxKind::Normal, 80, 0, 0),
                              make_signed_tx(kA, kC.pub, TxKind::Normal, 80, 0, 1)},
                             1);
    CHECK(chain.validate_block(dbl, leaders, 2, group, minp) == BlockError::BadTransaction);

    Block bad_parent = ok;
    bad_parent.parent_hash[0] ^= 1;
    CHECK(chain.validate_block(bad_parent, leaders, 2, group, minp) == BlockError::BadParent);

    Block stale_slot = signed_block(chain, kA, signers, {}, 0);
    CHECK(chain.validate_block(stale_slot, leaders, 2, group, minp) == BlockError::BadSlot);

    Block bad_prep = ok;
    bad_prep.prepare_sig.r = Scalar::from_u64(1);
    CHECK(chain.validate_block(bad_prep, leaders, 2, group, minp) == BlockError::BadPrepareSig);

    Block bad_commit = ok;
    bad_commit.commit_sig.r = Scalar::from_u64(1);
    CHECK(chain.validate_block(bad_commit, leaders, 2, group, minp) == BlockError::BadCommitSig);
}

TEST_CASE("a committed transaction cannot be admitted twice") {
    AccountTable state;
    state[kA.pub] = {10, 0, 0};
    Transaction tx = make_signed_tx(kA, kB.pub, TxKind::Normal, 1, 0, 0);
    REQUIRE_FALSE(validate_transaction(state, tx).has_value());
    apply_transaction(state, tx);
    CHECK(validate_transaction(state, tx) == TxError::BadNonce);
}

TEST_CASE("genesis config saves and loads through JSON") {
    GenesisConfig cfg;
    cfg.allocations = {{kA.pub, 100, 5}, {kB.pub, 7, 0}};
    cfg.horizon = 12;
    cfg.group_size = 3;
    cfg.timeout_ticks = 250;
    const std::string path = "/tmp/sklcoin_genesis_test.json";
    save_genesis(cfg, path);
    GenesisConfig back = load_genesis(path);
    CHECK(back.allocations == cfg.allocations);
    CHECK(back.horizon == 12);
    CHECK(back.group_size == 3);
    CHECK(back.timeout_ticks == 250);
    std::remove(path.c_str());
}

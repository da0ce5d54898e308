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

#include <cstdio>

#include <stdexcept>

#include "doctest.h"
#include "sklcoin/runner.hpp"

using namespace sklcoin;

namespace {

ScenarioConfig base_scenario(size_t n, uint64_t n_slots = 4) {
    ScenarioConfig cfg;
    cfg.name = "unit";
    for (size_t i = 0; i < n; ++i) cfg.nodes.push_back({1000, 10});
    cfg.n_slots = n_slots;
    cfg.seed = 7;
    cfg.params.group_size = n;
    cfg.params.timeout_ticks = 200;
    return cfg;
}

struct Fixture {
    KeyPair a = node_key(0);
    KeyPair b = node_key(1);
    KeyPair c = node_key(2);
    Chain chain = Chain::from_genesis(
        make_genesis_block({{a.pub, 100, 4}, {b.pub, 100, 2}, {c.pub, 100, 1}}));

    SlotContext ctx() const {
        SlotContext s;
        s.slot = 1;
        s.schedule.leaders = {a.pub, b.pub, c.pub};
        s.group = {a.pub, b.pub, c.pub};
        s.min_participants = 3;
        s.timeout_ticks = 200;
        return s;
    }
};

}  // namespace

TEST_CASE("timeout rotates to the next fallback leader in the same slot") {
    Fixture f;
    SlotContext ctx = f.ctx();
    CHECK(handle_timeout(ctx, 16) == TimeoutOutcome::NextLeader);
    CHECK(ctx.fallback_index == 1);
    CHECK(ctx.schedule.leaders[ctx.fallback_index] == f.b.pub);
    CHECK(handle_timeout(ctx, 16) == TimeoutOutcome::NextLeader);
    CHECK(handle_timeout(ctx, 16) == TimeoutOutcome::ScheduleExhausted);

    SlotContext capped = f.ctx();
    CHECK(handle_timeout(capped, 1) == TimeoutOutcome::ScheduleExhausted);
}

TEST_CASE("proposals draw valid transactions FIFO up to the cap") {
    Fixture f;
    std::deque<Transaction> mempool;

    Block empty = build_proposal(f.chain, mempool, 1, f.a.pub, 8);
    CHECK(empty.transactions.empty());
    CHECK(empty.parent_hash == block_hash(f.chain.tip()));
    CHECK(empty.slot == 1);

    mempool.push_back(make_signed_tx(f.a, f.b.pub, TxKind::Normal, 1, 0, 5));  // bad nonce
    mempool.push_back(make_signed_tx(f.a, f.b.pub, TxKind::Normal, 1, 0, 0));
    Block filtered = build_proposal(f.chain, mempool, 1, f.a.pub, 8);
    REQUIRE(filtered.transactions.size() == 1);
    CHECK(filtered.transactions[0].nonce == 0);

    mempool.clear();
    for (uint64_t i = 0; i < 5; ++i)
        mempool.push_back(make_signed_tx(f.a, f.b.pub, TxKind::Normal, 1, 0, i));
    Block capped = build_proposal(f.chain, mempool, 1, f.a.pub, 3);
    REQUIRE(capped.transactions.size() == 3);
    for (uint64_t i = 0; i < 3; ++i) CHECK(capped.transactions[i].nonce == i);
}

TEST_CASE("proposal validation checks content and originator") {
    Fixture f;
    SlotContext ctx = f.ctx();
    Block ok = build_proposal(f.chain, {}, 1, f.a.pub, 8);
    CHECK_FALSE(validate_proposal(f.chain, ok, ctx).has_value());

    Block early_fallback = build_proposal(f.chain, {}, 1, f.b.pub, 8);
    CHECK(validate_proposal(f.chain, early_fallback, ctx) == ProposalError::WrongLeader);
    ctx.fallback_index = 1;
    CHECK_FALSE(validate_proposal(f.chain, early_fallback, ctx).has_value());
    ctx.fallback_index = 0;

    std::deque<Transaction> overdraw;
    overdraw.push_back(make_signed_tx(f.a, f.b.pub, TxKind::Normal, 80, 0, 0));
    Block dbl = build_proposal(f.chain, overdraw, 1, f.a.pub, 8);
    dbl.transactions.push_back(make_signed_tx(f.a, f.c.pub, TxKind::Normal, 80, 0, 1));
    CHECK(validate_proposal(f.chain, dbl, ctx) == ProposalError::BadContent);

    Block wrong_slot = build_proposal(f.chain, {}, 2, f.a.pub, 8);
    CHECK(validate_proposal(f.chain, wrong_slot, ctx) == ProposalError::BadContent);
}

TEST_CASE("happy path commits every slot with identical chains") {
    auto res = run_simulation(base_scenario(4));
    CHECK(res.metrics.committed_slots == 4);
    CHECK(res.metrics.skipped_slots == 0);
    CHECK(res.metrics.fork_count == 0);
    CHECK(res.metrics.chains_identical);
    CHECK(res.metrics.conservation_ok);
    for (const Chain& c : res.chains) CHECK(block_hash(c.tip()) == block_hash(res.chains[0].tip()));
}

TEST_CASE("equal seeds reproduce bit-identical runs") {
    auto cfg = base_scenario(4);
    cfg.drop_prob = 0.05;
    cfg.delay_max = 6;
    auto r1 = run_simulation(cfg);
    auto r2 = run_simulation(cfg);
    CHECK(r1.metrics.digest == r2.metrics.digest);
    CHECK(r1.event_log == r2.event_log);
    for (size_t i = 0; i < r1.chains.size(); ++i) {
        REQUIRE(r1.chains[i].blocks().size() == r2.chains[i].blocks().size());
        for (size_t h = 0; h < r1.chains[i].blocks().size(); ++h)
            CHECK(r1.chains[i].blocks()[h].encode() == r2.chains[i].blocks()[h].encode());
    }

    auto cfg2 = cfg;
    cfg2.seed = 8;
    CHECK(run_simulation(cfg2).metrics.digest != r1.metrics.digest);
}

TEST_CASE("a silent leader is replaced by a fallback within the slot") {
    auto cfg = base_scenario(4);
    cfg.nodes[0].behavior = NodeBehavior::SilentLeader;
    auto res = run_simulation(cfg);
    CHECK(res.metrics.committed_slots == 4);
    CHECK(res.metrics.fork_count == 0);
    CHECK(res.metrics.chains_identical);
    // The silent node never assembles a block, so it leads none.
    CHECK(res.metrics.leadership.count(to_hex(res.keys[0].pub.enc)) == 0);
}

TEST_CASE("an equivocating leader cannot split the group into a fork") {
    auto cfg = base_scenario(4, 6);
    cfg.nodes[1].behavior = NodeBehavior::EquivocatingLeader;
    auto res = run_simulation(cfg);
    CHECK(res.metrics.fork_count == 0);
    CHECK(res.metrics.finality_violations == 0);
    CHECK(res.metrics.chains_identical);
    CHECK(res.metrics.conservation_ok);
}

TEST_CASE("a single-member group behaves identically under both topologies") {
    auto flat = base_scenario(1, 3);
    flat.txs_per_slot = 0;
    auto tree = flat;
    tree.params.topology = Topology::Tree;
    auto rf = run_simulation(flat);
    auto rt = run_simulation(tree);
    CHECK(rf.metrics.committed_slots == 3);
    CHECK(rt.metrics.committed_slots == 3);
    CHECK(rf.metrics.cosi_messages_total == rt.metrics.cosi_messages_total);
    CHECK(rf.metrics.final_tip_hash == rt.metrics.final_tip_hash);
}

TEST_CASE("tree aggregation cuts the leader-adjacent message load") {
    auto flat = base_scenario(7, 3);
    auto tree = flat;
    tree.params.topology = Topology::Tree;
    tree.params.branching = 2;
    auto rf = run_simulation(flat);
    auto rt = run_simulation(tree);
    REQUIRE(rf.metrics.committed_slots == 3);
    REQUIRE(rt.metrics.committed_slots == 3);
    CHECK(rt.metrics.leader_adjacent_max < rf.metrics.leader_adjacent_max);
}

TEST_CASE("invalid scenario configurations are rejected") {
    ScenarioConfig cfg = base_scenario(4);
    cfg.params.timeout_ticks = 10;  // cannot fit two CoSi rounds
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);

    ScenarioConfig empty;
    CHECK_THROWS_AS(run_simulation(empty), std::invalid_argument);

    ScenarioConfig no_stake = base_scenario(2);
    no_stake.nodes[0].stake = 0;
    no_stake.nodes[1].stake = 0;
    CHECK_THROWS_AS(run_simulation(no_stake), std::invalid_argument);
}

TEST_CASE("scenario files round-trip through JSON") {
    ScenarioConfig cfg = base_scenario(3);
    cfg.nodes[2].behavior = NodeBehavior::Offline;
    cfg.nodes[2].offline_from = 5;
    cfg.nodes[2].offline_to = 50;
    cfg.params.topology = Topology::Tree;
    const std::string path = "/tmp/sklcoin_scenario_test.json";
    cfg.save(path);
    ScenarioConfig back = ScenarioConfig::load(path);
    CHECK(back.n_slots == cfg.n_slots);
    CHECK(back.params.group_size == cfg.params.group_size);
    CHECK(back.params.topology == Topology::Tree);
    CHECK(back.nodes.size() == 3);
    CHECK(back.nodes[2].behavior == NodeBehavior::Offline);
    CHECK(back.nodes[2].offline_from == 5);
    CHECK(back.nodes[2].offline_to == 50);
    std::remove(path.c_str());
}

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

#include <deque>
#include <functional>
#include <optional>
#include <set>

#include "sklcoin/cosi.hpp"
#include "sklcoin/election.hpp"
#include "sklcoin/simnet.hpp"

namespace sklcoin {

enum class Topology { Flat, Tree };

struct ProtocolParams {
    size_t group_size = 4;
    size_t horizon = 16;       // fallback leaders per slot
    Tick timeout_ticks = 200;  // per fallback window
    Tick phase_window = 0;     // leader's per-phase wait; 0 derives from delay_max
    size_t max_block_txs = 16;
    uint32_t max_attempts = 8;  // CoSi retries per fallback window
    Topology topology = Topology::Flat;
    size_t branching = 2;
};

// Structured protocol events, emitted to the metrics sink.
struct NodeEvent {
    enum class Type {
        SlotStarted,
        Proposal,
        Round1Complete,
        Committed,
        Timeout,
        SlotSkipped,
    };
    Type type;
    NodeId node = 0;
    Tick tick = 0;
    uint64_t slot = 0;
    uint32_t fallback = 0;
    uint64_t height = 0;
    Hash256 hash{};
    std::string leader_hex;
    bool by_leader = false;  // Committed: set on the assembling leader
    Tick latency = 0;        // Committed by leader: ticks since slot start

    std::string to_json() const;
};

using EventSink = std::function<void(const NodeEvent&)>;

struct SlotContext {
    uint64_t slot = 0;
    LeaderSchedule schedule;
    uint32_t fallback_index = 0;
    std::vector<GroupPoint> group;
    size_t min_participants = 0;
    Tick timeout_ticks = 0;
};

enum class TimeoutOutcome { NextLeader, ScheduleExhausted };

// Fallback rotation on timeout: the next schedule entry takes over the
// same slot.
TimeoutOutcome handle_timeout(SlotContext& ctx, size_t horizon);

// FIFO transaction selection for a new proposal: valid transactions against
// the running state, up to max_txs; invalid ones are skipped, not consumed.
Block build_proposal(const Chain& chain, const std::deque<Transaction>& mempool,
                     uint64_t slot, const GroupPoint& leader, size_t max_txs);

enum class ProposalError { WrongLeader, BadContent };

std::optional<ProposalError> validate_proposal(const Chain& chain, const Block& proposal,
                                               const SlotContext& ctx);

// One simulated miner: ledger, mempool, election, and the per-slot
// propose / CoSi round 1 / CoSi round 2 / finalize state machine.
class Node : public NodeHost {
public:
    Node(NodeId id, KeyPair key, const Block& genesis, ProtocolParams params,
         std::vector<GroupPoint> node_pubs, SimNet* net, EventSink sink);

    // Schedules the first slot; call once before SimNet::run.
    void start(uint64_t n_slots);

    void add_tx(const Transaction& tx) { mempool_.push_back(tx); }

    const Chain& chain() const { return chain_; }
    uint64_t cosi_messages() const { return cosi_messages_; }
    uint64_t cosi_rounds_completed() const { return cosi_rounds_completed_; }
    uint64_t leader_adjacent_messages() const { return leader_adjacent_messages_; }

    void on_message(NodeId from, const Bytes& payload) override;
    void on_timer(uint64_t tag) override;

private:
    struct SignerRound {
        Block block;
        Bytes msg;
        Commitment commitment;
        bool responded = false;
    };

    struct LeaderRound {
        uint8_t round = 1;
        uint32_t attempt = 0;
        Block block;
        Bytes msg;
        std::map<size_t, GroupPoint> commits;  // tree mode: subtree aggregates
        Bitmask commit_mask;
        GroupPoint V;
        Bitmask Z;
        std::map<size_t, Scalar> responses;
        Bitmask response_mask;
        bool challenge_sent = false;
    };

    // tree-mode per-phase relay/aggregation state
    struct RelayState {
        GroupPoint commit_V;
        Bitmask commit_Z;
        std::set<size_t> commit_children_pending;
        bool commit_sent_up = false;
        Scalar response_r;
        Bitmask response_Z;
        std::set<size_t> response_children_pending;
        bool response_sent_up = false;
        bool have_challenge = false;
    };

    NodeId id_;
    KeyPair key_;
    NodeBehavior behavior_;
    ProtocolParams params_;
    std::vector<GroupPoint> node_pubs_;
    SimNet* net_;
    EventSink sink_;

    Chain chain_;
    std::deque<Transaction> mempool_;
    uint64_t end_slot_ = 0;
    bool drained_ = false;

    // slot context (recomputed from the chain at every slot start)
    uint64_t slot_ = 0;
    uint32_t fallback_ = 0;
    Tick slot_start_tick_ = 0;
    LeaderSchedule schedule_;
    std::vector<GroupPoint> group_;
    std::vector<NodeId> group_ids_;
    GroupPoint group_agg_;
    size_t min_participants_ = 0;
    int my_pos_ = -1;  // position in signing group, -1 if outside

    std::optional<LeaderRound> lr_;
    std::set<size_t> excluded_;  // silent responders, excluded on retry

    std::map<std::pair<uint8_t, uint32_t>, SignerRound> signer_;  // (round, attempt)
    std::map<std::pair<uint8_t, uint32_t>, RelayState> relay_;
    std::optional<Hash256> round1_lock_;          // cleared on fallback timeout
    std::map<uint64_t, Hash256> round2_locks_;    // slot -> proposal hash, permanent

    uint64_t cosi_messages_ = 0;
    uint64_t cosi_rounds_completed_ = 0;
    uint64_t leader_adjacent_messages_ = 0;

    // --- plumbing ---
    void emit(NodeEvent ev);
    void send_to(NodeId to, const Bytes& payload, bool reliable = false);
    void send_cosi(NodeId to, const Bytes& payload);
    bool i_am_leader() const;
    NodeId leader_node() const;
    size_t tree_depth() const;
    std::vector<size_t> tree_children(size_t pos) const;
    bool subtree_has_bits(size_t pos, const Bitmask& z) const;
    Tick phase_window() const;

    // --- slot driving ---
    void start_slot(uint64_t slot, Tick start_tick);
    void advance_slot(uint64_t next_slot);
    void recompute_slot_context();
    void lead();
    void start_round(uint8_t round);
    void commit_block(Block block);
    void on_slot_timeout();

    // --- message handlers ---
    void handle_announce(NodeId from, const Bytes& b);
    void handle_commit(NodeId from, const Bytes& b);
    void handle_challenge(NodeId from, const Bytes& b);
    void handle_response(NodeId from, const Bytes& b);
    void handle_block(NodeId from, const Bytes& b);
    void handle_head(NodeId from, const Bytes& b);
    void handle_sync_req(NodeId from, const Bytes& b);
    void handle_sync_resp(NodeId from, const Bytes& b);

    void leader_on_commitment(const GroupPoint& V, const Bitmask& Z);
    void leader_on_response(const Scalar& r, const Bitmask& Z);
    bool maybe_send_challenge_impl();
    void maybe_finish_responses();
    void maybe_flush_commit_up(uint8_t round, uint32_t attempt);
    void maybe_flush_response_up(uint8_t round, uint32_t attempt);
    void try_accept_block(const Block& block, NodeId from, bool live);
    void purge_mempool(const Block& block);
};

}  // namespace sklcoin

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

#include "sklcoin/consensus.hpp"

#include <algorithm>

#include "json.hpp"

namespace sklcoin {

namespace {

enum MsgType : uint8_t {
    kAnnounce = 1,
    kCommit = 2,
    kChallenge = 3,
    kResponse = 4,
    kBlock = 5,
    kHead = 6,
    kSyncReq = 7,
    kSyncResp = 8,
};

// Commit/Response carry a destination role so a leader that also sits inside
// the aggregation tree can tell its two inboxes apart.
enum DestRole : uint8_t { kToLeader = 0, kToParent = 1 };

enum TimerKind : uint64_t {
    kSlotTimeout = 1,
    kCommitDeadline = 2,
    kResponseDeadline = 3,
    kWake = 4,
};

// [4b kind][32b slot][12b fallback][4b round][12b attempt]
uint64_t pack_tag(TimerKind kind, uint64_t slot, uint32_t fallback, uint8_t round,
                  uint32_t attempt) {
    return (kind & 0xf) | (slot & 0xffffffffull) << 4 | uint64_t(fallback & 0xfff) << 36 |
           uint64_t(round & 0xf) << 48 | uint64_t(attempt & 0xfff) << 52;
}

struct Tag {
    TimerKind kind;
    uint64_t slot;
    uint32_t fallback;
    uint8_t round;
    uint32_t attempt;
};

Tag unpack_tag(uint64_t t) {
    return {static_cast<TimerKind>(t & 0xf), (t >> 4) & 0xffffffffull,
            static_cast<uint32_t>((t >> 36) & 0xfff), static_cast<uint8_t>((t >> 48) & 0xf),
            static_cast<uint32_t>((t >> 52) & 0xfff)};
}

// mode: 0 = direct fan-out, 1 = tree aggregation. A tree leader falls back
// to direct mode on later attempts, so lossy links cannot starve a whole
// subtree forever.
struct RoundHeader {
    uint8_t round = 0;
    uint64_t slot = 0;
    uint32_t fallback = 0;
    uint32_t attempt = 0;
    uint8_t mode = 0;
};

constexpr uint32_t kTreeAttempts = 2;  // tree attempts before direct fallback

void append_round_header(Bytes& out, const RoundHeader& h) {
    out.push_back(h.round);
    append_u64le(out, h.slot);
    append_u32le(out, h.fallback);
    append_u32le(out, h.attempt);
    out.push_back(h.mode);
}

bool read_round_header(const Bytes& b, size_t& off, RoundHeader& h) {
    if (off + 18 > b.size()) return false;
    h.round = b[off];
    h.slot = read_u64le(b.data() + off + 1);
    h.fallback = read_u32le(b.data() + off + 9);
    h.attempt = read_u32le(b.data() + off + 13);
    h.mode = b[off + 17];
    off += 18;
    return true;
}

void append_chunk(Bytes& out, const Bytes& chunk) {
    append_u32le(out, static_cast<uint32_t>(chunk.size()));
    append_bytes(out, chunk);
}

bool read_chunk(const Bytes& b, size_t& off, Bytes& chunk) {
    if (off + 4 > b.size()) return false;
    const uint32_t n = read_u32le(b.data() + off);
    off += 4;
    if (off + n > b.size()) return false;
    chunk.assign(b.begin() + off, b.begin() + off + n);
    off += n;
    return true;
}

}  // namespace

std::string NodeEvent::to_json() const {
    static const char* names[] = {"slot_started", "proposal", "round1_complete",
                                  "committed",    "timeout",  "slot_skipped"};
    nlohmann::json j = {{"type", names[static_cast<int>(type)]},
                        {"node", node},
                        {"tick", tick},
                        {"slot", slot},
                        {"fallback", fallback}};
    if (type == Type::Committed) {
        j["height"] = height;
        j["hash"] = to_hex(hash);
        j["leader"] = leader_hex;
        j["by_leader"] = by_leader;
        if (by_leader) j["latency"] = latency;
    }
    return j.dump();
}

TimeoutOutcome handle_timeout(SlotContext& ctx, size_t horizon) {
    const size_t limit = std::min(horizon, ctx.schedule.leaders.size());
    if (ctx.fallback_index + 1 >= limit) return TimeoutOutcome::ScheduleExhausted;
    ctx.fallback_index += 1;
    return TimeoutOutcome::NextLeader;
}

Block build_proposal(const Chain& chain, const std::deque<Transaction>& mempool,
                     uint64_t slot, const GroupPoint& leader, size_t max_txs) {
    Block b;
    b.parent_hash = block_hash(chain.tip());
    b.slot = slot;
    b.leader = leader;
    AccountTable scratch = chain.state();
    for (const Transaction& tx : mempool) {
        if (b.transactions.size() >= max_txs) break;
        if (validate_transaction(scratch, tx)) continue;  // skip invalid, keep FIFO order
        apply_transaction(scratch, tx);
        b.transactions.push_back(tx);
    }
    return b;
}

std::optional<ProposalError> validate_proposal(const Chain& chain, const Block& proposal,
                                               const SlotContext& ctx) {
    if (chain.validate_content(proposal) || proposal.slot != ctx.slot)
        return ProposalError::BadContent;
    if (ctx.fallback_index >= ctx.schedule.leaders.size() ||
        proposal.leader != ctx.schedule.leaders[ctx.fallback_index])
        return ProposalError::WrongLeader;
    return std::nullopt;
}

Node::Node(NodeId id, KeyPair key, const Block& genesis, ProtocolParams params,
           std::vector<GroupPoint> node_pubs, SimNet* net, EventSink sink)
    : id_(id),
      key_(std::move(key)),
      behavior_(net->behavior(id)),
      params_(params),
      node_pubs_(std::move(node_pubs)),
      net_(net),
      sink_(std::move(sink)),
      chain_(Chain::from_genesis(genesis)) {}

void Node::emit(NodeEvent ev) {
    ev.node = id_;
    ev.tick = net_->now();
    if (sink_) sink_(ev);
}

void Node::send_to(NodeId to, const Bytes& payload, bool reliable) {
    net_->send(id_, to, payload, reliable);
}

void Node::send_cosi(NodeId to, const Bytes& payload) {
    if (to != id_) {
        ++cosi_messages_;
        if (id_ == leader_node()) ++leader_adjacent_messages_;
    }
    net_->send(id_, to, payload);
}

bool Node::i_am_leader() const {
    return fallback_ < schedule_.leaders.size() && schedule_.leaders[fallback_] == key_.pub;
}

NodeId Node::leader_node() const {
    if (fallback_ >= schedule_.leaders.size()) return id_;
    const GroupPoint& pub = schedule_.leaders[fallback_];
    for (NodeId i = 0; i < node_pubs_.size(); ++i)
        if (node_pubs_[i] == pub) return i;
    return id_;
}

size_t Node::tree_depth() const {
    size_t depth = 0;
    size_t pos = group_.empty() ? 0 : group_.size() - 1;
    while (pos > 0) {
        pos = (pos - 1) / params_.branching;
        ++depth;
    }
    return depth;
}

std::vector<size_t> Node::tree_children(size_t pos) const {
    std::vector<size_t> out;
    for (size_t c = params_.branching * pos + 1;
         c <= params_.branching * pos + params_.branching && c < group_.size(); ++c)
        out.push_back(c);
    return out;
}

bool Node::subtree_has_bits(size_t pos, const Bitmask& z) const {
    if (z.test(pos)) return true;
    for (size_t c : tree_children(pos))
        if (subtree_has_bits(c, z)) return true;
    return false;
}

Tick Node::phase_window() const {
    if (params_.phase_window != 0) return params_.phase_window;
    return 2 * net_->max_delay() + 2;
}

void Node::start(uint64_t n_slots) {
    end_slot_ = n_slots;
    if (behavior_ == NodeBehavior::Offline) {
        const NodeFault& f = net_->fault(id_);
        if (f.offline_to != UINT64_MAX)
            net_->set_timer(id_, f.offline_to, pack_tag(kWake, 0, 0, 0, 0));
    }
    start_slot(1, 0);
}

void Node::recompute_slot_context() {
    StakeholderList stakeholders = compute_stakeholders(chain_);
    CommonSeed cs = common_seed(chain_);
    MemoryMap map = build_memory_map(stakeholders, cs);
    schedule_ = leader_schedule(map, cs, params_.horizon);
    group_ = signing_group(stakeholders, params_.group_size);
    min_participants_ = min_participants_for(group_.size());
    group_agg_ = aggregate_keys(group_, Bitmask::all_set(group_.size()));
    group_ids_.assign(group_.size(), 0);
    my_pos_ = -1;
    for (size_t p = 0; p < group_.size(); ++p) {
        for (NodeId i = 0; i < node_pubs_.size(); ++i)
            if (node_pubs_[i] == group_[p]) group_ids_[p] = i;
        if (group_[p] == key_.pub) my_pos_ = static_cast<int>(p);
    }
}

void Node::start_slot(uint64_t slot, Tick start_tick) {
    slot_ = slot;
    fallback_ = 0;
    slot_start_tick_ = start_tick;
    lr_.reset();
    excluded_.clear();
    signer_.clear();
    relay_.clear();
    round1_lock_.reset();
    recompute_slot_context();
    emit({.type = NodeEvent::Type::SlotStarted, .slot = slot_, .fallback = 0});
    net_->set_timer(id_, net_->now() + params_.timeout_ticks,
                    pack_tag(kSlotTimeout, slot_, fallback_, 0, 0));
    if (i_am_leader()) lead();
}

void Node::advance_slot(uint64_t next_slot) {
    for (auto it = round2_locks_.begin(); it != round2_locks_.end();)
        it = it->first < next_slot ? round2_locks_.erase(it) : std::next(it);
    if (next_slot > end_slot_) {
        if (!drained_) {
            drained_ = true;
            Bytes head;
            head.push_back(kHead);
            append_u64le(head, chain_.height());
            for (NodeId i = 0; i < node_pubs_.size(); ++i)
                if (i != id_) send_to(i, head, /*reliable=*/true);
        }
        return;
    }
    start_slot(next_slot, net_->now());
}

void Node::lead() {
    if (behavior_ == NodeBehavior::SilentLeader) return;
    Block proposal = build_proposal(chain_, mempool_, slot_, key_.pub, params_.max_block_txs);
    emit({.type = NodeEvent::Type::Proposal, .slot = slot_, .fallback = fallback_});
    lr_ = LeaderRound{};
    lr_->block = proposal;
    lr_->attempt = 0;
    start_round(1);
}

void Node::start_round(uint8_t round) {
    LeaderRound& lr = *lr_;
    lr.round = round;
    lr.msg = round == 1 ? lr.block.proposal_bytes() : lr.block.commit_message_bytes();
    lr.commits.clear();
    lr.commit_mask = Bitmask(group_.size());
    lr.V = GroupPoint::identity();
    lr.Z = Bitmask(group_.size());
    lr.responses.clear();
    lr.response_mask = Bitmask(group_.size());
    lr.challenge_sent = false;

    const bool tree = params_.topology == Topology::Tree && lr.attempt < kTreeAttempts;
    const uint8_t mode = tree ? 1 : 0;
    Bytes announce;
    announce.push_back(kAnnounce);
    append_round_header(announce, {round, slot_, fallback_, lr.attempt, mode});
    append_chunk(announce, lr.block.encode());

    if (tree) {
        send_cosi(group_ids_[0], announce);
    } else if (behavior_ == NodeBehavior::EquivocatingLeader && round == 1) {
        // Conflicting proposal for the second half of the group: same slot
        // and attempt, one extra (perfectly valid) transaction.
        Block alt = lr.block;
        AccountTable scratch = chain_.state();
        for (const Transaction& tx : alt.transactions) apply_transaction(scratch, tx);
        alt.transactions.push_back(make_signed_tx(key_, key_.pub, TxKind::Normal, 1, 0,
                                                  scratch[key_.pub].next_nonce));
        Bytes announce_alt;
        announce_alt.push_back(kAnnounce);
        append_round_header(announce_alt, {round, slot_, fallback_, lr.attempt, mode});
        append_chunk(announce_alt, alt.encode());
        for (size_t p = 0; p < group_.size(); ++p) {
            if (excluded_.count(p)) continue;
            send_cosi(group_ids_[p], p < group_.size() / 2 ? announce : announce_alt);
        }
    } else {
        for (size_t p = 0; p < group_.size(); ++p) {
            if (excluded_.count(p)) continue;
            send_cosi(group_ids_[p], announce);
        }
    }

    const Tick legs = tree ? tree_depth() + 1 : 1;
    net_->set_timer(id_, net_->now() + phase_window() * legs,
                    pack_tag(kCommitDeadline, slot_, fallback_, round, lr.attempt));
}

void Node::on_timer(uint64_t tag) {
    const Tag t = unpack_tag(tag);
    switch (t.kind) {
        case kWake: {
            // Back online: restart the local slot clock and pull in whatever
            // the network committed meanwhile.
            if (drained_) return;
            Bytes req;
            req.push_back(kSyncReq);
            append_u64le(req, chain_.height());
            for (NodeId i = 0; i < node_pubs_.size(); ++i)
                if (i != id_) send_to(i, req, /*reliable=*/true);
            start_slot(slot_, net_->now());
            return;
        }
        case kSlotTimeout:
            if (drained_ || t.slot != slot_ || t.fallback != fallback_) return;
            on_slot_timeout();
            return;
        case kCommitDeadline: {
            if (drained_ || !lr_ || t.slot != slot_ || t.fallback != fallback_ ||
                t.round != lr_->round || t.attempt != lr_->attempt || lr_->challenge_sent)
                return;
            if (!maybe_send_challenge_impl()) {
                // Not enough commitments. One more try in case drops ate them;
                // otherwise the slot timer rotates the leadership.
                if (lr_->attempt + 1 < params_.max_attempts) {
                    lr_->attempt += 1;
                    start_round(lr_->round);
                }
            }
            return;
        }
        case kResponseDeadline: {
            if (drained_ || !lr_ || t.slot != slot_ || t.fallback != fallback_ ||
                t.round != lr_->round || t.attempt != lr_->attempt)
                return;
            if (lr_->response_mask == lr_->Z) return;  // round already finished
            // Members that committed but stayed silent get excluded and the
            // round restarts without them. Only meaningful on direct fan-out
            // attempts; in a tree attempt a silent subtree usually means a
            // dropped relay, not a dead member. Exclusion never cuts below
            // quorum either, or a burst of drops would wedge the leader for
            // the whole window.
            if (params_.topology == Topology::Flat || lr_->attempt >= kTreeAttempts) {
                for (size_t p = 0; p < group_.size(); ++p)
                    if (lr_->Z.test(p) && !lr_->response_mask.test(p)) excluded_.insert(p);
                if (group_.size() - excluded_.size() < min_participants_) excluded_.clear();
            }
            if (lr_->attempt + 1 < params_.max_attempts) {
                lr_->attempt += 1;
                start_round(lr_->round);
            }
            return;
        }
    }
}

void Node::on_slot_timeout() {
    emit({.type = NodeEvent::Type::Timeout, .slot = slot_, .fallback = fallback_});
    fallback_ += 1;
    round1_lock_.reset();
    signer_.clear();
    relay_.clear();
    lr_.reset();
    excluded_.clear();
    const size_t limit = std::min<size_t>(params_.horizon, schedule_.leaders.size());
    if (fallback_ >= limit) {
        emit({.type = NodeEvent::Type::SlotSkipped, .slot = slot_, .fallback = fallback_});
        advance_slot(slot_ + 1);
        return;
    }
    net_->set_timer(id_, net_->now() + params_.timeout_ticks,
                    pack_tag(kSlotTimeout, slot_, fallback_, 0, 0));
    if (i_am_leader()) lead();
}

void Node::on_message(NodeId from, const Bytes& b) {
    if (b.empty()) return;
    if (from != id_ && b[0] >= kAnnounce && b[0] <= kResponse && id_ == leader_node())
        ++leader_adjacent_messages_;
    switch (b[0]) {
        case kAnnounce: handle_announce(from, b); break;
        case kCommit: handle_commit(from, b); break;
        case kChallenge: handle_challenge(from, b); break;
        case kResponse: handle_response(from, b); break;
        case kBlock: handle_block(from, b); break;
        case kHead: handle_head(from, b); break;
        case kSyncReq: handle_sync_req(from, b); break;
        case kSyncResp: handle_sync_resp(from, b); break;
        default: break;
    }
}

void Node::handle_announce(NodeId from, const Bytes& b) {
    size_t off = 1;
    RoundHeader h{};
    Bytes blk_bytes;
    if (!read_round_header(b, off, h) || !read_chunk(b, off, blk_bytes)) return;
    if (drained_ || h.slot != slot_ || h.fallback != fallback_) return;
    auto blk = Block::decode(blk_bytes);
    if (!blk) return;

    const auto key = std::make_pair(h.round, h.attempt);
    if (signer_.count(key)) return;  // duplicate, or a second conflicting proposal

    const bool tree = h.mode == 1;
    if (tree) {
        if (my_pos_ < 0) return;
        if (relay_.count(key)) return;  // duplicate relay
        RelayState& rs = relay_[key];
        rs.commit_Z = Bitmask(group_.size());
        rs.response_Z = Bitmask(group_.size());
        for (size_t c : tree_children(static_cast<size_t>(my_pos_))) {
            send_cosi(group_ids_[c], b);
            rs.commit_children_pending.insert(c);
        }
    }

    bool willing = my_pos_ >= 0;
    Bytes proposal = blk->proposal_bytes();
    Hash256 h_prop = sha256(proposal);
    if (willing) {
        SlotContext ctx{slot_, schedule_, fallback_, group_, min_participants_,
                        params_.timeout_ticks};
        Block content = *blk;
        content.prepare_sig = {};
        content.commit_sig = {};
        if (validate_proposal(chain_, content, ctx)) willing = false;
        // The round-2 announcement must carry a valid proof-of-acceptance.
        if (willing && h.round == 2 &&
            !cosi_verify(blk->prepare_sig, group_, proposal, min_participants_))
            willing = false;
        // A signer that voted for one proposal never helps a different one
        // in the same slot.
        if (willing && round1_lock_ && *round1_lock_ != h_prop) willing = false;
        if (willing) {
            auto lock = round2_locks_.find(slot_);
            if (lock != round2_locks_.end() && lock->second != h_prop) willing = false;
        }
    }

    if (willing) {
        SignerRound sr;
        sr.block = *blk;
        sr.msg = h.round == 1 ? proposal : blk->commit_message_bytes();
        Bytes seed;
        append_u64le(seed, slot_);
        append_u32le(seed, fallback_);
        seed.push_back(h.round);
        append_u32le(seed, h.attempt);
        append_u64le(seed, id_);
        append_bytes(seed, h_prop);
        sr.commitment = make_commitment(key_, seed);
        sr.commitment.index = static_cast<size_t>(my_pos_);
        signer_.emplace(key, std::move(sr));
    }

    if (!tree) {
        if (!willing) return;
        Bytes commit;
        commit.push_back(kCommit);
        commit.push_back(kToLeader);
        append_round_header(commit, h);
        append_bytes(commit, signer_.at(key).commitment.V.enc);
        Bitmask own(group_.size());
        own.set(static_cast<size_t>(my_pos_));
        append_chunk(commit, own.to_bytes());
        send_cosi(leader_node(), commit);
    } else {
        RelayState& rs = relay_.at(key);
        if (willing) {
            rs.commit_V = rs.commit_V + signer_.at(key).commitment.V;
            rs.commit_Z.set(static_cast<size_t>(my_pos_));
        }
        maybe_flush_commit_up(h.round, h.attempt);
    }
}

void Node::maybe_flush_commit_up(uint8_t round, uint32_t attempt) {
    const auto key = std::make_pair(round, attempt);
    auto it = relay_.find(key);
    if (it == relay_.end()) return;
    RelayState& rs = it->second;
    if (rs.commit_sent_up || !rs.commit_children_pending.empty()) return;
    rs.commit_sent_up = true;
    const size_t pos = static_cast<size_t>(my_pos_);
    const bool to_leader = pos == 0;
    Bytes commit;
    commit.push_back(kCommit);
    commit.push_back(to_leader ? kToLeader : kToParent);
    append_round_header(commit, {round, slot_, fallback_, attempt, 1});
    append_bytes(commit, rs.commit_V.enc);
    append_chunk(commit, rs.commit_Z.to_bytes());
    send_cosi(to_leader ? leader_node() : group_ids_[(pos - 1) / params_.branching], commit);
}

void Node::handle_commit(NodeId from, const Bytes& b) {
    size_t off = 2;
    if (b.size() < 2) return;
    const uint8_t role = b[1];
    RoundHeader h{};
    Bytes mask_bytes;
    GroupPoint V;
    if (!read_round_header(b, off, h)) return;
    if (off + 32 > b.size()) return;
    std::copy(b.begin() + off, b.begin() + off + 32, V.enc.begin());
    off += 32;
    if (!read_chunk(b, off, mask_bytes)) return;
    if (drained_ || h.slot != slot_ || h.fallback != fallback_) return;
    Bitmask Z = Bitmask::from_bytes(mask_bytes, group_.size());

    if (role == kToLeader) {
        if (lr_ && i_am_leader() && h.round == lr_->round && h.attempt == lr_->attempt)
            leader_on_commitment(V, Z);
        return;
    }
    if (params_.topology != Topology::Tree || my_pos_ < 0) return;
    const auto key = std::make_pair(h.round, h.attempt);
    auto it = relay_.find(key);
    if (it == relay_.end()) return;
    RelayState& rs = it->second;
    size_t child_pos = group_.size();
    for (size_t c : tree_children(static_cast<size_t>(my_pos_)))
        if (group_ids_[c] == from) child_pos = c;
    if (child_pos == group_.size() || !rs.commit_children_pending.count(child_pos)) return;
    rs.commit_children_pending.erase(child_pos);
    rs.commit_V = rs.commit_V + V;
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i)) rs.commit_Z.set(i);
    maybe_flush_commit_up(h.round, h.attempt);
}

void Node::leader_on_commitment(const GroupPoint& V, const Bitmask& Z) {
    LeaderRound& lr = *lr_;
    if (lr.challenge_sent || Z.size() != group_.size() || Z.popcount() == 0) return;
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i) && lr.commit_mask.test(i)) return;  // duplicate delivery
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i)) lr.commit_mask.set(i);
    lr.V = lr.V + V;
    size_t expected = 0;
    for (size_t p = 0; p < group_.size(); ++p)
        if (!excluded_.count(p)) ++expected;
    if (lr.commit_mask.popcount() >= expected) maybe_send_challenge_impl();
}

bool Node::maybe_send_challenge_impl() {
    LeaderRound& lr = *lr_;
    if (lr.challenge_sent) return true;
    if (lr.commit_mask.popcount() < min_participants_) return false;
    lr.challenge_sent = true;
    lr.Z = lr.commit_mask;
    const bool tree = params_.topology == Topology::Tree && lr.attempt < kTreeAttempts;
    Bytes ch;
    ch.push_back(kChallenge);
    append_round_header(ch, {lr.round, slot_, fallback_, lr.attempt, tree ? uint8_t{1} : uint8_t{0}});
    append_bytes(ch, lr.V.enc);
    append_chunk(ch, lr.Z.to_bytes());
    if (tree) {
        send_cosi(group_ids_[0], ch);
    } else {
        for (size_t p = 0; p < group_.size(); ++p)
            if (lr.Z.test(p)) send_cosi(group_ids_[p], ch);
    }
    const Tick legs = tree ? tree_depth() + 1 : 1;
    net_->set_timer(id_, net_->now() + phase_window() * legs,
                    pack_tag(kResponseDeadline, slot_, fallback_, lr.round, lr.attempt));
    return true;
}

void Node::handle_challenge(NodeId from, const Bytes& b) {
    size_t off = 1;
    RoundHeader h{};
    GroupPoint V;
    Bytes mask_bytes;
    if (!read_round_header(b, off, h)) return;
    if (off + 32 > b.size()) return;
    std::copy(b.begin() + off, b.begin() + off + 32, V.enc.begin());
    off += 32;
    if (!read_chunk(b, off, mask_bytes)) return;
    if (drained_ || h.slot != slot_ || h.fallback != fallback_ || my_pos_ < 0) return;
    Bitmask Z = Bitmask::from_bytes(mask_bytes, group_.size());

    const auto key = std::make_pair(h.round, h.attempt);
    const bool tree = h.mode == 1;
    const size_t pos = static_cast<size_t>(my_pos_);

    if (tree) {
        auto rit = relay_.find(key);
        if (rit == relay_.end()) return;
        RelayState& rs = rit->second;
        if (rs.have_challenge) return;  // duplicate
        rs.have_challenge = true;
        for (size_t c : tree_children(pos)) {
            send_cosi(group_ids_[c], b);
            if (subtree_has_bits(c, Z)) rs.response_children_pending.insert(c);
        }
    }

    auto sit = signer_.find(key);
    if (sit != signer_.end() && !sit->second.responded && Z.test(pos)) {
        SignerRound& sr = sit->second;
        sr.responded = true;
        Scalar c = challenge(V, group_agg_, sr.msg);
        Scalar r_i = respond(sr.commitment, key_, c);
        Hash256 h_prop = sha256(sr.block.proposal_bytes());
        if (h.round == 1)
            round1_lock_ = h_prop;
        else
            round2_locks_[slot_] = h_prop;
        if (!tree) {
            Bytes resp;
            resp.push_back(kResponse);
            resp.push_back(kToLeader);
            append_round_header(resp, h);
            append_bytes(resp, r_i.le);
            Bitmask own(group_.size());
            own.set(pos);
            append_chunk(resp, own.to_bytes());
            send_cosi(leader_node(), resp);
        } else {
            RelayState& rs = relay_.at(key);
            rs.response_r = rs.response_r + r_i;
            rs.response_Z.set(pos);
        }
    }
    if (tree) maybe_flush_response_up(h.round, h.attempt);
}

void Node::maybe_flush_response_up(uint8_t round, uint32_t attempt) {
    const auto key = std::make_pair(round, attempt);
    auto it = relay_.find(key);
    if (it == relay_.end()) return;
    RelayState& rs = it->second;
    if (!rs.have_challenge || rs.response_sent_up) return;
    if (!rs.response_children_pending.empty()) return;
    rs.response_sent_up = true;
    if (rs.response_Z.popcount() == 0) return;  // nothing from this subtree
    const size_t pos = static_cast<size_t>(my_pos_);
    const bool to_leader = pos == 0;
    Bytes resp;
    resp.push_back(kResponse);
    resp.push_back(to_leader ? kToLeader : kToParent);
    append_round_header(resp, {round, slot_, fallback_, attempt, 1});
    append_bytes(resp, rs.response_r.le);
    append_chunk(resp, rs.response_Z.to_bytes());
    send_cosi(to_leader ? leader_node() : group_ids_[(pos - 1) / params_.branching], resp);
}

void Node::handle_response(NodeId from, const Bytes& b) {
    size_t off = 2;
    if (b.size() < 2) return;
    const uint8_t role = b[1];
    RoundHeader h{};
    Scalar r;
    Bytes mask_bytes;
    if (!read_round_header(b, off, h)) return;
    if (off + 32 > b.size()) return;
    std::copy(b.begin() + off, b.begin() + off + 32, r.le.begin());
    off += 32;
    if (!read_chunk(b, off, mask_bytes)) return;
    if (drained_ || h.slot != slot_ || h.fallback != fallback_) return;
    Bitmask Z = Bitmask::from_bytes(mask_bytes, group_.size());

    if (role == kToLeader) {
        if (lr_ && i_am_leader() && h.round == lr_->round && h.attempt == lr_->attempt &&
            lr_->challenge_sent)
            leader_on_response(r, Z);
        return;
    }
    if (params_.topology != Topology::Tree || my_pos_ < 0) return;
    const auto key = std::make_pair(h.round, h.attempt);
    auto it = relay_.find(key);
    if (it == relay_.end()) return;
    RelayState& rs = it->second;
    size_t child_pos = group_.size();
    for (size_t c : tree_children(static_cast<size_t>(my_pos_)))
        if (group_ids_[c] == from) child_pos = c;
    if (child_pos == group_.size() || !rs.response_children_pending.count(child_pos)) return;
    rs.response_children_pending.erase(child_pos);
    rs.response_r = rs.response_r + r;
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i)) rs.response_Z.set(i);
    maybe_flush_response_up(h.round, h.attempt);
}

void Node::leader_on_response(const Scalar& r, const Bitmask& Z) {
    LeaderRound& lr = *lr_;
    if (Z.size() != group_.size() || Z.popcount() == 0) return;
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i) && lr.response_mask.test(i)) return;  // duplicate delivery
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i) && !lr.Z.test(i)) return;  // responder that never committed
    for (size_t i = 0; i < Z.size(); ++i)
        if (Z.test(i)) lr.response_mask.set(i);
    lr.responses[lr.responses.size()] = r;
    maybe_finish_responses();
}

void Node::maybe_finish_responses() {
    LeaderRound& lr = *lr_;
    if (!(lr.response_mask == lr.Z)) return;
    Scalar r = Scalar::zero();
    for (const auto& [_, ri] : lr.responses) r = r + ri;
    CollectiveSignature sig{lr.V, r, lr.Z};
    if (!cosi_verify(sig, group_, lr.msg, min_participants_)) {
        // Mixed or corrupted responses; nothing to salvage this attempt.
        return;
    }
    ++cosi_rounds_completed_;
    if (lr.round == 1) {
        lr.block.prepare_sig = sig;
        emit({.type = NodeEvent::Type::Round1Complete, .slot = slot_, .fallback = fallback_});
        lr.attempt = 0;
        excluded_.clear();
        start_round(2);
    } else {
        Block block = lr.block;
        block.commit_sig = sig;
        lr_.reset();
        commit_block(std::move(block));
    }
}

void Node::commit_block(Block block) {
    chain_.append(block);
    purge_mempool(block);
    emit({.type = NodeEvent::Type::Committed,
          .slot = slot_,
          .fallback = fallback_,
          .height = chain_.height(),
          .hash = block_hash(block),
          .leader_hex = to_hex(block.leader.enc),
          .by_leader = true,
          .latency = net_->now() - slot_start_tick_});
    Bytes msg;
    msg.push_back(kBlock);
    append_chunk(msg, block.encode());
    for (NodeId i = 0; i < node_pubs_.size(); ++i)
        if (i != id_) send_to(i, msg, /*reliable=*/true);
    advance_slot(block.slot + 1);
}

void Node::handle_block(NodeId from, const Bytes& b) {
    size_t off = 1;
    Bytes blk_bytes;
    if (!read_chunk(b, off, blk_bytes)) return;
    auto blk = Block::decode(blk_bytes);
    if (!blk) return;
    try_accept_block(*blk, from, true);
}

void Node::try_accept_block(const Block& block, NodeId from, bool live) {
    if (block.parent_hash != block_hash(chain_.tip())) {
        if (block.slot > chain_.tip().slot && live) {
            Bytes req;
            req.push_back(kSyncReq);
            append_u64le(req, chain_.height());
            send_to(from, req, /*reliable=*/true);
        }
        return;
    }
    // The slot context is a pure function of the chain, so the context for a
    // block extending the current tip is recomputable on the spot.
    StakeholderList stakeholders = compute_stakeholders(chain_);
    CommonSeed cs = common_seed(chain_);
    MemoryMap map = build_memory_map(stakeholders, cs);
    LeaderSchedule sched = leader_schedule(map, cs, params_.horizon);
    std::vector<GroupPoint> group = signing_group(stakeholders, params_.group_size);
    const size_t minp = min_participants_for(group.size());
    if (chain_.validate_block(block, sched.leaders, params_.horizon, group, minp)) return;
    chain_.append(block);
    purge_mempool(block);
    emit({.type = NodeEvent::Type::Committed,
          .slot = block.slot,
          .fallback = fallback_,
          .height = chain_.height(),
          .hash = block_hash(block),
          .leader_hex = to_hex(block.leader.enc),
          .by_leader = false});
    if (drained_) {
        Bytes head;
        head.push_back(kHead);
        append_u64le(head, chain_.height());
        for (NodeId i = 0; i < node_pubs_.size(); ++i)
            if (i != id_) send_to(i, head, /*reliable=*/true);
        return;
    }
    if (block.slot >= slot_) advance_slot(block.slot + 1);
}

void Node::handle_head(NodeId from, const Bytes& b) {
    if (b.size() != 9) return;
    const uint64_t h = read_u64le(b.data() + 1);
    if (h > chain_.height()) {
        Bytes req;
        req.push_back(kSyncReq);
        append_u64le(req, chain_.height());
        send_to(from, req, /*reliable=*/true);
    }
}

void Node::handle_sync_req(NodeId from, const Bytes& b) {
    if (b.size() != 9) return;
    const uint64_t have = read_u64le(b.data() + 1);
    if (have >= chain_.height()) return;
    Bytes resp;
    resp.push_back(kSyncResp);
    append_u32le(resp, static_cast<uint32_t>(chain_.height() - have));
    for (uint64_t i = have + 1; i <= chain_.height(); ++i)
        append_chunk(resp, chain_.blocks()[i].encode());
    send_to(from, resp, /*reliable=*/true);
}

void Node::handle_sync_resp(NodeId from, const Bytes& b) {
    size_t off = 1;
    if (off + 4 > b.size()) return;
    const uint32_t count = read_u32le(b.data() + off);
    off += 4;
    for (uint32_t i = 0; i < count; ++i) {
        Bytes blk_bytes;
        if (!read_chunk(b, off, blk_bytes)) return;
        auto blk = Block::decode(blk_bytes);
        if (!blk) return;
        try_accept_block(*blk, from, false);
    }
}

void Node::purge_mempool(const Block& block) {
    std::set<std::pair<GroupPoint, uint64_t>> included;
    for (const Transaction& tx : block.transactions) included.insert({tx.from, tx.nonce});
    std::erase_if(mempool_, [&](const Transaction& tx) {
        return included.count({tx.from, tx.nonce}) > 0;
    });
}

}  // namespace sklcoin

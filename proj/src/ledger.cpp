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

#include "sklcoin/ledger.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace sklcoin {

namespace {

// Each collective signature is encoded as u32 group size, V, r, mask bytes.
void append_cosig(Bytes& out, const CollectiveSignature& sig) {
    append_u32le(out, static_cast<uint32_t>(sig.Z.size()));
    append_bytes(out, sig.V.enc);
    append_bytes(out, sig.r.le);
    append_bytes(out, sig.Z.to_bytes());
}

bool read_cosig(const Bytes& b, size_t& off, CollectiveSignature& sig) {
    if (off + 4 > b.size()) return false;
    const size_t n = read_u32le(b.data() + off);
    off += 4;
    const size_t mask_bytes = (n + 7) / 8;
    if (off + 64 + mask_bytes > b.size()) return false;
    std::copy(b.begin() + off, b.begin() + off + 32, sig.V.enc.begin());
    std::copy(b.begin() + off + 32, b.begin() + off + 64, sig.r.le.begin());
    sig.Z = Bitmask::from_bytes(Bytes(b.begin() + off + 64, b.begin() + off + 64 + mask_bytes), n);
    off += 64 + mask_bytes;
    return true;
}

}  // namespace

const char* to_string(TxError e) {
    switch (e) {
        case TxError::BadSignature: return "BadSignature";
        case TxError::BadNonce: return "BadNonce";
        case TxError::InsufficientBalance: return "InsufficientBalance";
        case TxError::BadAmount: return "BadAmount";
    }
    return "?";
}

const char* to_string(BlockError e) {
    switch (e) {
        case BlockError::BadParent: return "BadParent";
        case BlockError::BadSlot: return "BadSlot";
        case BlockError::WrongLeader: return "WrongLeader";
        case BlockError::BadTransaction: return "BadTransaction";
        case BlockError::BadPrepareSig: return "BadPrepareSig";
        case BlockError::BadCommitSig: return "BadCommitSig";
        case BlockError::BadGenesis: return "BadGenesis";
    }
    return "?";
}

Bytes Transaction::signing_bytes() const {
    Bytes out;
    out.push_back(static_cast<uint8_t>(kind));
    append_bytes(out, from.enc);
    append_bytes(out, to.enc);
    append_u64le(out, amount);
    append_u64le(out, fee);
    append_u64le(out, nonce);
    return out;
}

Bytes Transaction::encode() const {
    Bytes out = signing_bytes();
    append_bytes(out, signature.s.le);
    append_bytes(out, signature.e.le);
    return out;
}

std::optional<Transaction> Transaction::decode(const uint8_t* p, size_t len, size_t& consumed) {
    constexpr size_t kSize = 1 + 32 + 32 + 8 + 8 + 8 + 32 + 32;
    if (len < kSize) return std::nullopt;
    Transaction tx;
    size_t off = 0;
    if (p[0] > 1) return std::nullopt;
    tx.kind = static_cast<TxKind>(p[off]);
    off += 1;
    std::copy(p + off, p + off + 32, tx.from.enc.begin());
    off += 32;
    std::copy(p + off, p + off + 32, tx.to.enc.begin());
    off += 32;
    tx.amount = read_u64le(p + off);
    off += 8;
    tx.fee = read_u64le(p + off);
    off += 8;
    tx.nonce = read_u64le(p + off);
    off += 8;
    std::copy(p + off, p + off + 32, tx.signature.s.le.begin());
    off += 32;
    std::copy(p + off, p + off + 32, tx.signature.e.le.begin());
    off += 32;
    consumed = off;
    return tx;
}

Transaction make_signed_tx(const KeyPair& from, const GroupPoint& to, TxKind kind,
                           uint64_t amount, uint64_t fee, uint64_t nonce) {
    Transaction tx;
    tx.kind = kind;
    tx.from = from.pub;
    tx.to = to;
    tx.amount = amount;
    tx.fee = fee;
    tx.nonce = nonce;
    Bytes msg = tx.signing_bytes();
    tx.signature = schnorr_sign(from, msg, derive_nonce(from.secret, msg));
    return tx;
}

Bytes Block::proposal_bytes() const {
    Bytes out;
    append_bytes(out, parent_hash);
    append_u64le(out, slot);
    append_bytes(out, leader.enc);
    append_u32le(out, static_cast<uint32_t>(allocations.size()));
    for (const GenesisAlloc& a : allocations) {
        append_bytes(out, a.pub.enc);
        append_u64le(out, a.balance);
        append_u64le(out, a.stake);
    }
    append_u32le(out, static_cast<uint32_t>(transactions.size()));
    for (const Transaction& tx : transactions) append_bytes(out, tx.encode());
    return out;
}

Bytes Block::commit_message_bytes() const {
    Bytes out;
    Bytes proposal = proposal_bytes();
    append_bytes(out, sha256(proposal));
    append_bytes(out, prepare_sig.serialize());
    return out;
}

Bytes Block::encode() const {
    Bytes out = proposal_bytes();
    append_cosig(out, prepare_sig);
    append_cosig(out, commit_sig);
    return out;
}

std::optional<Block> Block::decode(const Bytes& b) {
    Block blk;
    size_t off = 0;
    if (b.size() < 32 + 8 + 32 + 4) return std::nullopt;
    std::copy(b.begin(), b.begin() + 32, blk.parent_hash.begin());
    off += 32;
    blk.slot = read_u64le(b.data() + off);
    off += 8;
    std::copy(b.begin() + off, b.begin() + off + 32, blk.leader.enc.begin());
    off += 32;
    const uint32_t n_alloc = read_u32le(b.data() + off);
    off += 4;
    for (uint32_t i = 0; i < n_alloc; ++i) {
        if (off + 48 > b.size()) return std::nullopt;
        GenesisAlloc a;
        std::copy(b.begin() + off, b.begin() + off + 32, a.pub.enc.begin());
        a.balance = read_u64le(b.data() + off + 32);
        a.stake = read_u64le(b.data() + off + 40);
        blk.allocations.push_back(a);
        off += 48;
    }
    if (off + 4 > b.size()) return std::nullopt;
    const uint32_t n_tx = read_u32le(b.data() + off);
    off += 4;
    for (uint32_t i = 0; i < n_tx; ++i) {
        size_t consumed = 0;
        auto tx = Transaction::decode(b.data() + off, b.size() - off, consumed);
        if (!tx) return std::nullopt;
        blk.transactions.push_back(*tx);
        off += consumed;
    }
    if (!read_cosig(b, off, blk.prepare_sig)) return std::nullopt;
    if (!read_cosig(b, off, blk.commit_sig)) return std::nullopt;
    if (off != b.size()) return std::nullopt;
    return blk;
}

Hash256 block_hash(const Block& block) {
    Bytes enc = block.encode();
    return sha256(enc);
}

std::optional<TxError> validate_transaction(const AccountTable& state, const Transaction& tx) {
    if (tx.amount < 1) return TxError::BadAmount;
    if (!schnorr_verify(tx.from, tx.signing_bytes(), tx.signature))
        return TxError::BadSignature;
    auto it = state.find(tx.from);
    const Account sender = it == state.end() ? Account{} : it->second;
    if (tx.nonce != sender.next_nonce) return TxError::BadNonce;
    if (tx.amount > UINT64_MAX - tx.fee) return TxError::InsufficientBalance;
    if (sender.balance < tx.amount + tx.fee) return TxError::InsufficientBalance;
    return std::nullopt;
}

void apply_transaction(AccountTable& state, const Transaction& tx) {
    Account& sender = state[tx.from];
    sender.balance -= tx.amount + tx.fee;
    sender.next_nonce += 1;
    Account& recipient = state[tx.to];
    if (tx.kind == TxKind::Normal)
        recipient.balance += tx.amount;
    else
        recipient.stake += tx.amount;
}

Chain Chain::from_genesis(const Block& genesis) {
    Chain c;
    c.blocks_.push_back(genesis);
    for (const GenesisAlloc& a : genesis.allocations) {
        Account& acct = c.state_[a.pub];
        acct.balance += a.balance;
        acct.stake += a.stake;
    }
    return c;
}

std::optional<BlockError> Chain::validate_content(const Block& block) const {
    if (block.parent_hash != block_hash(tip())) return BlockError::BadParent;
    if (block.slot <= tip().slot) return BlockError::BadSlot;
    if (!block.allocations.empty()) return BlockError::BadGenesis;
    AccountTable scratch = state_;
    for (const Transaction& tx : block.transactions) {
        if (validate_transaction(scratch, tx)) return BlockError::BadTransaction;
        apply_transaction(scratch, tx);
    }
    return std::nullopt;
}

std::optional<BlockError> Chain::validate_block(const Block& block,
                                                std::span<const GroupPoint> expected_leaders,
                                                size_t allowed_fallbacks,
                                                const std::vector<GroupPoint>& group_pubs,
                                                size_t min_participants) const {
    if (auto err = validate_content(block)) return err;
    bool leader_ok = false;
    for (size_t i = 0; i < allowed_fallbacks && i < expected_leaders.size(); ++i)
        if (expected_leaders[i] == block.leader) {
            leader_ok = true;
            break;
        }
    if (!leader_ok) return BlockError::WrongLeader;
    Bytes proposal = block.proposal_bytes();
    if (!cosi_verify(block.prepare_sig, group_pubs, proposal, min_participants))
        return BlockError::BadPrepareSig;
    Bytes commit_msg = block.commit_message_bytes();
    if (!cosi_verify(block.commit_sig, group_pubs, commit_msg, min_participants))
        return BlockError::BadCommitSig;
    return std::nullopt;
}

void Chain::append(const Block& block) {
    uint64_t fees = 0;
    for (const Transaction& tx : block.transactions) {
        apply_transaction(state_, tx);
        fees += tx.fee;
    }
    state_[block.leader].balance += fees;
    blocks_.push_back(block);
}

StakeholderList compute_stakeholders(const Chain& chain) {
    std::vector<GroupPoint> order;
    std::set<GroupPoint> seen;
    for (const GenesisAlloc& a : chain.genesis().allocations)
        if (a.stake >= 1 && seen.insert(a.pub).second) order.push_back(a.pub);
    for (const Block& b : chain.blocks())
        for (const Transaction& tx : b.transactions)
            if (tx.kind == TxKind::Stake && seen.insert(tx.to).second) order.push_back(tx.to);
    StakeholderList out;
    for (const GroupPoint& p : order) {
        auto it = chain.state().find(p);
        const uint64_t stake = it == chain.state().end() ? 0 : it->second.stake;
        if (stake >= 1) out.push_back({p, stake});
    }
    return out;
}

Block make_genesis_block(const std::vector<GenesisAlloc>& allocations) {
    Block g;
    g.allocations = allocations;
    return g;
}

GenesisConfig load_genesis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open genesis file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    GenesisConfig cfg;
    for (const auto& rec : j.at("accounts")) {
        GenesisAlloc a;
        Bytes pk = from_hex(rec.at("pubkey").get<std::string>());
        if (pk.size() != 32) throw std::runtime_error("bad pubkey length in genesis");
        std::copy(pk.begin(), pk.end(), a.pub.enc.begin());
        a.balance = rec.at("balance").get<uint64_t>();
        a.stake = rec.at("stake").get<uint64_t>();
        cfg.allocations.push_back(a);
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.group_size = j.value("group_size", cfg.group_size);
    cfg.timeout_ticks = j.value("timeout_ticks", cfg.timeout_ticks);
    return cfg;
}

void save_genesis(const GenesisConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["accounts"] = nlohmann::json::array();
    for (const GenesisAlloc& a : cfg.allocations)
        j["accounts"].push_back({{"pubkey", to_hex(a.pub.enc)},
                                 {"balance", a.balance},
                                 {"stake", a.stake}});
    j["horizon"] = cfg.horizon;
    j["group_size"] = cfg.group_size;
    j["timeout_ticks"] = cfg.timeout_ticks;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write genesis file: " + path);
    out << j.dump(2) << "\n";
}

void dump_chain(const Chain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chain dump: " + path);
    for (size_t i = 0; i < chain.blocks().size(); ++i) {
        const Block& b = chain.blocks()[i];
        nlohmann::json j = {{"height", i},
                            {"slot", b.slot},
                            {"hash", to_hex(block_hash(b))},
                            {"block", to_hex(b.encode())}};
        out << j.dump() << "\n";
    }
}

}  // namespace sklcoin

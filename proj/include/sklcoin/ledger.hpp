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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sklcoin/cosi.hpp"
#include "sklcoin/group.hpp"

namespace sklcoin {

enum class TxKind : uint8_t { Normal = 0, Stake = 1 };

// Normal transactions move balance to balance; Stake transactions move the
// sender's balance into the recipient's stake. Stake never decreases.
struct Transaction {
    TxKind kind = TxKind::Normal;
    GroupPoint from;
    GroupPoint to;
    uint64_t amount = 0;  // >= 1
    uint64_t fee = 0;
    uint64_t nonce = 0;
    SchnorrSignature signature;

    bool operator==(const Transaction&) const = default;

    // All fields except the signature; the bytes the sender signs.
    Bytes signing_bytes() const;
    Bytes encode() const;
    static std::optional<Transaction> decode(const uint8_t* p, size_t len, size_t& consumed);
};

Transaction make_signed_tx(const KeyPair& from, const GroupPoint& to, TxKind kind,
                           uint64_t amount, uint64_t fee, uint64_t nonce);

struct GenesisAlloc {
    GroupPoint pub;
    uint64_t balance = 0;
    uint64_t stake = 0;
    bool operator==(const GenesisAlloc&) const = default;
};

struct Block {
    Hash256 parent_hash{};
    uint64_t slot = 0;
    GroupPoint leader;  // all-zero for genesis
    std::vector<GenesisAlloc> allocations;  // non-empty only in genesis
    std::vector<Transaction> transactions;
    CollectiveSignature prepare_sig;
    CollectiveSignature commit_sig;

    bool operator==(const Block&) const = default;

    // Header + allocations + transactions; the round-1 (pre-prepare) message.
    Bytes proposal_bytes() const;
    // Round-2 (commit) message: SHA-256 of the proposal bytes followed by the
    // serialized round-1 proof-of-acceptance.
    Bytes commit_message_bytes() const;
    Bytes encode() const;  // proposal bytes plus both collective signatures
    static std::optional<Block> decode(const Bytes& b);
};

Hash256 block_hash(const Block& block);

struct Account {
    uint64_t balance = 0;
    uint64_t stake = 0;
    uint64_t next_nonce = 0;
};

enum class TxError { BadSignature, BadNonce, InsufficientBalance, BadAmount };
enum class BlockError {
    BadParent,
    BadSlot,
    WrongLeader,
    BadTransaction,
    BadPrepareSig,
    BadCommitSig,
    BadGenesis,
};

const char* to_string(TxError e);
const char* to_string(BlockError e);

// Account table keyed by public-key encoding. Deterministic iteration order.
using AccountTable = std::map<GroupPoint, Account>;

struct Stakeholder {
    GroupPoint pub;
    uint64_t stake = 0;
    bool operator==(const Stakeholder&) const = default;
};
using StakeholderList = std::vector<Stakeholder>;

std::optional<TxError> validate_transaction(const AccountTable& state, const Transaction& tx);

// Precondition: validate_transaction returned ok.
void apply_transaction(AccountTable& state, const Transaction& tx);

class Chain {
public:
    static Chain from_genesis(const Block& genesis);

    const Block& tip() const { return blocks_.back(); }
    const Block& genesis() const { return blocks_.front(); }
    const std::vector<Block>& blocks() const { return blocks_; }
    size_t height() const { return blocks_.size() - 1; }
    const AccountTable& state() const { return state_; }

    // Full validation against the current tip: parent link, slot monotonicity,
    // transactions, scheduled leader, both collective signatures.
    // `expected_leaders` is the slot's leader sequence; the block leader must
    // match one of the first `allowed_fallbacks` entries.
    std::optional<BlockError> validate_block(const Block& block,
                                             std::span<const GroupPoint> expected_leaders,
                                             size_t allowed_fallbacks,
                                             const std::vector<GroupPoint>& group_pubs,
                                             size_t min_participants) const;

    // Content-only check (parent link, slot, transactions); used while the
    // collective signatures are still being gathered.
    std::optional<BlockError> validate_content(const Block& block) const;

    // Applies transactions in order and credits the leader with the total
    // fees. Precondition: validation passed.
    void append(const Block& block);

    bool operator==(const Chain&) const = default;

private:
    Chain() = default;
    std::vector<Block> blocks_;
    AccountTable state_;
};

// Every account with stake >= 1, ordered by first appearance of its first
// stake credit in the chain; genesis allocations first, in genesis order.
StakeholderList compute_stakeholders(const Chain& chain);

// Genesis file: JSON with per-account {pubkey, balance, stake} plus protocol
// parameters.
struct GenesisConfig {
    std::vector<GenesisAlloc> allocations;
    uint64_t horizon = 64;
    uint64_t group_size = 4;
    uint64_t timeout_ticks = 100;
};

Block make_genesis_block(const std::vector<GenesisAlloc>& allocations);
GenesisConfig load_genesis(const std::string& path);
void save_genesis(const GenesisConfig& cfg, const std::string& path);

// Chain dump: JSON lines, one block per line (hex-encoded canonical bytes).
void dump_chain(const Chain& chain, const std::string& path);

}  // namespace sklcoin

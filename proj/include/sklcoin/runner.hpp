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

#include <string>

#include "sklcoin/consensus.hpp"

namespace sklcoin {

struct ScenarioNode {
    uint64_t balance = 1000;
    uint64_t stake = 1;
    NodeBehavior behavior = NodeBehavior::Honest;
    Tick offline_from = 0;
    Tick offline_to = 0;
};

struct ScenarioConfig {
    std::string name = "unnamed";
    std::vector<ScenarioNode> nodes;
    uint64_t n_slots = 8;
    uint64_t seed = 1;
    ProtocolParams params;
    Tick delay_min = 1;
    Tick delay_max = 4;
    double drop_prob = 0.0;
    double dup_prob = 0.0;
    size_t txs_per_slot = 2;
    Tick max_ticks = 0;  // hard stop for SimNet::run; 0 = queue drain

    static ScenarioConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct RunMetrics {
    std::string name;
    uint64_t committed_slots = 0;
    uint64_t skipped_slots = 0;
    uint64_t fork_count = 0;
    uint64_t finality_violations = 0;
    bool chains_identical = false;
    bool conservation_ok = false;
    uint64_t total_value = 0;
    uint64_t final_height = 0;
    std::string final_tip_hash;
    uint64_t messages_sent = 0;
    uint64_t messages_delivered = 0;
    uint64_t cosi_messages_total = 0;
    uint64_t cosi_rounds_total = 0;
    uint64_t leader_adjacent_max = 0;
    Tick final_tick = 0;
    std::map<std::string, uint64_t> leadership;  // leader pubkey hex -> blocks led
    std::vector<Tick> commit_latencies;          // per committed block, leader-side
    std::string digest;                          // hash of chains + event log

    std::string to_json() const;
};

struct RunResult {
    RunMetrics metrics;
    std::vector<std::string> event_log;  // JSON lines, deterministic order
    std::vector<Chain> chains;           // final chain per node
    std::vector<KeyPair> keys;
};

// Deterministic per-node keypair; independent of the scenario seed so the
// same node index maps to the same key across scenarios.
KeyPair node_key(uint64_t index);

// Runs the scenario to completion and collects metrics.
// Throws std::invalid_argument on inconsistent configuration.
RunResult run_simulation(const ScenarioConfig& cfg);

}  // namespace sklcoin

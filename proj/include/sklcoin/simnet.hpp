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

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "sklcoin/bytes.hpp"
#include "sklcoin/election.hpp"

namespace sklcoin {

using NodeId = uint32_t;
using Tick = uint64_t;

enum class NodeBehavior { Honest, Offline, EquivocatingLeader, SilentLeader };

struct NodeFault {
    NodeBehavior behavior = NodeBehavior::Honest;
    Tick offline_from = 0;
    Tick offline_to = 0;  // exclusive; only meaningful for Offline
};

struct FaultConfig {
    Tick delay_min = 1;
    Tick delay_max = 1;
    double drop_prob = 0.0;
    double dup_prob = 0.0;
    std::vector<NodeFault> nodes;
};

// Timestamped message or timer in the discrete-event queue. Events are
// processed in (deliver_at, uid) order so runs replay exactly.
struct SimEvent {
    Tick deliver_at = 0;
    uint64_t uid = 0;
    NodeId from = 0;
    NodeId to = 0;
    bool is_timer = false;
    uint64_t timer_tag = 0;
    Bytes payload;
};

class NodeHost {
public:
    virtual ~NodeHost() = default;
    virtual void on_message(NodeId from, const Bytes& payload) = 0;
    virtual void on_timer(uint64_t tag) = 0;
};

class SimNet {
public:
    SimNet(FaultConfig cfg, uint64_t seed);

    void attach(std::vector<NodeHost*> hosts) { hosts_ = std::move(hosts); }

    Tick now() const { return now_; }
    size_t node_count() const { return cfg_.nodes.size(); }
    NodeBehavior behavior(NodeId id) const { return cfg_.nodes.at(id).behavior; }
    const NodeFault& fault(NodeId id) const { return cfg_.nodes.at(id); }
    Tick max_delay() const { return cfg_.delay_max; }
    bool online(NodeId id, Tick at) const;

    // Reliable sends ignore drop/dup faults; they model eventual delivery
    // under weak synchrony (retransmit-until-acked, collapsed to one event).
    void send(NodeId from, NodeId to, Bytes payload, bool reliable = false);
    void set_timer(NodeId node, Tick fire_at, uint64_t tag);

    // Drains the queue; stops early at max_tick (0 = no limit).
    void run(Tick max_tick = 0);

    uint64_t messages_sent() const { return messages_sent_; }
    uint64_t messages_delivered() const { return messages_delivered_; }

private:
    struct EventOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.deliver_at != b.deliver_at) return a.deliver_at > b.deliver_at;
            return a.uid > b.uid;
        }
    };

    FaultConfig cfg_;
    Prng rng_;
    Tick now_ = 0;
    uint64_t next_uid_ = 0;
    uint64_t messages_sent_ = 0;
    uint64_t messages_delivered_ = 0;
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
    std::vector<NodeHost*> hosts_;

    double next_unit();  // uniform in [0,1)
    Tick next_delay();
};

}  // namespace sklcoin

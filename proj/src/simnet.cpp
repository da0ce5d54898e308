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

#include "sklcoin/simnet.hpp"

#include <stdexcept>

namespace sklcoin {

SimNet::SimNet(FaultConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    if (cfg_.drop_prob < 0 || cfg_.drop_prob > 1 || cfg_.dup_prob < 0 || cfg_.dup_prob > 1)
        throw std::invalid_argument("probabilities must be in [0,1]");
    if (cfg_.delay_min < 1 || cfg_.delay_max < cfg_.delay_min)
        throw std::invalid_argument("need 1 <= delay_min <= delay_max");
}

bool SimNet::online(NodeId id, Tick at) const {
    const NodeFault& f = cfg_.nodes.at(id);
    if (f.behavior != NodeBehavior::Offline) return true;
    return !(at >= f.offline_from && at < f.offline_to);
}

double SimNet::next_unit() {
    return static_cast<double>(rng_.next() >> 11) * 0x1.0p-53;
}

Tick SimNet::next_delay() {
    if (cfg_.delay_min == cfg_.delay_max) return cfg_.delay_min;
    return cfg_.delay_min + rng_.next_in_range(cfg_.delay_max - cfg_.delay_min + 1) - 1;
}

void SimNet::send(NodeId from, NodeId to, Bytes payload, bool reliable) {
    if (!online(from, now_)) return;
    // A node talking to itself is a local hand-off: queued for ordering but
    // not a network message, and never faulted.
    const bool loopback = (from == to);
    if (!loopback) ++messages_sent_;
    int copies = 1;
    if (!loopback && !reliable) {
        if (next_unit() < cfg_.drop_prob) copies = 0;
        if (copies == 1 && next_unit() < cfg_.dup_prob) copies = 2;
    }
    for (int i = 0; i < copies; ++i) {
        SimEvent ev;
        ev.deliver_at = now_ + next_delay();
        ev.uid = next_uid_++;
        ev.from = from;
        ev.to = to;
        ev.payload = payload;
        queue_.push(std::move(ev));
    }
}

void SimNet::set_timer(NodeId node, Tick fire_at, uint64_t tag) {
    if (fire_at < now_) fire_at = now_;
    SimEvent ev;
    ev.deliver_at = fire_at;
    ev.uid = next_uid_++;
    ev.from = node;
    ev.to = node;
    ev.is_timer = true;
    ev.timer_tag = tag;
    queue_.push(std::move(ev));
}

void SimNet::run(Tick max_tick) {
    while (!queue_.empty()) {
        SimEvent ev = queue_.top();
        queue_.pop();
        if (max_tick != 0 && ev.deliver_at > max_tick) break;
        now_ = ev.deliver_at;
        if (!online(ev.to, now_)) continue;
        if (ev.is_timer) {
            hosts_.at(ev.to)->on_timer(ev.timer_tag);
        } else {
            if (ev.from != ev.to) ++messages_delivered_;
            hosts_.at(ev.to)->on_message(ev.from, ev.payload);
        }
    }
}

}  // namespace sklcoin

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

#include "sklcoin/runner.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace sklcoin {

namespace {

NodeBehavior behavior_from_string(const std::string& s) {
    if (s == "honest") return NodeBehavior::Honest;
    if (s == "offline") return NodeBehavior::Offline;
    if (s == "equivocating_leader") return NodeBehavior::EquivocatingLeader;
    if (s == "silent_leader") return NodeBehavior::SilentLeader;
    throw std::invalid_argument("unknown behavior: " + s);
}

std::string behavior_to_string(NodeBehavior b) {
    switch (b) {
        case NodeBehavior::Honest: return "honest";
        case NodeBehavior::Offline: return "offline";
        case NodeBehavior::EquivocatingLeader: return "equivocating_leader";
        case NodeBehavior::SilentLeader: return "silent_leader";
    }
    return "honest";
}

Tick effective_phase_window(const ScenarioConfig& cfg) {
    return cfg.params.phase_window ? cfg.params.phase_window : 2 * cfg.delay_max + 2;
}

void validate_config(const ScenarioConfig& cfg) {
    if (cfg.nodes.empty()) throw std::invalid_argument("scenario needs at least one node");
    if (cfg.n_slots == 0) throw std::invalid_argument("n_slots must be >= 1");
    if (cfg.params.group_size == 0) throw std::invalid_argument("group_size must be >= 1");
    if (cfg.params.horizon == 0) throw std::invalid_argument("horizon must be >= 1");
    // Two CoSi rounds of two phases each must fit into one fallback window,
    // or honest leaders time out spuriously.
    if (cfg.params.timeout_ticks <= 4 * effective_phase_window(cfg))
        throw std::invalid_argument("timeout_ticks too small for the configured delays");
    uint64_t total_stake = 0;
    for (const ScenarioNode& n : cfg.nodes) total_stake += n.stake;
    if (total_stake == 0) throw std::invalid_argument("scenario needs stake somewhere");
}

}  // namespace

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    ScenarioConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.n_slots = j.value("n_slots", cfg.n_slots);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.delay_min = j.value("delay_min", cfg.delay_min);
    cfg.delay_max = j.value("delay_max", cfg.delay_max);
    cfg.drop_prob = j.value("drop_prob", cfg.drop_prob);
    cfg.dup_prob = j.value("dup_prob", cfg.dup_prob);
    cfg.txs_per_slot = j.value("txs_per_slot", cfg.txs_per_slot);
    cfg.max_ticks = j.value("max_ticks", cfg.max_ticks);
    cfg.params.group_size = j.value("group_size", cfg.params.group_size);
    cfg.params.horizon = j.value("horizon", cfg.params.horizon);
    cfg.params.timeout_ticks = j.value("timeout_ticks", cfg.params.timeout_ticks);
    cfg.params.phase_window = j.value("phase_window", cfg.params.phase_window);
    cfg.params.max_block_txs = j.value("max_block_txs", cfg.params.max_block_txs);
    cfg.params.max_attempts = j.value("max_attempts", cfg.params.max_attempts);
    cfg.params.branching = j.value("branching", cfg.params.branching);
    const std::string topo = j.value("topology", std::string("flat"));
    if (topo == "flat")
        cfg.params.topology = Topology::Flat;
    else if (topo == "tree")
        cfg.params.topology = Topology::Tree;
    else
        throw std::invalid_argument("unknown topology: " + topo);
    for (const auto& jn : j.at("nodes")) {
        ScenarioNode n;
        n.balance = jn.value("balance", n.balance);
        n.stake = jn.value("stake", n.stake);
        n.behavior = behavior_from_string(jn.value("behavior", std::string("honest")));
        n.offline_from = jn.value("offline_from", n.offline_from);
        if (jn.contains("offline_to"))
            n.offline_to = jn.at("offline_to").get<Tick>();
        else
            n.offline_to = n.behavior == NodeBehavior::Offline ? UINT64_MAX : 0;
        cfg.nodes.push_back(n);
    }
    return cfg;
}

void ScenarioConfig::save(const std::string& path) const {
    nlohmann::json j;
    j["name"] = name;
    j["n_slots"] = n_slots;
    j["seed"] = seed;
    j["delay_min"] = delay_min;
    j["delay_max"] = delay_max;
    j["drop_prob"] = drop_prob;
    j["dup_prob"] = dup_prob;
    j["txs_per_slot"] = txs_per_slot;
    j["group_size"] = params.group_size;
    j["horizon"] = params.horizon;
    j["timeout_ticks"] = params.timeout_ticks;
    j["phase_window"] = params.phase_window;
    j["max_block_txs"] = params.max_block_txs;
    j["max_attempts"] = params.max_attempts;
    j["branching"] = params.branching;
    j["topology"] = params.topology == Topology::Flat ? "flat" : "tree";
    j["nodes"] = nlohmann::json::array();
    for (const ScenarioNode& n : nodes) {
        nlohmann::json jn = {{"balance", n.balance},
                             {"stake", n.stake},
                             {"behavior", behavior_to_string(n.behavior)}};
        if (n.behavior == NodeBehavior::Offline) {
            jn["offline_from"] = n.offline_from;
            jn["offline_to"] = n.offline_to;
        }
        j["nodes"].push_back(jn);
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

std::string RunMetrics::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["committed_slots"] = committed_slots;
    j["skipped_slots"] = skipped_slots;
    j["fork_count"] = fork_count;
    j["finality_violations"] = finality_violations;
    j["chains_identical"] = chains_identical;
    j["conservation_ok"] = conservation_ok;
    j["total_value"] = total_value;
    j["final_height"] = final_height;
    j["final_tip_hash"] = final_tip_hash;
    j["messages_sent"] = messages_sent;
    j["messages_delivered"] = messages_delivered;
    j["cosi_messages_total"] = cosi_messages_total;
    j["cosi_rounds_total"] = cosi_rounds_total;
    j["leader_adjacent_max"] = leader_adjacent_max;
    j["final_tick"] = final_tick;
    j["leadership"] = leadership;
    j["commit_latencies"] = commit_latencies;
    j["digest"] = digest;
    return j.dump(2);
}

KeyPair node_key(uint64_t index) {
    Bytes seed_material;
    const char* label = "sklcoin-node-key";
    seed_material.assign(label, label + 16);
    append_u64le(seed_material, index);
    return keygen(sha256(seed_material));
}

RunResult run_simulation(const ScenarioConfig& cfg) {
    validate_config(cfg);
    const size_t n = cfg.nodes.size();

    std::vector<KeyPair> keys;
    std::vector<GroupPoint> pubs;
    std::vector<GenesisAlloc> allocs;
    for (size_t i = 0; i < n; ++i) {
        keys.push_back(node_key(i));
        pubs.push_back(keys.back().pub);
        allocs.push_back({keys.back().pub, cfg.nodes[i].balance, cfg.nodes[i].stake});
    }
    const Block genesis = make_genesis_block(allocs);

    FaultConfig fc;
    fc.delay_min = cfg.delay_min;
    fc.delay_max = cfg.delay_max;
    fc.drop_prob = cfg.drop_prob;
    fc.dup_prob = cfg.dup_prob;
    for (const ScenarioNode& sn : cfg.nodes)
        fc.nodes.push_back({sn.behavior, sn.offline_from, sn.offline_to});
    SimNet net(fc, cfg.seed);

    RunResult result;
    result.keys = keys;

    std::map<uint64_t, Hash256> committed_at_height;
    RunMetrics& m = result.metrics;
    m.name = cfg.name;
    EventSink sink = [&](const NodeEvent& ev) {
        result.event_log.push_back(ev.to_json());
        if (ev.type == NodeEvent::Type::Committed) {
            auto [it, fresh] = committed_at_height.emplace(ev.height, ev.hash);
            if (!fresh && it->second != ev.hash) {
                ++m.fork_count;
                ++m.finality_violations;
            }
            if (ev.by_leader) m.commit_latencies.push_back(ev.latency);
        }
    };

    std::vector<std::unique_ptr<Node>> nodes;
    std::vector<NodeHost*> hosts;
    for (size_t i = 0; i < n; ++i) {
        nodes.push_back(std::make_unique<Node>(static_cast<NodeId>(i), keys[i], genesis,
                                               cfg.params, pubs, &net, sink));
        hosts.push_back(nodes.back().get());
    }
    net.attach(hosts);

    // Workload: transactions are pre-signed against genesis nonces and handed
    // to every mempool up front; FIFO selection keeps per-sender nonces in
    // order no matter which slots commit.
    std::vector<uint64_t> nonces(n, 0);
    std::vector<uint64_t> spendable(n);
    for (size_t i = 0; i < n; ++i) spendable[i] = cfg.nodes[i].balance;
    const uint64_t want = cfg.txs_per_slot * cfg.n_slots;
    std::vector<Transaction> workload;
    for (uint64_t k = 0; k < want && n > 1; ++k) {
        const size_t from = k % n;
        const size_t to = (k + 1) % n;
        if (spendable[from] < 2) continue;
        spendable[from] -= 2;
        workload.push_back(
            make_signed_tx(keys[from], pubs[to], TxKind::Normal, 1, 1, nonces[from]++));
    }
    for (auto& node : nodes)
        for (const Transaction& tx : workload) node->add_tx(tx);

    for (auto& node : nodes) node->start(cfg.n_slots);

    Tick cap = cfg.max_ticks;
    if (cap == 0)
        cap = (cfg.n_slots + 2) * cfg.params.horizon * cfg.params.timeout_ticks + 100000;
    net.run(cap);

    // Final-state convergence is judged over the nodes still online at the
    // end; a permanently dark node has no one to sync it.
    size_t ref = n;
    m.chains_identical = true;
    for (size_t i = 0; i < n; ++i) {
        result.chains.push_back(nodes[i]->chain());
        m.cosi_messages_total += nodes[i]->cosi_messages();
        m.cosi_rounds_total += nodes[i]->cosi_rounds_completed();
        m.leader_adjacent_max =
            std::max(m.leader_adjacent_max, nodes[i]->leader_adjacent_messages());
        if (!net.online(static_cast<NodeId>(i), net.now())) continue;
        if (ref == n) ref = i;
        if (nodes[i]->chain().height() != nodes[ref]->chain().height() ||
            block_hash(nodes[i]->chain().tip()) != block_hash(nodes[ref]->chain().tip()))
            m.chains_identical = false;
    }
    if (ref == n) ref = 0;
    const Chain& chain = nodes[ref]->chain();

    m.committed_slots = chain.height();
    m.skipped_slots = cfg.n_slots > chain.height() ? cfg.n_slots - chain.height() : 0;
    m.final_height = chain.height();
    m.final_tip_hash = to_hex(block_hash(chain.tip()));
    m.final_tick = net.now();
    m.messages_sent = net.messages_sent();
    m.messages_delivered = net.messages_delivered();
    for (size_t h = 1; h < chain.blocks().size(); ++h)
        m.leadership[to_hex(chain.blocks()[h].leader.enc)] += 1;

    uint64_t genesis_total = 0;
    for (const GenesisAlloc& a : allocs) genesis_total += a.balance + a.stake;
    uint64_t final_total = 0;
    for (const auto& [pub, acct] : chain.state()) final_total += acct.balance + acct.stake;
    m.total_value = final_total;
    m.conservation_ok = genesis_total == final_total;

    Bytes digest_input;
    for (const Chain& c : result.chains)
        for (const Block& b : c.blocks()) append_bytes(digest_input, b.encode());
    for (const std::string& line : result.event_log)
        digest_input.insert(digest_input.end(), line.begin(), line.end());
    m.digest = to_hex(sha256(digest_input));
    return result;
}

}  // namespace sklcoin

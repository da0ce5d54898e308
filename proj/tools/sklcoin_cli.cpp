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

// Command-line front end: scenario runner, signing benchmark, and test
// vector generator.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sklcoin/runner.hpp"

using namespace sklcoin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& path, const std::string& out_dir, int64_t seed_override) {
    ScenarioConfig cfg;
    try {
        cfg = ScenarioConfig::load(path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: cannot load scenario: %s\n", e.what());
        return 2;
    }
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);

    RunResult res;
    try {
        res = run_simulation(cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: invalid configuration: %s\n", e.what());
        return 2;
    }
    const RunMetrics& m = res.metrics;

    std::printf("scenario          %s (seed %llu)\n", m.name.c_str(),
                static_cast<unsigned long long>(cfg.seed));
    std::printf("slots committed   %llu / %llu (%llu skipped)\n",
                static_cast<unsigned long long>(m.committed_slots),
                static_cast<unsigned long long>(cfg.n_slots),
                static_cast<unsigned long long>(m.skipped_slots));
    std::printf("forks             %llu\n", static_cast<unsigned long long>(m.fork_count));
    std::printf("finality breaks   %llu\n",
                static_cast<unsigned long long>(m.finality_violations));
    std::printf("chains identical  %s\n", m.chains_identical ? "yes" : "no");
    std::printf("value conserved   %s (total %llu)\n", m.conservation_ok ? "yes" : "no",
                static_cast<unsigned long long>(m.total_value));
    std::printf("final height      %llu, tip %s\n",
                static_cast<unsigned long long>(m.final_height),
                m.final_tip_hash.substr(0, 16).c_str());
    std::printf("messages          %llu sent, %llu delivered\n",
                static_cast<unsigned long long>(m.messages_sent),
                static_cast<unsigned long long>(m.messages_delivered));
    std::printf("finished at tick  %llu\n", static_cast<unsigned long long>(m.final_tick));
    std::printf("run digest        %s\n", m.digest.c_str());

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(out_dir + "/report.json") << m.to_json() << "\n";
        {
            std::ofstream csv(out_dir + "/metrics.csv");
            csv << "metric,value\n"
                << "committed_slots," << m.committed_slots << "\n"
                << "skipped_slots," << m.skipped_slots << "\n"
                << "fork_count," << m.fork_count << "\n"
                << "finality_violations," << m.finality_violations << "\n"
                << "chains_identical," << (m.chains_identical ? 1 : 0) << "\n"
                << "conservation_ok," << (m.conservation_ok ? 1 : 0) << "\n"
                << "final_height," << m.final_height << "\n"
                << "messages_sent," << m.messages_sent << "\n"
                << "messages_delivered," << m.messages_delivered << "\n"
                << "cosi_messages_total," << m.cosi_messages_total << "\n"
                << "cosi_rounds_total," << m.cosi_rounds_total << "\n"
                << "leader_adjacent_max," << m.leader_adjacent_max << "\n"
                << "final_tick," << m.final_tick << "\n";
        }
        {
            std::ofstream ev(out_dir + "/events.jsonl");
            for (const std::string& line : res.event_log) ev << line << "\n";
        }
        for (size_t i = 0; i < res.chains.size(); ++i)
            dump_chain(res.chains[i], out_dir + "/chain_node" + std::to_string(i) + ".jsonl");
        std::printf("artifacts written to %s\n", out_dir.c_str());
    }

    const bool ok = m.fork_count == 0 && m.finality_violations == 0 &&
                    m.chains_identical && m.conservation_ok;
    if (!ok) std::fprintf(stderr, "FAILED: protocol invariant violated\n");
    return ok ? 0 : 1;
}

int cmd_bench(const std::vector<size_t>& sizes, int reps) {
    std::printf("%8s  %12s  %12s\n", "signers", "mean ms", "ms/signer");
    for (size_t m : sizes) {
        std::vector<KeyPair> group;
        for (size_t i = 0; i < m; ++i) {
            std::array<uint8_t, 32> seed{};
            for (int b = 0; b < 8; ++b) seed[b] = static_cast<uint8_t>((7000 + i) >> (8 * b));
            group.push_back(keygen(seed));
        }
        Bytes msg = {'b', 'e', 'n', 'c', 'h'};
        const Bitmask online = Bitmask::all_set(m);
        const size_t minp = min_participants_for(m);
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) {
            auto res = run_cosi_round(0, msg, online, group, minp, static_cast<uint64_t>(r));
            if (!std::holds_alternative<CollectiveSignature>(res)) {
                std::fprintf(stderr, "error: signing round failed at m=%zu\n", m);
                return 1;
            }
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count() /
            reps;
        std::printf("%8zu  %12.3f  %12.4f\n", m, ms, ms / double(m));
    }
    return 0;
}

int cmd_genvectors(const std::string& out_dir) {
    fs::create_directories(out_dir);

    CommonSeed cs;
    for (size_t i = 0; i < 32; ++i) cs[i] = static_cast<uint8_t>(i);
    auto seed_of = [](uint64_t n) {
        std::array<uint8_t, 32> s{};
        for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(n >> (8 * i));
        return s;
    };
    const KeyPair a = keygen(seed_of(301)), b = keygen(seed_of(302));

    json doc;
    doc["common_seed"] = to_hex(cs);
    doc["stakeholders"] = json::array();
    doc["stakeholders"].push_back({{"pubkey", to_hex(a.pub.enc)}, {"stake", 2}});
    doc["stakeholders"].push_back({{"pubkey", to_hex(b.pub.enc)}, {"stake", 1}});

    const StakeholderList sh = {{a.pub, 2}, {b.pub, 1}};
    MemoryMap map = build_memory_map(sh, cs);
    doc["memory_map"] = json::array();
    for (const GroupPoint& cell : map) doc["memory_map"].push_back(to_hex(cell.enc));

    LeaderSchedule sched = leader_schedule(map, cs, 3);
    doc["schedule"] = json::array();
    for (const GroupPoint& l : sched.leaders) doc["schedule"].push_back(to_hex(l.enc));

    doc["splitmix64"] = json::object();
    for (uint64_t seed : {uint64_t(0), uint64_t(0x123456789ABCDEF0ull)}) {
        Prng p(seed);
        json stream = json::array();
        for (int i = 0; i < 5; ++i) {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(p.next()));
            stream.push_back(buf);
        }
        char key[17];
        std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(seed));
        doc["splitmix64"][key] = stream;
    }

    // With zero total stake the map is empty and no leader can be drawn.
    json degenerate;
    degenerate["common_seed"] = to_hex(cs);
    degenerate["stakeholders"] = json::array();
    degenerate["note"] = "no election possible: total stake is zero";
    doc["empty_map"] = degenerate;

    const std::string path = out_dir + "/election_vectors.json";
    std::ofstream(path) << doc.dump(2) << "\n";
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sklcoin: stake-based collective-signing consensus simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir;
    int64_t seed_override = -1;
    CLI::App* run = app.add_subcommand("run", "run a scenario file and report metrics");
    run->add_option("scenario", scenario_path, "path to a scenario JSON file")->required();
    run->add_option("--out", out_dir, "directory for report, events, and chain dumps");
    run->add_option("--seed", seed_override, "override the scenario seed");

    std::vector<size_t> sizes = {10, 50, 100};
    int reps = 5;
    CLI::App* bench = app.add_subcommand("bench", "time collective signing rounds");
    bench->add_option("--signers", sizes, "group sizes to benchmark");
    bench->add_option("--reps", reps, "rounds per group size")->check(CLI::PositiveNumber);

    std::string vec_dir = "vectors";
    CLI::App* gen = app.add_subcommand("genvectors", "emit frozen election test vectors");
    gen->add_option("--out", vec_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(scenario_path, out_dir, seed_override);
    if (bench->parsed()) return cmd_bench(sizes, reps);
    return cmd_genvectors(vec_dir);
}

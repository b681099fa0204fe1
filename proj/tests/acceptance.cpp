// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "pipeparse/cli.hpp"
#include "pipeparse/graph_transform.hpp"
#include "pipeparse/oracle.hpp"
#include "pipeparse/pipeline_sim.hpp"
#include "support.hpp"

using namespace pipeparse;

namespace {

// Pinned targets and limits.
constexpr double kFig5RuntimeLimitS = 1.0;
constexpr double kLatencyRuntimeLimitS = 10.0;
constexpr double kEquivalenceRuntimeLimitS = 60.0;
constexpr std::uint32_t kSimpleDepth = 6;
constexpr std::uint32_t kFullDepthTarget = 8;
constexpr std::uint32_t kFullDepthCeiling = 9;
constexpr std::uint64_t kSimpleLatencyPs = 19200;  // 19.2 ns
constexpr std::uint64_t kFullLatencyPs = 25600;    // 25.6 ns
constexpr std::uint64_t kClockKhz = 312500;        // 312.5 MHz
constexpr std::uint32_t kBusWidth = 320;
constexpr double kThroughputGbps = 100.0;
constexpr std::size_t kLatencyPackets = 10000;
constexpr std::size_t kEquivalencePackets = 10000;
constexpr std::size_t kRandomDags = 50;
constexpr std::size_t kMaxDagNodes = 12;

struct Check {
    bool ok = true;
    std::ostringstream why;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            if (!ok) why << "; ";
            why << what;
            ok = false;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ParseGraph load(const char* name) { return load_parser_spec_file(testing::fixture(name)); }

std::vector<std::vector<std::uint8_t>> corpus_bytes(const ParseGraph& g, std::size_t n, std::uint64_t seed) {
    std::vector<std::vector<std::uint8_t>> out;
    for (auto& c : generate_corpus(g, n, seed)) out.push_back(std::move(c.bytes));
    return out;
}

std::string level_names(const PipelinePlan& p) {
    std::string s;
    for (const auto& level : p.levels) {
        s += "[";
        for (std::size_t i = 0; i < level.size(); ++i) s += (i ? " " : "") + p.engine(level[i]).name;
        s += "]";
    }
    return s;
}

// Criterion 1: the fig5 fixture reduces and balances to the expected edge
// sets and the DOT output matches the hand-written golden files.
Check fig5_reproduction() {
    Check c;
    const auto t0 = Clock::now();
    const auto g = load("fig5.json");
    const auto reduced = transitive_reduction(g.topology());
    const EdgeSet reduced_edges{{"ETH", "IPv4"}, {"ETH", "IPv6"}, {"IPv4", "UDP"}, {"IPv4", "TCP"}, {"IPv6", "EXT"},
                                {"EXT", "UDP"},  {"EXT", "TCP"},  {"UDP", "END"},  {"TCP", "END"}};
    const EdgeSet balanced_edges{{"ETH", "IPv4"}, {"ETH", "IPv6"}, {"IPv4", "EXT"}, {"IPv6", "EXT"},
                                 {"EXT", "UDP"},  {"EXT", "TCP"},  {"UDP", "END"},  {"TCP", "END"}};
    c.expect(g.edges.size() == 15, "original edge count " + std::to_string(g.edges.size()));
    c.expect(reduced.edges == reduced_edges, "reduced edge set differs");
    c.expect(balanced_pipeline_graph(g).base.edges == balanced_edges, "balanced edge set differs");
    for (const auto* stage : {"original", "reduced", "balanced"}) {
        const auto golden = cli::read_text_file(testing::golden(std::string("fig5_") + stage + ".dot"));
        c.expect(stage_dot(g, parse_stage(stage)) == golden, std::string(stage) + " DOT differs from golden");
    }
    const double t = seconds_since(t0);
    c.expect(t < kFig5RuntimeLimitS, "runtime " + std::to_string(t) + " s");
    c.why << (c.ok ? "9 reduced and 8 balanced edges, DOT byte-exact" : "");
    return c;
}

// Criterion 2: simple parser depth 6 and every packet's first output word
// leaves exactly 6 cycles after its first input word.
Check simple_latency() {
    Check c;
    const auto t0 = Clock::now();
    const auto g = load("simple_parser.json");
    const auto plan = compile_plan(g, kBusWidth);
    const std::uint64_t target_cycles = kSimpleLatencyPs * kClockKhz / 1'000'000'000;
    c.expect(kSimpleLatencyPs * kClockKhz % 1'000'000'000 == 0, "target latency is not a whole cycle count");
    c.expect(target_cycles == kSimpleDepth, "target latency converts to " + std::to_string(target_cycles));
    c.expect(plan.depth_cycles == kSimpleDepth, "depth_cycles " + std::to_string(plan.depth_cycles));

    const auto run = simulate_packets(plan, corpus_bytes(g, kLatencyPackets, 2));
    std::size_t off = 0;
    for (const auto& t : run.timing) off += t.latency() != kSimpleDepth;
    c.expect(run.timing.size() == kLatencyPackets, "timed " + std::to_string(run.timing.size()) + " packets");
    c.expect(off == 0, std::to_string(off) + " packets with latency other than 6");
    const double t = seconds_since(t0);
    c.expect(t < kLatencyRuntimeLimitS, "runtime " + std::to_string(t) + " s");
    if (c.ok) c.why << "depth 6, 10000/10000 packets at 6 cycles (19.2 ns at 312.5 MHz)";
    return c;
}

// Criterion 3: full parser depth at most 9; 8 is reached, so it is pinned.
Check full_latency() {
    Check c;
    const auto g = load("full_parser.json");
    const auto plan = compile_plan(g, kBusWidth);
    const std::uint64_t target_cycles = kFullLatencyPs * kClockKhz / 1'000'000'000;
    c.expect(target_cycles == kFullDepthTarget, "target latency converts to " + std::to_string(target_cycles));
    c.expect(plan.depth_cycles <= kFullDepthCeiling, "depth_cycles " + std::to_string(plan.depth_cycles));
    c.expect(plan.depth_cycles == kFullDepthTarget, "depth_cycles " + std::to_string(plan.depth_cycles) + " not 8");
    const std::string documented =
        "[ethernet][vlan_outer][vlan_inner][ipv6 mpls0][ext1 mpls1][ext2 ipv4][icmp icmpv6 tcp udp]";
    c.expect(level_names(plan) == documented, "level assignment " + level_names(plan));
    const auto run = simulate_packets(plan, corpus_bytes(g, 2000, 3));
    for (const auto& t : run.timing) {
        if (t.latency() != kFullDepthTarget) {
            c.expect(false, "packet latency " + std::to_string(t.latency()));
            break;
        }
    }
    if (c.ok) c.why << "depth 8 (target 8, ceiling 9), levels " << documented;
    return c;
}

// Criterion 4: 320 bits at 312.5 MHz is 100 Gb/s, and N back-to-back W-word
// packets take exactly N*W + depth cycles.
Check throughput() {
    Check c;
    const auto g = load("simple_parser.json");
    const auto plan = compile_plan(g, kBusWidth);
    const auto stats = plan_stats(plan, kClockKhz / 1000.0);
    c.expect(stats.throughput_gbps && *stats.throughput_gbps == kThroughputGbps, "throughput differs from 100");
    std::ostringstream out, err;
    cli::cmd_stats({testing::fixture("simple_parser.json"), kBusWidth, kClockKhz / 1000.0}, out, err);
    c.expect(out.str().find("throughput_gbps: 100\n") != std::string::npos, "stats command does not print 100");

    for (const auto* name : {"simple_parser.json", "full_parser.json"}) {
        const auto fg = load(name);
        const auto fp = compile_plan(fg, kBusWidth);
        const auto pool = corpus_bytes(fg, 200, 4);
        for (std::size_t w : {1u, 2u, 3u, 8u}) {
            std::vector<std::vector<std::uint8_t>> packets;
            for (auto b : pool) {
                b.resize(w * kBusWidth / 8, 0xA5);
                packets.push_back(std::move(b));
            }
            const auto run = simulate_packets(fp, packets);
            const std::uint64_t expected = packets.size() * w + fp.depth_cycles;
            c.expect(run.cycles_total == expected, std::string(name) + " W=" + std::to_string(w) + " took " +
                                                       std::to_string(run.cycles_total) + " cycles");
        }
    }
    if (c.ok) c.why << "100 Gb/s exact; N*W + depth cycles for W in {1,2,3,8}, N=200";
    return c;
}

// Criterion 5: pipeline PHVs and exceptions equal the reference parser over
// 10000 seeded packets per fixture.
Check oracle_equivalence() {
    Check c;
    const auto t0 = Clock::now();
    std::ostringstream summary;
    for (const auto* name : {"simple_parser.json", "full_parser.json"}) {
        const auto g = load(name);
        std::ostringstream out, err;
        const int code =
            cli::cmd_compare({testing::fixture(name), testing::fixture(name), kEquivalencePackets, 1}, out, err);
        c.expect(code == 0, std::string(name) + " compare exit " + std::to_string(code) + ": " + out.str());

        std::set<std::uint32_t> ihl;
        std::set<std::size_t> ext, tags;
        std::map<Mutation, std::size_t> mutations;
        for (const auto& p : generate_corpus(g, kEquivalencePackets, 1)) {
            ++mutations[p.mutation];
            std::size_t e = 0, t = 0;
            for (const auto& h : p.spec.header_sequence) {
                e += h.state.rfind("ext", 0) == 0;
                t += h.state.rfind("vlan", 0) == 0 || h.state.rfind("mpls", 0) == 0;
            }
            ext.insert(e);
            tags.insert(t);
            if (p.mutation == Mutation::None) {
                for (const auto& phv : reference_parse(g, p.bytes).phvs) {
                    if (phv.header == "ipv4") ihl.insert(phv.bit_count / 32);
                }
            }
        }
        c.expect(ihl.size() == 11 && *ihl.begin() == 5 && *ihl.rbegin() == 15, std::string(name) + " IHL coverage");
        c.expect(ext.contains(0) && ext.contains(1) && ext.contains(2), std::string(name) + " extension coverage");
        if (std::string(name) == "full_parser.json") {
            c.expect(tags.contains(0) && tags.contains(1) && tags.contains(2), "tag coverage");
        }
        c.expect(mutations[Mutation::Truncated] > 0 && mutations[Mutation::UnknownKey] > 0,
                 std::string(name) + " malformed coverage");
        summary << " " << name << ": " << mutations[Mutation::Truncated] << " truncated, "
                << mutations[Mutation::UnknownKey] << " unknown key, " << mutations[Mutation::BadSize] << " bad size;";
    }
    const double t = seconds_since(t0);
    c.expect(t < kEquivalenceRuntimeLimitS, "runtime " + std::to_string(t) + " s");
    if (c.ok) c.why << "2 x 10000 packets identical in " << t << " s;" << summary.str();
    return c;
}

// Criterion 6: every ROM entry equals the arithmetic it replaces.
Check rom_equivalence() {
    Check c;
    std::size_t entries = 0;
    for (const auto* name : {"simple_parser.json", "full_parser.json", "fig5.json"}) {
        const auto g = load(name);
        for (std::uint32_t bus : {64u, 128u, 320u, 512u}) {
            const auto plan = compile_plan(g, bus);
            for (const auto& [_, e] : plan.engines) {
                const auto& h = g.header_of(e.name);
                std::vector<std::pair<std::uint64_t, std::uint32_t>> domain;
                if (h.size_expr) {
                    const auto width = h.find_field(h.size_expr->field)->width_bits;
                    for (std::uint64_t v = 0; v < (std::uint64_t{1} << width); ++v) {
                        const bool valid = std::find(h.valid_size_values.begin(), h.valid_size_values.end(), v) !=
                                           h.valid_size_values.end();
                        c.expect(e.size_lut->contains(v) == valid, e.name + " LUT domain");
                        if (valid) {
                            const auto size = static_cast<std::uint32_t>(h.size_expr->multiplier * v + h.size_expr->addend);
                            c.expect(e.size_lut->at(v) == size, e.name + " LUT value");
                            domain.push_back({v, size});
                        }
                    }
                } else {
                    domain.push_back({0, h.max_size_bits});
                    c.expect(e.fixed_size_bits == h.max_size_bits, e.name + " fixed size");
                }
                for (const auto& [_, s] : domain) {
                    c.expect(e.roms.align_right.at(s) == s % bus, e.name + " align_right");
                    c.expect(e.roms.align_left.at(s) == (bus - s % bus) % bus, e.name + " align_left");
                    entries += 2;
                }
                c.expect(e.roms.align_right.size() == domain.size(), e.name + " ROM domain");
                for (std::size_t k = 0; k < e.roms.extract_shifts.size(); ++k) {
                    c.expect(e.roms.extract_shifts[k] == k * bus, e.name + " extract shift");
                    ++entries;
                }
            }
        }
    }
    if (c.ok) c.why << entries << " ROM entries match brute force over 3 fixtures and 4 bus widths";
    return c;
}

// Criterion 7: reduction keeps reachability and is edge-minimal.
Check reduction_oracle() {
    Check c;
    std::mt19937_64 rng(7);
    std::size_t edges_checked = 0;
    for (std::size_t i = 0; i < kRandomDags; ++i) {
        const std::size_t states = 1 + i % (kMaxDagNodes - 1);
        const auto t = testing::random_parse_graph(rng, states).topology();
        c.expect(t.nodes.size() <= kMaxDagNodes, "graph too large");
        const auto r = transitive_reduction(t);
        const auto reach = testing::reachability(t);
        c.expect(testing::reachability(r) == reach, "reachability changed on graph " + std::to_string(i));
        for (const auto& e : r.edges) {
            auto fewer = r;
            fewer.edges.erase(e);
            c.expect(testing::reachability(fewer) != reach, "redundant edge on graph " + std::to_string(i));
            ++edges_checked;
        }
    }
    if (c.ok) c.why << kRandomDags << " DAGs, reachability equal, all " << edges_checked << " kept edges essential";
    return c;
}

// Criterion 8: two runs of every command with the same seed are identical.
Check determinism() {
    Check c;
    const auto plan_a = testing::build_path("accept_plan_a.json");
    const auto plan_b = testing::build_path("accept_plan_b.json");
    const auto phv_a = testing::build_path("accept_phv_a.jsonl");
    const auto phv_b = testing::build_path("accept_phv_b.jsonl");
    const auto trace_a = testing::build_path("accept_trace_a.csv");
    const auto trace_b = testing::build_path("accept_trace_b.csv");
    const auto spec = testing::fixture("full_parser.json");

    auto twice = [&](const std::string& label, const std::function<int(std::ostream&, std::ostream&, int)>& cmd) {
        std::ostringstream o1, e1, o2, e2;
        const int r1 = cmd(o1, e1, 0);
        const int r2 = cmd(o2, e2, 1);
        c.expect(r1 == 0 && r2 == 0, label + " failed");
        c.expect(o1.str() == o2.str() && e1.str() == e2.str(), label + " output differs");
    };
    twice("compile", [&](std::ostream& o, std::ostream& e, int k) {
        return cli::cmd_compile({spec, kBusWidth, k ? plan_b : plan_a}, o, e);
    });
    c.expect(cli::read_text_file(plan_a) == cli::read_text_file(plan_b), "plan files differ");
    twice("simulate", [&](std::ostream& o, std::ostream& e, int k) {
        cli::SimulateOptions s;
        s.input_path = spec;
        s.packets = 2000;
        s.seed = 11;
        s.out_path = k ? phv_b : phv_a;
        s.trace_path = k ? trace_b : trace_a;
        return cli::cmd_simulate(s, o, e);
    });
    c.expect(cli::read_text_file(phv_a) == cli::read_text_file(phv_b), "PHV files differ");
    c.expect(cli::read_text_file(trace_a) == cli::read_text_file(trace_b), "trace files differ");
    twice("compare", [&](std::ostream& o, std::ostream& e, int) {
        return cli::cmd_compare({spec, spec, 2000, 11}, o, e);
    });
    twice("dot", [&](std::ostream& o, std::ostream& e, int) {
        return cli::cmd_dot({spec, "balanced", std::nullopt}, o, e);
    });
    twice("stats", [&](std::ostream& o, std::ostream& e, int) {
        return cli::cmd_stats({spec, kBusWidth, 312.5}, o, e);
    });
    for (const auto& p : {plan_a, plan_b, phv_a, phv_b, trace_a, trace_b}) std::remove(p.c_str());
    if (c.ok) c.why << "compile, simulate, compare, dot and stats byte-identical across runs";
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"fig5 graph transformation", fig5_reproduction},
        {"simple parser latency", simple_latency},
        {"full parser latency", full_latency},
        {"throughput and streaming", throughput},
        {"oracle equivalence", oracle_equivalence},
        {"ROM equivalence", rom_equivalence},
        {"transitive reduction oracle", reduction_oracle},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.why << "exception: " << e.what();
        }
        failures += !c.ok;
        std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
                  << "): " << c.why.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
